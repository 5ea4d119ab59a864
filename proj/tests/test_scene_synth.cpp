#include "shotlog/error.hpp"
#include "shotlog/indicators.hpp"
#include "shotlog/scene_synth.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <map>
#include <numeric>

using namespace shotlog;
namespace tu = shotlog::testing;

namespace {

PooledClip pooled(std::string id, std::vector<double> x, int fs = 16000) {
  return {std::move(id), std::make_shared<const AudioClip>(std::move(x), fs)};
}

double power(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

SceneSpec small_spec(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SceneSpec s;
  s.seed = seed;
  s.background_pool = {{"bg", std::make_shared<const AudioClip>(proxy_background(16000, 30.0, rng))}};
  for (int i = 0; i < 4; ++i)
    s.gunshot_pool.push_back({"g" + std::to_string(i), std::make_shared<const AudioClip>(proxy_gunshot(16000, rng))});
  s.explosion_pool = {{"e", std::make_shared<const AudioClip>(proxy_explosion(16000, rng))}};
  return s;
}

struct Moments {
  double mean, variance;
};

Moments count_moments(double rate, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> c(draws);
  for (auto& v : c) v = static_cast<double>(sample_event_times(rate, 20.0, rng).size());
  const double mean = std::accumulate(c.begin(), c.end(), 0.0) / draws;
  double var = 0.0;
  for (double v : c) var += (v - mean) * (v - mean);
  return {mean, var / (draws - 1)};
}

} // namespace

TEST_CASE("sample_event_times") {
  std::mt19937_64 rng(1);
  SUBCASE("zero rate never produces events") {
    for (int i = 0; i < 100; ++i) CHECK(sample_event_times(0.0, 20.0, rng).empty());
  }
  SUBCASE("onsets are sorted and lie in [0, duration)") {
    for (int i = 0; i < 200; ++i) {
      const auto t = sample_event_times(1587.0, 20.0, rng);
      CHECK(std::is_sorted(t.begin(), t.end()));
      for (double v : t) {
        CHECK(v >= 0.0);
        CHECK(v < 20.0);
      }
    }
  }
  SUBCASE("gunshot rate: Poisson mean 8.817 and dispersion 1") {
    const auto m = count_moments(1587.0, 10000, 42);
    const double expected = 1587.0 * 20.0 / 3600.0;
    CHECK(std::abs(m.mean / expected - 1.0) <= 0.02);
    CHECK(std::abs(m.variance / m.mean - 1.0) <= 0.05);
  }
  SUBCASE("explosion rate: Poisson mean 0.544 and dispersion 1") {
    const auto m = count_moments(98.0, 10000, 43);
    CHECK(std::abs(m.mean / (98.0 * 20.0 / 3600.0) - 1.0) <= 0.05);
    CHECK(std::abs(m.variance / m.mean - 1.0) <= 0.05);
  }
  SUBCASE("onsets are uniform over the scene") {
    std::vector<int> hist(4, 0);
    int total = 0;
    for (int i = 0; i < 2000; ++i)
      for (double v : sample_event_times(1587.0, 20.0, rng)) {
        ++hist[static_cast<int>(v / 5.0)];
        ++total;
      }
    for (int h : hist) CHECK(std::abs(h / double(total) - 0.25) < 0.01);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(sample_event_times(-1.0, 20.0, rng), DomainError);
    CHECK_THROWS_AS(sample_event_times(10.0, 0.0, rng), DomainError);
  }
}

TEST_CASE("compute_event_gain") {
  const auto bg = AudioClip(tu::white_noise(0.1, 16000, 1), 16000);
  SUBCASE("equal power, target 0 dB gives 0 dB") {
    std::vector<double> e(bg.samples().begin() + 4000, bg.samples().begin() + 8000);
    CHECK(std::abs(compute_event_gain(AudioClip(e, 16000), bg, 0.25, 0.0)) < 1e-12);
  }
  SUBCASE("event 10 dB below the background span, target +20 dB gives +30 dB") {
    std::vector<double> e(bg.samples().begin() + 1600, bg.samples().begin() + 3200);
    for (auto& v : e) v *= std::pow(10.0, -0.5);
    CHECK(compute_event_gain(AudioClip(e, 16000), bg, 0.1, 20.0) == doctest::Approx(30.0).epsilon(1e-12));
  }
  SUBCASE("re-measured SNR after applying the gain") {
    const auto e = AudioClip(tu::sine(700.0, 0.3, 0.2, 16000), 16000);
    for (double target : {-10.0, 0.0, 7.5, 20.0}) {
      const double g = std::pow(10.0, compute_event_gain(e, bg, 0.5, target) / 20.0);
      std::vector<double> scaled(e.samples());
      for (auto& v : scaled) v *= g;
      const double measured =
          10.0 * std::log10(power(scaled) / power(std::span(bg.samples()).subspan(8000, scaled.size())));
      CHECK(std::abs(measured - target) <= 0.1);
    }
  }
  SUBCASE("a truncated event uses only the overlapping span") {
    const auto e = AudioClip(tu::white_noise(0.05, 8000, 2), 16000);
    const double g = compute_event_gain(e, bg, 0.75, 3.0);
    const double pe = power(std::span(e.samples()).first(4000));
    const double pb = power(std::span(bg.samples()).subspan(12000, 4000));
    CHECK(g == doctest::Approx(3.0 - 10.0 * std::log10(pe / pb)).epsilon(1e-12));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(compute_event_gain(AudioClip(std::vector<double>(100, 0.0), 16000), bg, 0.1, 0.0),
                    DomainError);
    CHECK_THROWS_AS(compute_event_gain(AudioClip(std::vector<double>(100, 0.1), 16000),
                                       AudioClip(std::vector<double>(16000, 0.0), 16000), 0.1, 0.0),
                    DomainError);
    CHECK_THROWS_AS(compute_event_gain(AudioClip(std::vector<double>(100, 0.1), 44100), bg, 0.1, 0.0),
                    ConfigError);
  }
}

TEST_CASE("synthesize") {
  SUBCASE("no events: the mixture is the background segment") {
    auto s = small_spec(3);
    s.gunshot_rate_per_hour = 0.0;
    s.explosion_rate_per_hour = 0.0;
    const auto scene = synthesize(s);
    CHECK(scene.annotations.empty());
    CHECK(scene.placements.empty());
    CHECK(scene.mixture == scene.background);
    CHECK(scene.mixture.size() == 320000);
    const auto& src = s.background_pool[0].clip->samples();
    const auto off = static_cast<std::size_t>(std::llround(scene.background_offset_s * 16000));
    for (std::size_t i = 0; i < scene.mixture.size(); i += 997)
      REQUIRE(scene.mixture.samples()[i] == src[off + i]);
  }
  SUBCASE("same seed, same scene; other seed, other scene") {
    const auto a = synthesize(small_spec(5));
    const auto b = synthesize(small_spec(5));
    CHECK(a.mixture == b.mixture);
    CHECK(a.annotations == b.annotations);
    auto other = small_spec(5);
    other.seed = 6;
    CHECK(!(synthesize(other).mixture == a.mixture));
  }
  SUBCASE("placements, annotations and the mixing identity") {
    for (std::uint64_t seed = 10; seed < 40; ++seed) {
      auto s = small_spec(seed);
      s.snr_db_range = {-10.0, 25.0};
      const auto scene = synthesize(s);
      REQUIRE(scene.placements.size() == scene.annotations.size());
      CHECK(std::is_sorted(scene.annotations.begin(), scene.annotations.end(),
                           [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; }));
      double peak = 0.0;
      for (double v : scene.mixture.samples()) peak = std::max(peak, std::abs(v));
      CHECK(peak <= 1.0);
      CHECK(scene.normalization_gain_db <= 0.0);

      std::vector<double> rebuilt(scene.background.samples());
      const double norm = std::pow(10.0, scene.normalization_gain_db / 20.0);
      std::map<std::string, const AudioClip*> clips;
      for (const auto& p : s.gunshot_pool) clips[p.id] = p.clip.get();
      for (const auto& p : s.explosion_pool) clips[p.id] = p.clip.get();
      for (std::size_t k = 0; k < scene.placements.size(); ++k) {
        const auto& pl = scene.placements[k];
        const auto& an = scene.annotations[k];
        CHECK(an.onset_s == pl.start_s);
        CHECK(an.label == pl.label);
        CHECK(an.onset_s >= 0.0);
        CHECK(an.offset_s <= s.duration_s);
        CHECK(an.offset_s > an.onset_s);
        const auto& clip = *clips.at(pl.clip_id);
        CHECK(pl.truncated == (an.onset_s + clip.duration_s() > s.duration_s + 1e-9));

        // Independent re-measurement from the stored components.
        const std::size_t start = onset_sample(pl.start_s, 16000);
        const std::size_t len = std::min(clip.size(), rebuilt.size() - start);
        const double g = std::pow(10.0, pl.gain_db / 20.0) * norm;
        std::vector<double> event(len);
        for (std::size_t i = 0; i < len; ++i) {
          event[i] = g * clip.samples()[i];
          rebuilt[start + i] += event[i];
        }
        const double snr = 10.0 * std::log10(power(event) /
                                             power(std::span(scene.background.samples()).subspan(start, len)));
        CHECK(std::abs(snr - pl.target_snr_db) <= 0.1);
        CHECK(std::abs(pl.realized_snr_db - pl.target_snr_db) <= 0.1);
        CHECK(pl.target_snr_db >= -10.0);
        CHECK(pl.target_snr_db <= 25.0);
      }
      for (std::size_t i = 0; i < rebuilt.size(); ++i)
        REQUIRE(std::abs(rebuilt[i] - scene.mixture.samples()[i]) < 1e-12);

      // Events only add energy over their annotated spans.
      for (const auto& an : scene.annotations) {
        const std::size_t a = onset_sample(an.onset_s, 16000);
        const std::size_t b = onset_sample(an.offset_s, 16000);
        CHECK(power(std::span(scene.mixture.samples()).subspan(a, b - a)) >=
              power(std::span(scene.background.samples()).subspan(a, b - a)));
      }
    }
  }
  SUBCASE("500 scenes at the default rates") {
    auto s = small_spec(77);
    std::size_t gunshots = 0, explosions = 0;
    for (std::uint64_t i = 0; i < 500; ++i) {
      s.seed = 1000 + i;
      for (const auto& a : synthesize(s).annotations)
        (a.label == EventLabel::gunshot ? gunshots : explosions)++;
    }
    CHECK(std::abs(gunshots / (500.0 * 1587.0 * 20.0 / 3600.0) - 1.0) <= 0.10);
    CHECK(explosions > 200);
    CHECK(explosions < 350);
  }
  SUBCASE("configuration errors") {
    auto s = small_spec(1);
    s.gunshot_pool.push_back(pooled("fast", std::vector<double>(500, 0.1), 48000));
    CHECK_THROWS_AS(synthesize(s), ConfigError);
    s = small_spec(1);
    s.gunshot_pool.clear();
    CHECK_THROWS_AS(synthesize(s), ConfigError);
    s = small_spec(1);
    s.snr_db_range = {5.0, 1.0};
    CHECK_THROWS_AS(synthesize(s), ConfigError);
    s = small_spec(1);
    s.duration_s = 0.0;
    CHECK_THROWS_AS(synthesize(s), ConfigError);
  }
  SUBCASE("short backgrounds are tiled") {
    auto s = small_spec(2);
    s.background_pool = {pooled("short", tu::white_noise(0.01, 16000, 9))};
    s.duration_s = 3.0;
    const auto scene = synthesize(s);
    CHECK(scene.background.size() == 48000);
    CHECK(scene.background.samples()[16000] == scene.background.samples()[0]);
  }
}

TEST_CASE("proxy clips") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    const auto g = proxy_gunshot(16000, rng);
    CHECK(g.duration_s() > 0.2);
    CHECK(g.duration_s() < 0.36);
    const auto e = proxy_explosion(16000, rng);
    CHECK(e.duration_s() > 1.0);
    CHECK(e.duration_s() < 1.8);
    // The explosion's energy is concentrated below 400 Hz.
    std::vector<double> padded(e.samples());
    padded.resize(16000, 0.0);
    const auto spec = third_octave_spectrogram(padded, 16000);
    double low = 0.0, all = 0.0;
    for (std::size_t f = 0; f < spec.n_frames(); ++f)
      for (std::size_t b = 0; b < kBandCount; ++b) {
        const double p = std::pow(10.0, spec.at(f, b) / 10.0);
        all += p;
        if (spec.band_centers_hz[b] < 400.0) low += p;
      }
    CHECK(low / all > 0.7);
  }
  SUBCASE("pink noise has equal power per 1/3-octave band") {
    const auto x = pink_noise(16000 * 8, rng);
    CHECK(power(x) == doctest::Approx(1.0));
    const auto spec = third_octave_spectrogram(x, 16000);
    std::vector<double> band(kBandCount, 0.0);
    for (std::size_t f = 0; f < spec.n_frames(); ++f)
      for (std::size_t b = 0; b < kBandCount; ++b) band[b] += spec.at(f, b) / spec.n_frames();
    for (std::size_t b = 8; b < 25; ++b) CHECK(std::abs(band[b] - band[16]) < 1.5);
  }
  SUBCASE("pools are deterministic and sized") {
    ProxyPoolOptions o;
    o.n_backgrounds = 2;
    o.background_seconds = 5.0;
    o.n_gunshots = 3;
    o.n_explosions = 2;
    o.seed = 4;
    const auto a = make_proxy_pools(o);
    const auto b = make_proxy_pools(o);
    CHECK(a.backgrounds.size() == 2);
    CHECK(a.gunshots.size() == 3);
    CHECK(a.explosions.size() == 2);
    CHECK(*a.backgrounds[1].clip == *b.backgrounds[1].clip);
    CHECK(*a.gunshots[2].clip == *b.gunshots[2].clip);
    CHECK(a.gunshots[0].id != a.gunshots[1].id);
  }
}

TEST_CASE("scene spec file") {
  SUBCASE("all keys") {
    const auto f = parse_scene_spec(R"(
duration_s = 10.5
gunshot_rate_per_hour = 100
explosion_rate_per_hour = 0
snr_db_range = [-3, 12.5]
seed = 18446744073709551615
n_scenes = 7
sample_rate_hz = 44100
start_time = "2024-03-02T10:00:00"
gunshot_pool = ["a.wav", "b.wav"]
)");
    CHECK(f.spec.duration_s == 10.5);
    CHECK(f.spec.gunshot_rate_per_hour == 100.0);
    CHECK(f.spec.explosion_rate_per_hour == 0.0);
    CHECK(f.spec.snr_db_range.lo_db == -3.0);
    CHECK(f.spec.snr_db_range.hi_db == 12.5);
    CHECK(f.spec.seed == 18446744073709551615ULL);
    CHECK(f.n_scenes == 7);
    CHECK(f.sample_rate_hz == 44100);
    CHECK(f.start_time == "2024-03-02T10:00:00");
    REQUIRE(f.gunshot_files.size() == 2);
    CHECK(f.gunshot_files[1] == "b.wav");
    CHECK(f.background_files.empty());
  }
  SUBCASE("a [scene] section works and unknown keys inside it fail") {
    CHECK(parse_scene_spec("[scene]\nseed = 3\n").spec.seed == 3);
    CHECK_THROWS_AS(parse_scene_spec("[scene]\nsede = 3\n"), ConfigError);
  }
  SUBCASE("defaults") {
    const auto f = parse_scene_spec("");
    CHECK(f.spec.duration_s == 20.0);
    CHECK(f.spec.gunshot_rate_per_hour == 1587.0);
    CHECK(f.spec.explosion_rate_per_hour == 98.0);
    CHECK(f.sample_rate_hz == 16000);
  }
  SUBCASE("bad values") {
    CHECK_THROWS_AS(parse_scene_spec("duration_s = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_scene_spec("duration_s = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_scene_spec("snr_db_range = [4, 1]\n"), ConfigError);
    CHECK_THROWS_AS(parse_scene_spec("snr_db_range = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_scene_spec("sample_rate_hz = 8000\n"), ConfigError);
    CHECK_THROWS_AS(parse_scene_spec("seed = -4\n"), ConfigError);
  }
  SUBCASE("resolve_pools fabricates proxies for empty lists") {
    auto f = parse_scene_spec("duration_s = 2\nseed = 5\n");
    resolve_pools(f, ".");
    CHECK(!f.spec.background_pool.empty());
    CHECK(!f.spec.gunshot_pool.empty());
    CHECK(!f.spec.explosion_pool.empty());
    CHECK(synthesize(f.spec).mixture.size() == 32000);
  }
  SUBCASE("resolve_pools reads listed files relative to the base dir") {
    tu::TempDir dir;
    write_wav(AudioClip(tu::white_noise(0.01, 16000, 3), 16000), dir / "bg.wav");
    auto f = parse_scene_spec("background_pool = [\"bg.wav\"]\n");
    resolve_pools(f, dir.path());
    REQUIRE(f.spec.background_pool.size() == 1);
    CHECK(f.spec.background_pool[0].id == "bg.wav");
    CHECK(f.spec.background_pool[0].clip->size() == 16000);
  }
}

TEST_CASE("manifest") {
  std::vector<ManifestRow> rows{{"scene-0000", "scene-0000.wav", "scene-0000.jsonl", 12, 9, 1, "2024-01-08T08:00:00"},
                                {"scene-0001", "scene-0001.wav", "scene-0001.jsonl", 13, 7, 0, "2024-01-08T08:00:20"}};
  const auto text = format_manifest(rows);
  CHECK(text.rfind("scene_id,audio_file,annotation_file,seed,n_gunshots,n_explosions,start_time\n", 0) == 0);
  CHECK(parse_manifest(text) == rows);
  CHECK_THROWS_AS(parse_manifest("a,b\n"), ValidationError);
  CHECK_THROWS_AS(parse_manifest(text + "x,y\n"), ValidationError);
  rows[0].scene_id = "bad,id";
  CHECK_THROWS_AS(format_manifest(rows), ValidationError);
}
