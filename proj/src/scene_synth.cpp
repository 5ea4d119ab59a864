#include "shotlog/scene_synth.hpp"

#include "fft.hpp"
#include "shotlog/error.hpp"
#include "shotlog/seed.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace shotlog {

namespace {

double mean_square(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

// In-place one-pole low-pass.
void lowpass(std::vector<double>& x, double cutoff_hz, int fs) {
  const double a = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz / fs);
  double y = 0.0;
  for (auto& v : x) {
    y += a * (v - y);
    v = y;
  }
}

void scale_to_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (auto& v : x) v *= peak / m;
}

std::size_t decay_length(double tau_s, double floor_db, int fs) {
  return static_cast<std::size_t>(std::ceil(tau_s * floor_db / 20.0 * std::numbers::ln10 * fs));
}

const PooledClip& pick(const ClipPool& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
  return pool[dist(rng)];
}

} // namespace

ClipPool load_pool(const std::vector<std::filesystem::path>& files) {
  ClipPool pool;
  pool.reserve(files.size());
  for (const auto& f : files)
    pool.push_back({f.filename().string(), std::make_shared<const AudioClip>(read_wav(f))});
  return pool;
}

void SceneSpec::validate() const {
  if (!(duration_s > 0.0)) throw ConfigError("scene duration_s must be positive");
  if (!(gunshot_rate_per_hour >= 0.0) || !(explosion_rate_per_hour >= 0.0))
    throw ConfigError("event rates must be non-negative");
  if (!(snr_db_range.lo_db <= snr_db_range.hi_db))
    throw ConfigError("snr_db_range must satisfy lo <= hi");
  if (background_pool.empty()) throw ConfigError("background pool is empty");
  if (gunshot_rate_per_hour > 0.0 && gunshot_pool.empty())
    throw ConfigError("gunshot pool is empty but gunshot rate is positive");
  if (explosion_rate_per_hour > 0.0 && explosion_pool.empty())
    throw ConfigError("explosion pool is empty but explosion rate is positive");
}

std::vector<double> sample_event_times(double rate_per_hour, double duration_s, std::mt19937_64& rng) {
  if (!(rate_per_hour >= 0.0)) throw DomainError("event rate must be non-negative");
  if (!(duration_s > 0.0)) throw DomainError("duration must be positive");
  const double mean = rate_per_hour * duration_s / 3600.0;
  if (mean == 0.0) return {};
  const auto count = std::poisson_distribution<long>(mean)(rng);
  std::uniform_real_distribution<double> when(0.0, duration_s);
  std::vector<double> t(static_cast<std::size_t>(count));
  for (auto& v : t) v = when(rng);
  std::sort(t.begin(), t.end());
  return t;
}

std::size_t onset_sample(double start_s, int sample_rate_hz) noexcept {
  return static_cast<std::size_t>(std::llround(start_s * sample_rate_hz));
}

double compute_event_gain(const AudioClip& event, const AudioClip& background, double start_s,
                          double target_snr_db) {
  if (event.sample_rate_hz() != background.sample_rate_hz())
    throw ConfigError("event and background sample rates differ");
  const std::size_t start = onset_sample(start_s, background.sample_rate_hz());
  if (start_s < 0.0 || start >= background.size())
    throw DomainError("event starts outside the background");
  const std::size_t n = std::min(event.size(), background.size() - start);
  const double pe = mean_square(std::span(event.samples()).first(n));
  const double pb = mean_square(std::span(background.samples()).subspan(start, n));
  if (pe == 0.0) throw DomainError("event has zero power over its span");
  if (pb == 0.0) throw DomainError("background has zero power over the event span");
  return target_snr_db - 10.0 * std::log10(pe / pb);
}

SceneInstance synthesize(const SceneSpec& spec) {
  spec.validate();
  const int fs = spec.background_pool.front().clip->sample_rate_hz();
  auto check_rate = [fs](const ClipPool& pool) {
    for (const auto& c : pool)
      if (c.clip->sample_rate_hz() != fs)
        throw ConfigError(fmt::format("clip {} has sample rate {} Hz, expected {} Hz", c.id,
                                      c.clip->sample_rate_hz(), fs));
  };
  check_rate(spec.background_pool);
  check_rate(spec.gunshot_pool);
  check_rate(spec.explosion_pool);

  std::mt19937_64 rng(spec.seed);
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * fs));

  // Background segment, tiled if the source is shorter than the scene.
  SceneInstance out;
  const auto& bg = pick(spec.background_pool, rng);
  const auto& src = bg.clip->samples();
  if (src.empty()) throw ConfigError(fmt::format("background {} is empty", bg.id));
  std::size_t offset = 0;
  if (src.size() > n) offset = std::uniform_int_distribution<std::size_t>(0, src.size() - n)(rng);
  std::vector<double> background(n);
  for (std::size_t i = 0; i < n; ++i) background[i] = src[(offset + i) % src.size()];
  out.background_id = bg.id;
  out.background_offset_s = static_cast<double>(offset) / fs;
  const AudioClip background_clip(background, fs);

  struct Pending {
    const PooledClip* clip;
    EventLabel label;
    double start_s;
  };
  std::vector<Pending> pending;
  for (double t : sample_event_times(spec.gunshot_rate_per_hour, spec.duration_s, rng))
    pending.push_back({&pick(spec.gunshot_pool, rng), EventLabel::gunshot, t});
  for (double t : sample_event_times(spec.explosion_rate_per_hour, spec.duration_s, rng))
    pending.push_back({&pick(spec.explosion_pool, rng), EventLabel::explosion, t});
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& a, const Pending& b) { return a.start_s < b.start_s; });

  std::vector<double> mix = background;
  std::vector<std::vector<double>> contributions;
  for (const auto& p : pending) {
    const double snr = uniform(rng, spec.snr_db_range.lo_db, spec.snr_db_range.hi_db);
    const std::size_t start = std::min(onset_sample(p.start_s, fs), n - 1);
    const double onset = static_cast<double>(start) / fs;
    const double gain_db = compute_event_gain(*p.clip->clip, background_clip, onset, snr);
    const double g = std::pow(10.0, gain_db / 20.0);
    const auto& e = p.clip->clip->samples();
    const std::size_t len = std::min(e.size(), n - start);
    std::vector<double> c(len);
    for (std::size_t i = 0; i < len; ++i) {
      c[i] = g * e[i];
      mix[start + i] += c[i];
    }
    Placement pl;
    pl.clip_id = p.clip->id;
    pl.label = p.label;
    pl.start_s = onset;
    pl.gain_db = gain_db;
    pl.target_snr_db = snr;
    pl.truncated = len < e.size();
    out.placements.push_back(pl);
    out.annotations.push_back({onset, static_cast<double>(start + len) / fs, p.label, p.clip->id});
    contributions.push_back(std::move(c));
  }

  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  if (peak > 1.0) {
    for (auto& v : mix) v /= peak;
    for (auto& v : background) v /= peak;
    for (auto& c : contributions)
      for (auto& v : c) v /= peak;
    out.normalization_gain_db = -20.0 * std::log10(peak);
  }

  for (std::size_t k = 0; k < out.placements.size(); ++k) {
    const std::size_t start = onset_sample(out.placements[k].start_s, fs);
    const auto& c = contributions[k];
    const double pb = mean_square(std::span(background).subspan(start, c.size()));
    out.placements[k].realized_snr_db = 10.0 * std::log10(mean_square(c) / pb);
  }

  out.mixture = AudioClip(std::move(mix), fs);
  out.background = AudioClip(std::move(background), fs);
  return out;
}

std::vector<double> pink_noise(std::size_t n, std::mt19937_64& rng) {
  if (n == 0) return {};
  const std::size_t m = detail::next_fast_size(n);
  detail::RealFft fft(m);
  auto x = gaussian(m, rng);
  std::vector<std::complex<double>> spec;
  fft.forward(x, spec);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) spec[k] /= std::sqrt(static_cast<double>(k));
  fft.inverse(spec, x);
  x.resize(n);
  double mean = 0.0;
  for (double v : x) mean += v / static_cast<double>(n);
  for (auto& v : x) v -= mean;
  const double rms = std::sqrt(mean_square(x));
  if (rms > 0.0)
    for (auto& v : x) v /= rms;
  return x;
}

AudioClip proxy_gunshot(int fs, std::mt19937_64& rng) {
  const double tau = 0.060 * uniform(rng, 0.8, 1.25);
  const std::size_t n = decay_length(tau, 40.0, fs);
  auto noise = gaussian(n, rng);
  auto body = noise;
  lowpass(body, uniform(rng, 1500.0, 5000.0), fs);
  const double crack = uniform(rng, 0.2, 0.6);
  const double attack = 0.001 * fs;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double ramp = std::min(1.0, (i + 1) / attack);
    x[i] = ramp * std::exp(-t / tau) * (3.0 * body[i] + crack * noise[i]);
  }
  scale_to_peak(x, 0.5);
  return AudioClip(std::move(x), fs);
}

AudioClip proxy_explosion(int fs, std::mt19937_64& rng) {
  const double tau = 0.300 * uniform(rng, 0.8, 1.25);
  const std::size_t n = decay_length(tau, 40.0, fs);
  auto rumble = gaussian(n, rng);
  const double fc = uniform(rng, 80.0, 250.0);
  lowpass(rumble, fc, fs);
  lowpass(rumble, fc, fs);
  const auto crack = gaussian(n, rng);
  const double attack = 0.005 * fs;
  std::vector<double> x(n);
  double rms_r = std::sqrt(mean_square(rumble));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double ramp = std::min(1.0, (i + 1) / attack);
    x[i] = ramp * (std::exp(-t / tau) * rumble[i] / rms_r + 0.3 * std::exp(-t / 0.015) * crack[i]);
  }
  scale_to_peak(x, 0.5);
  return AudioClip(std::move(x), fs);
}

AudioClip proxy_background(int fs, double seconds, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * fs));
  const double level = std::pow(10.0, uniform(rng, -46.0, -34.0) / 20.0);
  auto x = pink_noise(n, rng);
  for (auto& v : x) v *= level;

  // Distant traffic rumble.
  auto rumble = gaussian(n, rng);
  lowpass(rumble, 120.0, fs);
  lowpass(rumble, 120.0, fs);
  const double rumble_gain = level * uniform(rng, 0.3, 1.5) / std::max(1e-12, std::sqrt(mean_square(rumble)));
  for (std::size_t i = 0; i < n; ++i) x[i] += rumble_gain * rumble[i];

  // Vehicle pass-bys: slow swells of low-passed noise.
  for (double t0 : sample_event_times(240.0, seconds, rng)) {
    const double sigma = uniform(rng, 1.0, 3.0);
    const double peak = level * uniform(rng, 1.0, 5.0);
    auto car = gaussian(n, rng);
    lowpass(car, uniform(rng, 300.0, 900.0), fs);
    const double norm = std::sqrt(mean_square(car));
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (static_cast<double>(i) / fs - t0) / sigma;
      if (std::abs(d) < 4.0) x[i] += peak * std::exp(-0.5 * d * d) * car[i] / norm;
    }
  }

  // Construction knocks: short tonal impulses.
  for (double t0 : sample_event_times(720.0, seconds, rng)) {
    const double f0 = uniform(rng, 150.0, 1500.0);
    const double tau = uniform(rng, 0.010, 0.040);
    const double amp = level * std::pow(10.0, uniform(rng, 10.0, 30.0) / 20.0) * std::numbers::sqrt2;
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const std::size_t start = onset_sample(t0, fs);
    const std::size_t len = std::min(n - start, decay_length(tau, 60.0, fs));
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / fs;
      double v = std::sin(2.0 * std::numbers::pi * f0 * t + phase);
      if (2.76 * f0 < 0.45 * fs) v += 0.5 * std::sin(2.0 * std::numbers::pi * 2.76 * f0 * t);
      x[start + i] += amp * std::exp(-t / tau) * v;
    }
  }

  for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
  return AudioClip(std::move(x), fs);
}

ProxyPools make_proxy_pools(const ProxyPoolOptions& o) {
  ProxyPools pools;
  for (std::size_t i = 0; i < o.n_backgrounds; ++i) {
    std::mt19937_64 rng(derive_seed(o.seed, 1000 + i));
    pools.backgrounds.push_back({fmt::format("proxy-background-{:03}", i),
                                 std::make_shared<const AudioClip>(
                                     proxy_background(o.sample_rate_hz, o.background_seconds, rng))});
  }
  for (std::size_t i = 0; i < o.n_gunshots; ++i) {
    std::mt19937_64 rng(derive_seed(o.seed, 2000 + i));
    pools.gunshots.push_back({fmt::format("proxy-gunshot-{:03}", i),
                              std::make_shared<const AudioClip>(proxy_gunshot(o.sample_rate_hz, rng))});
  }
  for (std::size_t i = 0; i < o.n_explosions; ++i) {
    std::mt19937_64 rng(derive_seed(o.seed, 3000 + i));
    pools.explosions.push_back({fmt::format("proxy-explosion-{:03}", i),
                                std::make_shared<const AudioClip>(proxy_explosion(o.sample_rate_hz, rng))});
  }
  return pools;
}

namespace {

double to_double(const CLI::ConfigItem& item) {
  if (item.inputs.size() != 1) throw ConfigError(fmt::format("{} expects one value", item.fullname()));
  try {
    std::size_t pos = 0;
    const double v = std::stod(item.inputs[0], &pos);
    if (pos != item.inputs[0].size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", item.fullname(), item.inputs[0]));
  }
}

std::uint64_t to_u64(const CLI::ConfigItem& item) {
  if (item.inputs.size() != 1) throw ConfigError(fmt::format("{} expects one value", item.fullname()));
  const auto& s = item.inputs[0];
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", item.fullname(), s));
  return v;
}

std::vector<std::filesystem::path> to_paths(const CLI::ConfigItem& item) {
  std::vector<std::filesystem::path> out;
  for (const auto& s : item.inputs)
    if (!s.empty()) out.emplace_back(s);
  return out;
}

} // namespace

SceneSpecFile parse_scene_spec(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(fmt::format("scene spec: {}", e.what()));
  }
  SceneSpecFile f;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!(item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "scene")))
      continue;
    const auto& k = item.name;
    if (k == "duration_s") f.spec.duration_s = to_double(item);
    else if (k == "gunshot_rate_per_hour") f.spec.gunshot_rate_per_hour = to_double(item);
    else if (k == "explosion_rate_per_hour") f.spec.explosion_rate_per_hour = to_double(item);
    else if (k == "snr_db_range") {
      if (item.inputs.size() != 2) throw ConfigError("snr_db_range expects [lo, hi]");
      CLI::ConfigItem lo = item, hi = item;
      lo.inputs = {item.inputs[0]};
      hi.inputs = {item.inputs[1]};
      f.spec.snr_db_range = {to_double(lo), to_double(hi)};
    } else if (k == "seed") {
      f.spec.seed = to_u64(item);
      f.seed_given = true;
    }
    else if (k == "n_scenes") f.n_scenes = static_cast<std::size_t>(to_u64(item));
    else if (k == "sample_rate_hz") f.sample_rate_hz = static_cast<int>(to_u64(item));
    else if (k == "start_time") {
      if (item.inputs.size() != 1) throw ConfigError("start_time expects one value");
      f.start_time = item.inputs[0];
    } else if (k == "background_pool") f.background_files = to_paths(item);
    else if (k == "gunshot_pool") f.gunshot_files = to_paths(item);
    else if (k == "explosion_pool") f.explosion_files = to_paths(item);
    else if (item.parents.size() == 1) throw ConfigError(fmt::format("scene spec: unknown key '{}'", k));
  }
  if (!is_supported_rate(f.sample_rate_hz))
    throw ConfigError(fmt::format("unsupported sample_rate_hz {}", f.sample_rate_hz));
  if (!(f.spec.duration_s > 0.0)) throw ConfigError("scene duration_s must be positive");
  if (!(f.spec.gunshot_rate_per_hour >= 0.0) || !(f.spec.explosion_rate_per_hour >= 0.0))
    throw ConfigError("event rates must be non-negative");
  if (!(f.spec.snr_db_range.lo_db <= f.spec.snr_db_range.hi_db))
    throw ConfigError("snr_db_range must satisfy lo <= hi");
  return f;
}

SceneSpecFile read_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open scene spec {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_spec(ss.str());
}

void resolve_pools(SceneSpecFile& file, const std::filesystem::path& base_dir) {
  auto absolute = [&](std::vector<std::filesystem::path> v) {
    for (auto& p : v)
      if (p.is_relative()) p = base_dir / p;
    return v;
  };
  ProxyPoolOptions opt;
  opt.sample_rate_hz = file.sample_rate_hz;
  opt.seed = derive_seed(file.spec.seed, 0xC11F);
  opt.background_seconds = std::max(opt.background_seconds, 2.0 * file.spec.duration_s);
  const bool need_proxy =
      file.background_files.empty() || file.gunshot_files.empty() || file.explosion_files.empty();
  ProxyPools proxies;
  if (need_proxy) {
    if (!file.background_files.empty()) opt.n_backgrounds = 0;
    if (!file.gunshot_files.empty()) opt.n_gunshots = 0;
    if (!file.explosion_files.empty()) opt.n_explosions = 0;
    proxies = make_proxy_pools(opt);
  }
  file.spec.background_pool =
      file.background_files.empty() ? proxies.backgrounds : load_pool(absolute(file.background_files));
  file.spec.gunshot_pool =
      file.gunshot_files.empty() ? proxies.gunshots : load_pool(absolute(file.gunshot_files));
  file.spec.explosion_pool =
      file.explosion_files.empty() ? proxies.explosions : load_pool(absolute(file.explosion_files));
}

namespace {

constexpr std::string_view kManifestHeader =
    "scene_id,audio_file,annotation_file,seed,n_gunshots,n_explosions,start_time";

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto c = line.find(',', pos);
    out.emplace_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

} // namespace

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& r : rows) {
    for (const auto* s : {&r.scene_id, &r.audio_file, &r.annotation_file, &r.start_time})
      if (s->find_first_of(",\n\"") != std::string::npos)
        throw ValidationError(fmt::format("manifest field '{}' contains a separator", *s), 0);
    out += fmt::format("{},{},{},{},{},{},{}\n", r.scene_id, r.audio_file, r.annotation_file, r.seed,
                       r.n_gunshots, r.n_explosions, r.start_time);
  }
  return out;
}

std::vector<ManifestRow> parse_manifest(std::string_view csv) {
  std::vector<ManifestRow> rows;
  std::size_t line_no = 0, pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    auto line = csv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line != kManifestHeader)
        throw ValidationError(fmt::format("unexpected manifest header '{}'", line), line_no);
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 7) throw ValidationError("manifest row needs 7 fields", line_no);
    auto num = [&](const std::string& s) {
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size())
        throw ValidationError(fmt::format("'{}' is not an integer", s), line_no);
      return v;
    };
    rows.push_back({f[0], f[1], f[2], num(f[3]), static_cast<std::size_t>(num(f[4])),
                    static_cast<std::size_t>(num(f[5])), f[6]});
  }
  if (header) throw ValidationError("manifest is empty", 1);
  return rows;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open manifest {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

} // namespace shotlog
