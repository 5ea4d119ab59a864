#pragma once

#include "shotlog/clip_io.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace shotlog {

struct PooledClip {
  std::string id;
  std::shared_ptr<const AudioClip> clip;
};

using ClipPool = std::vector<PooledClip>;

ClipPool load_pool(const std::vector<std::filesystem::path>& files);

struct SnrRange {
  double lo_db = 0.0;
  double hi_db = 20.0;
};

struct SceneSpec {
  double duration_s = 20.0;
  double gunshot_rate_per_hour = 1587.0;
  // 0.98 per hour, increased a hundredfold so explosions are not vanishingly rare.
  double explosion_rate_per_hour = 98.0;
  SnrRange snr_db_range;
  std::uint64_t seed = 0;
  ClipPool background_pool;
  ClipPool gunshot_pool;
  ClipPool explosion_pool;

  // Throws ConfigError on a broken invariant.
  void validate() const;
};

struct Placement {
  std::string clip_id;
  EventLabel label = EventLabel::gunshot;
  double start_s = 0.0;
  // Gain applied before the scene-wide normalization.
  double gain_db = 0.0;
  double target_snr_db = 0.0;
  double realized_snr_db = 0.0;
  bool truncated = false;
};

struct SceneInstance {
  AudioClip mixture;
  std::vector<EventAnnotation> annotations;
  std::vector<Placement> placements;
  // Background segment as it appears in the mixture (after normalization).
  AudioClip background;
  std::string background_id;
  double background_offset_s = 0.0;
  // <= 0; applied to everything when the raw mix would clip.
  double normalization_gain_db = 0.0;
};

// Homogeneous Poisson arrivals on [0, duration_s), sorted. Throws DomainError
// for a negative rate or non-positive duration.
std::vector<double> sample_event_times(double rate_per_hour, double duration_s, std::mt19937_64& rng);

// Gain in dB that brings the event's mean-square power over its span of the
// background (starting at start_s, truncated at the background end) to
// target_snr_db above the background's power over the same span.
double compute_event_gain(const AudioClip& event, const AudioClip& background, double start_s,
                          double target_snr_db);

// Nearest sample index for a time in seconds.
std::size_t onset_sample(double start_s, int sample_rate_hz) noexcept;

SceneInstance synthesize(const SceneSpec& spec);

// Fabricated stand-ins used when no recorded pools exist.
AudioClip proxy_gunshot(int sample_rate_hz, std::mt19937_64& rng);
AudioClip proxy_explosion(int sample_rate_hz, std::mt19937_64& rng);
AudioClip proxy_background(int sample_rate_hz, double seconds, std::mt19937_64& rng);
// Unit-RMS noise with a 1/f power spectrum (DC removed).
std::vector<double> pink_noise(std::size_t n, std::mt19937_64& rng);

struct ProxyPoolOptions {
  int sample_rate_hz = 16000;
  std::size_t n_backgrounds = 12;
  double background_seconds = 40.0;
  std::size_t n_gunshots = 48;
  std::size_t n_explosions = 16;
  std::uint64_t seed = 0;
};

struct ProxyPools {
  ClipPool backgrounds;
  ClipPool gunshots;
  ClipPool explosions;
};

ProxyPools make_proxy_pools(const ProxyPoolOptions& options);

// Scene spec file (TOML-style key = value). Pool lists left empty mean
// "fabricate proxies".
struct SceneSpecFile {
  SceneSpec spec;
  // Whether the text set `seed` explicitly.
  bool seed_given = false;
  std::size_t n_scenes = 1;
  int sample_rate_hz = 16000;
  // First scene's local wall-clock start; later scenes follow back to back.
  std::string start_time = "2024-01-08T08:00:00";
  std::vector<std::filesystem::path> background_files;
  std::vector<std::filesystem::path> gunshot_files;
  std::vector<std::filesystem::path> explosion_files;
};

SceneSpecFile parse_scene_spec(std::string_view text);
SceneSpecFile read_scene_spec(const std::filesystem::path& path);

// Fills the pools of file.spec from the listed WAVs, fabricating proxies for
// any empty list. Relative paths resolve against base_dir.
void resolve_pools(SceneSpecFile& file, const std::filesystem::path& base_dir);

struct ManifestRow {
  std::string scene_id;
  std::string audio_file;
  std::string annotation_file;
  std::uint64_t seed = 0;
  std::size_t n_gunshots = 0;
  std::size_t n_explosions = 0;
  std::string start_time;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

std::string format_manifest(const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> parse_manifest(std::string_view csv);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

} // namespace shotlog
