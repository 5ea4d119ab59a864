#pragma once

#include "shotlog/clip_io.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace shotlog {

// Shared analysis grid: frame i covers [i * kHopSeconds, (i + 1) * kHopSeconds).
inline constexpr double kHopSeconds = 0.125;
// Fast time weighting.
inline constexpr double kFastTauSeconds = 0.125;
// Every dB value is clamped here so silence stays finite.
inline constexpr double kDbFloor = -120.0;
inline constexpr std::size_t kBandCount = 27;

// 10 * log10(power), clamped at kDbFloor.
double power_to_db(double power) noexcept;

// Closed-form A-weighting magnitude in dB, 0 dB at 1 kHz. Throws DomainError
// for frequency_hz <= 0.
double a_weighting_gain_db(double frequency_hz);

// y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]
struct FirstOrderSection {
  double b0 = 1.0;
  double b1 = 0.0;
  double a1 = 0.0;
};

// Digital A-weighting filter for one sample rate.
//
// The four low-frequency analog poles (20.6 Hz twice, 107.7 Hz, 737.9 Hz) and
// the four zeros at DC map through the bilinear transform into first-order
// high-pass sections. The 12.2 kHz pole pair sits near or above Nyquist at the
// supported rates, where the bilinear map would force a zero at fs/2, so it is
// realized by two identical first-order sections whose squared magnitude is a
// least-squares fit of the remaining closed-form response up to Nyquist.
class AWeightingFilter {
public:
  explicit AWeightingFilter(int sample_rate_hz);

  double process(double x) noexcept;
  void process(std::span<const double> in, std::span<double> out) noexcept;
  void reset() noexcept;

  // Magnitude of the digital transfer function at `frequency_hz`, in dB.
  double response_db(double frequency_hz) const;
  int sample_rate_hz() const noexcept { return sample_rate_hz_; }
  std::span<const FirstOrderSection> sections() const noexcept { return sections_; }

private:
  int sample_rate_hz_;
  std::vector<FirstOrderSection> sections_;
  std::vector<double> x1_;
  std::vector<double> y1_;
};

enum class FrequencyWeighting { A };
enum class TimeWeighting { Fast };

struct LevelSeries {
  std::vector<double> values_db;
  double hop_s = kHopSeconds;
  FrequencyWeighting weighting = FrequencyWeighting::A;
  TimeWeighting time_weighting = TimeWeighting::Fast;
  double calibration_offset_db = 0.0;

  std::size_t size() const noexcept { return values_db.size(); }
  bool empty() const noexcept { return values_db.empty(); }
};

// Sample indices b_0 = 0 < b_1 < ... < b_n of the frame grid; n = floor(duration / hop).
std::vector<std::size_t> frame_boundaries(std::size_t n_samples, int sample_rate_hz);

// L_AF series: A-weight, square, exponential average (tau = 0.125 s), sample
// the integrator at the end of every frame. Throws DomainError on an empty clip.
LevelSeries level_series(const AudioClip& clip, double calibration_offset_db = 0.0);

// max(values_db) + calibration offset. Throws DomainError on an empty series.
double laf_max(const LevelSeries& series);

// Nominal 1/3-octave centers 1000 * 10^(k/10), k = -17..9 (20 Hz .. 8 kHz).
const std::array<double, kBandCount>& band_centers_hz();

// |H(f)|^2 of band `band`: the band-pass image of a fourth-order Butterworth
// low-pass prototype, -3 dB points at center * 10^(+-1/20).
double band_power_response(std::size_t band, double frequency_hz) noexcept;

struct Spectrogram {
  // Row-major [n_frames x kBandCount], dB.
  std::vector<double> cells_db;
  double hop_s = kHopSeconds;
  std::array<double, kBandCount> band_centers_hz{};

  std::size_t n_frames() const noexcept { return cells_db.size() / kBandCount; }
  double at(std::size_t frame, std::size_t band) const { return cells_db[frame * kBandCount + band]; }
  std::span<const double> frame(std::size_t i) const {
    return std::span<const double>(cells_db).subspan(i * kBandCount, kBandCount);
  }
};

// Band-limited power per 0.125 s frame and band. Filtering happens in the
// frequency domain on the zero-padded whole clip (zero-phase). Throws
// ConfigError when Nyquist lies below the top band center, DomainError on an
// empty input.
Spectrogram third_octave_spectrogram(const AudioClip& clip);
Spectrogram third_octave_spectrogram(std::span<const double> samples, int sample_rate_hz);

// Mean square of the raw samples in each frame (unweighted), linear.
std::vector<double> frame_power(std::span<const double> samples, int sample_rate_hz);

// CSV exports: one row per frame.
std::string format_level_csv(const LevelSeries& series);
std::string format_spectrogram_csv(const Spectrogram& spectrogram);

} // namespace shotlog
