#include "shotlog/indicators.hpp"

#include "fft.hpp"
#include "shotlog/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <fmt/format.h>

namespace shotlog {

namespace {

// Analog pole frequencies of the A-weighting curve.
constexpr double kPole1 = 20.598997;
constexpr double kPole2 = 107.65265;
constexpr double kPole3 = 737.86223;
constexpr double kPole4 = 12194.217;

constexpr int kPrototypeOrder = 4;

// f2/fc - fc/f2 at the upper band edge (equal in magnitude at the lower edge).
double half_width_ratio() {
  static const double r = std::pow(10.0, 0.05) - std::pow(10.0, -0.05);
  return r;
}

constexpr double kPaddingSeconds = 3.0;

double ra_unnormalized(double f) {
  const double f2 = f * f;
  return (kPole4 * kPole4 * f2 * f2) /
         ((f2 + kPole1 * kPole1) * std::sqrt((f2 + kPole2 * kPole2) * (f2 + kPole3 * kPole3)) *
          (f2 + kPole4 * kPole4));
}

// Analog magnitude of the low part s^4 / ((s+w1)^2 (s+w2)(s+w3)).
double low_part_magnitude(double f) {
  const double f2 = f * f;
  return f2 * f2 /
         ((f2 + kPole1 * kPole1) * std::sqrt((f2 + kPole2 * kPole2) * (f2 + kPole3 * kPole3)));
}

std::complex<double> section_response(const FirstOrderSection& s, double omega) {
  const std::complex<double> zinv = std::polar(1.0, -omega);
  return (s.b0 + s.b1 * zinv) / (1.0 + s.a1 * zinv);
}

std::complex<double> cascade_response(std::span<const FirstOrderSection> sections, double omega) {
  std::complex<double> h = 1.0;
  for (const auto& s : sections) h *= section_response(s, omega);
  return h;
}

// Bilinear image of s / (s + w).
FirstOrderSection bilinear_highpass(double pole_hz, double sample_rate) {
  const double k = 2.0 * sample_rate;
  const double w = 2.0 * std::numbers::pi * pole_hz;
  return {k / (k + w), -k / (k + w), -(k - w) / (k + w)};
}

// Solves the 3x3 system m * x = rhs by Gaussian elimination with partial pivoting.
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> rhs) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    std::swap(m[col], m[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double factor = m[r][col] / m[col][col];
      for (int c = col; c < 3; ++c) m[r][c] -= factor * m[col][c];
      rhs[r] -= factor * rhs[col];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < 3; ++c) acc -= m[r][c] * x[c];
    x[r] = acc / m[r][r];
  }
  return x;
}

// Root in (-1, 1) of r / (1 + r^2) = ratio / 2.
double minimum_phase_root(double ratio) {
  if (std::abs(ratio) < 1e-12) return 0.0;
  return (1.0 - std::sqrt(std::max(0.0, 1.0 - ratio * ratio))) / ratio;
}

// First-order section g (1 + b z^-1) / (1 + a z^-1) whose squared magnitude
// (B0 + B1 cos w) / (1 + A1 cos w) best matches `target` in the
// equation-error least-squares sense over a log-spaced grid.
FirstOrderSection fit_high_section(std::span<const FirstOrderSection> low, double sample_rate) {
  constexpr int kPoints = 64;
  const double f_lo = 20.0;
  const double f_hi = 0.999 * sample_rate / 2.0;
  std::array<std::array<double, 3>, 3> ata{};
  std::array<double, 3> atb{};
  for (int i = 0; i < kPoints; ++i) {
    const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(i) / (kPoints - 1));
    const double omega = 2.0 * std::numbers::pi * f / sample_rate;
    const double digital_low = std::abs(cascade_response(low, omega));
    const double high_an = kPole4 * kPole4 / (f * f + kPole4 * kPole4);
    const double target = low_part_magnitude(f) * high_an / digital_low;
    const double c = std::cos(omega);
    const std::array<double, 3> row{1.0, c, -target * c};
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) ata[r][k] += row[r] * row[k];
      atb[r] += row[r] * target;
    }
  }
  const auto [b0, b1, a1] = solve3(ata, atb);
  const double a = minimum_phase_root(a1);
  const double b = minimum_phase_root(b1 / b0);
  const double g = std::sqrt(b0 * (1.0 + a * a) / (1.0 + b * b));
  return {g, g * b, a};
}

} // namespace

double power_to_db(double power) noexcept {
  if (!(power > 0.0)) return kDbFloor;
  return std::max(kDbFloor, 10.0 * std::log10(power));
}

double a_weighting_gain_db(double frequency_hz) {
  if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz))
    throw DomainError(fmt::format("frequency must be positive, got {}", frequency_hz));
  return 20.0 * std::log10(ra_unnormalized(frequency_hz) / ra_unnormalized(1000.0));
}

AWeightingFilter::AWeightingFilter(int sample_rate_hz) : sample_rate_hz_(sample_rate_hz) {
  if (sample_rate_hz <= 0) throw DomainError("sample rate must be positive");
  const double fs = sample_rate_hz;
  sections_ = {bilinear_highpass(kPole1, fs), bilinear_highpass(kPole1, fs),
               bilinear_highpass(kPole2, fs), bilinear_highpass(kPole3, fs)};
  const auto high = fit_high_section(sections_, fs);
  sections_.push_back(high);
  sections_.push_back(high);

  const double gain_1k = std::abs(cascade_response(sections_, 2.0 * std::numbers::pi * 1000.0 / fs));
  sections_.front().b0 /= gain_1k;
  sections_.front().b1 /= gain_1k;
  reset();
}

void AWeightingFilter::reset() noexcept {
  x1_.assign(sections_.size(), 0.0);
  y1_.assign(sections_.size(), 0.0);
}

double AWeightingFilter::process(double x) noexcept {
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const auto& s = sections_[i];
    const double y = s.b0 * x + s.b1 * x1_[i] - s.a1 * y1_[i];
    x1_[i] = x;
    y1_[i] = y;
    x = y;
  }
  return x;
}

void AWeightingFilter::process(std::span<const double> in, std::span<double> out) noexcept {
  for (std::size_t n = 0; n < in.size(); ++n) out[n] = process(in[n]);
}

double AWeightingFilter::response_db(double frequency_hz) const {
  const double omega = 2.0 * std::numbers::pi * frequency_hz / sample_rate_hz_;
  return 20.0 * std::log10(std::abs(cascade_response(sections_, omega)));
}

std::vector<std::size_t> frame_boundaries(std::size_t n_samples, int sample_rate_hz) {
  // hop = fs / 8 samples; integer arithmetic keeps 44.1 kHz framing exact.
  const std::size_t rate = static_cast<std::size_t>(sample_rate_hz);
  const std::size_t n_frames = n_samples * 8 / rate;
  std::vector<std::size_t> bounds(n_frames + 1);
  for (std::size_t i = 0; i <= n_frames; ++i) bounds[i] = i * rate / 8;
  return bounds;
}

LevelSeries level_series(const AudioClip& clip, double calibration_offset_db) {
  if (clip.empty()) throw DomainError("level_series: empty clip");
  const int fs = clip.sample_rate_hz();
  AWeightingFilter weighting(fs);
  const double alpha = 1.0 - std::exp(-1.0 / (fs * kFastTauSeconds));
  const auto bounds = frame_boundaries(clip.size(), fs);

  LevelSeries series;
  series.calibration_offset_db = calibration_offset_db;
  series.values_db.reserve(bounds.size() - 1);
  const auto& x = clip.samples();
  double state = 0.0;
  for (std::size_t frame = 0; frame + 1 < bounds.size(); ++frame) {
    for (std::size_t n = bounds[frame]; n < bounds[frame + 1]; ++n) {
      const double w = weighting.process(x[n]);
      state += alpha * (w * w - state);
    }
    series.values_db.push_back(power_to_db(state));
  }
  return series;
}

double laf_max(const LevelSeries& series) {
  if (series.empty()) throw DomainError("laf_max: empty series");
  return *std::ranges::max_element(series.values_db) + series.calibration_offset_db;
}

const std::array<double, kBandCount>& band_centers_hz() {
  static const auto centers = [] {
    std::array<double, kBandCount> c{};
    for (std::size_t i = 0; i < kBandCount; ++i)
      c[i] = 1000.0 * std::pow(10.0, (static_cast<double>(i) - 17.0) / 10.0);
    return c;
  }();
  return centers;
}

double band_power_response(std::size_t band, double frequency_hz) noexcept {
  if (!(frequency_hz > 0.0)) return 0.0;
  const double fc = band_centers_hz()[band];
  const double x = (frequency_hz / fc - fc / frequency_hz) / half_width_ratio();
  const double x2 = x * x;
  double x2n = 1.0;
  for (int i = 0; i < kPrototypeOrder; ++i) x2n *= x2;
  return 1.0 / (1.0 + x2n);
}

std::vector<double> frame_power(std::span<const double> samples, int sample_rate_hz) {
  const auto bounds = frame_boundaries(samples.size(), sample_rate_hz);
  std::vector<double> power(bounds.size() - 1);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    double acc = 0.0;
    for (std::size_t n = bounds[i]; n < bounds[i + 1]; ++n) acc += samples[n] * samples[n];
    power[i] = acc / static_cast<double>(bounds[i + 1] - bounds[i]);
  }
  return power;
}

Spectrogram third_octave_spectrogram(const AudioClip& clip) {
  return third_octave_spectrogram(clip.samples(), clip.sample_rate_hz());
}

Spectrogram third_octave_spectrogram(std::span<const double> samples, int sample_rate_hz) {
  if (sample_rate_hz <= 0) throw DomainError("sample rate must be positive");
  const auto& centers = band_centers_hz();
  if (sample_rate_hz / 2.0 < centers.back())
    throw ConfigError(fmt::format("sample rate {} Hz is too low for the {:.0f} Hz band",
                                  sample_rate_hz, centers.back()));
  if (samples.empty()) throw DomainError("third_octave_spectrogram: empty input");

  const auto bounds = frame_boundaries(samples.size(), sample_rate_hz);
  const std::size_t n_frames = bounds.size() - 1;

  Spectrogram out;
  out.band_centers_hz = centers;
  out.cells_db.assign(n_frames * kBandCount, kDbFloor);
  if (n_frames == 0) return out;

  const auto pad = static_cast<std::size_t>(std::ceil(kPaddingSeconds * sample_rate_hz));
  const std::size_t n_fft = detail::next_fast_size(samples.size() + pad);
  detail::RealFft fft(n_fft);

  std::vector<double> padded(n_fft, 0.0);
  std::copy(samples.begin(), samples.end(), padded.begin());
  std::vector<std::complex<double>> spectrum;
  fft.forward(padded, spectrum);

  const double bin_hz = static_cast<double>(sample_rate_hz) / n_fft;
  std::vector<std::complex<double>> band_spectrum(spectrum.size());
  std::vector<double> band_signal;
  // 1/n_fft undoes the unnormalized inverse transform.
  const double scale = 1.0 / static_cast<double>(n_fft);

  for (std::size_t band = 0; band < kBandCount; ++band) {
    std::fill(band_spectrum.begin(), band_spectrum.end(), std::complex<double>{});
    // Outside u - 1/u = +-100 * half_width (u = f / fc) the response is below 1e-16.
    const double c = 100.0 * half_width_ratio();
    const double u_hi = (c + std::sqrt(c * c + 4.0)) / 2.0;
    const double fc = centers[band];
    const auto j0 = static_cast<std::size_t>(std::max(1.0, std::floor(fc / u_hi / bin_hz)));
    const auto j1 = std::min(spectrum.size() - 1, static_cast<std::size_t>(std::ceil(fc * u_hi / bin_hz)));
    for (std::size_t j = j0; j <= j1; ++j)
      band_spectrum[j] = spectrum[j] * (std::sqrt(band_power_response(band, j * bin_hz)) * scale);
    fft.inverse(band_spectrum, band_signal);

    for (std::size_t i = 0; i < n_frames; ++i) {
      double acc = 0.0;
      for (std::size_t n = bounds[i]; n < bounds[i + 1]; ++n) acc += band_signal[n] * band_signal[n];
      out.cells_db[i * kBandCount + band] =
          power_to_db(acc / static_cast<double>(bounds[i + 1] - bounds[i]));
    }
  }
  return out;
}

std::string format_level_csv(const LevelSeries& series) {
  std::string out = "time_s,laf_db\n";
  for (std::size_t i = 0; i < series.size(); ++i)
    out += fmt::format("{:.3f},{:.6f}\n", (i + 1) * series.hop_s,
                       series.values_db[i] + series.calibration_offset_db);
  return out;
}

std::string format_spectrogram_csv(const Spectrogram& spectrogram) {
  std::string out = "time_s";
  for (double fc : spectrogram.band_centers_hz) out += fmt::format(",{:.1f}", fc);
  out += '\n';
  for (std::size_t i = 0; i < spectrogram.n_frames(); ++i) {
    out += fmt::format("{:.3f}", i * spectrogram.hop_s);
    for (double v : spectrogram.frame(i)) out += fmt::format(",{:.6f}", v);
    out += '\n';
  }
  return out;
}

} // namespace shotlog
