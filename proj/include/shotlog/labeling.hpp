#pragma once

#include "shotlog/clip_io.hpp"
#include "shotlog/indicators.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace shotlog {

enum class HmmState : std::uint8_t { background = 0, event = 1 };

struct GaussianEmission {
  double mean_db = 0.0;
  double std_db = 1.0;
};

// Two-state HMM over dB levels. State 1 (event) always has the higher mean.
struct HmmModel {
  std::array<GaussianEmission, 2> emission{};
  std::array<std::array<double, 2>, 2> transition{{{0.5, 0.5}, {0.5, 0.5}}};
  std::array<double, 2> initial{0.5, 0.5};
  // Log-likelihood of the data under the parameters entering each EM iteration.
  std::vector<double> log_likelihood_history;
};

struct HmmFitOptions {
  std::size_t max_iterations = 200;
  // Stop once an iteration improves the log-likelihood by less than this.
  double tolerance = 1e-8;
  double min_std_db = 0.05;
};

// Baum-Welch from a 2-means start. Throws FitError on fewer than 10 values or
// a constant series (label those by hand).
HmmModel fit_hmm(std::span<const double> values_db, const HmmFitOptions& options = {});
HmmModel fit_hmm(const LevelSeries& series, const HmmFitOptions& options = {});

// log p(values | model) by the scaled forward recursion.
double log_likelihood(const HmmModel& model, std::span<const double> values_db);

// Most probable state path. Ties go to the background state.
std::vector<HmmState> viterbi_decode(const HmmModel& model, std::span<const double> values_db);
std::vector<HmmState> viterbi_decode(const HmmModel& model, const LevelSeries& series);

// Runs of event states become [run_start, run_end) proposals; runs shorter than
// min_duration_s are dropped.
std::vector<EventAnnotation> states_to_annotations(std::span<const HmmState> states, double hop_s = kHopSeconds,
                                                   double min_duration_s = kHopSeconds,
                                                   EventLabel label = EventLabel::gunshot);

inline constexpr double kWindowSeconds = 1.0;
// Level samples per analysis window.
inline constexpr std::size_t kWindowFrames = 8;

enum class LabelMode { overlap, onset_only };

// Window i covers [i * hop_s, i * hop_s + window_length_s).
struct WindowLabeling {
  double window_length_s = kWindowSeconds;
  double hop_s = kHopSeconds;
  LabelMode mode = LabelMode::overlap;
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t positives() const noexcept;
  double window_start_s(std::size_t i) const noexcept { return static_cast<double>(i) * hop_s; }
};

// max(0, floor((duration - window) / hop) + 1), robust to rounding in duration.
std::size_t window_count(double duration_s, double window_s = kWindowSeconds, double hop_s = kHopSeconds);

// overlap: positive iff the window intersects some [onset, offset).
// onset_only: positive iff the window contains some onset instant.
WindowLabeling annotations_to_window_labels(std::span<const EventAnnotation> annotations, double duration_s,
                                            LabelMode mode = LabelMode::overlap);

} // namespace shotlog
