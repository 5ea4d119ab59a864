#pragma once

#include "shotlog/clip_io.hpp"

#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace shotlog {

// Undefined ratios (zero denominators) are std::nullopt and serialize as null.
using Metric = std::optional<double>;

// A detected event on the clip's own time axis.
struct DetectionEvent {
  double onset_s = 0.0;
  double offset_s = 0.0;
  double peak_probability = 0.0;
  std::size_t n_windows = 0;
  friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

// Per-window probabilities with aligned 0/1 labels.
struct WindowScores {
  std::vector<double> probability;
  std::vector<std::uint8_t> label;

  std::size_t size() const noexcept { return label.size(); }
  std::size_t positives() const noexcept;
  // Throws DomainError on unequal lengths or a probability outside [0, 1].
  void validate() const;
  void append(const WindowScores& other);
};

struct BinaryMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  Metric precision, recall, f1;
};

// Windows with probability >= threshold are predicted positive.
// F1 = 2TP / (2TP + FP + FN), which equals 2PR / (P + R) whenever both exist.
BinaryMetrics window_f1(const WindowScores& scores, double threshold);

// Step-wise AP: mean over positives of the precision at their rank in a
// stable descending sort (equal scores keep input order). Undefined without
// positives.
Metric average_precision(const WindowScores& scores);

struct DetPoint {
  double threshold = 0.0;
  double false_positive_rate = 0.0;
  double false_negative_rate = 0.0;
};

// Points ordered by decreasing threshold: +inf sentinel (FPR 0, FNR 1), one
// point per distinct score, then the -inf sentinel (FPR 1, FNR 0).
struct DetCurve {
  std::vector<DetPoint> points;
};

// Throws DomainError unless both classes are present.
DetCurve det_curve(const WindowScores& scores);

std::string format_det_csv(const DetCurve& curve);
// Inverse of format_det_csv. Throws ValidationError.
DetCurve parse_det_csv(std::string_view csv);
// Linear-axis polyline plot of one curve per named model.
std::string format_det_svg(std::span<const std::pair<std::string, DetCurve>> curves);

struct EventScore {
  std::size_t n_reference = 0, n_detected = 0, n_matched = 0;
  Metric precision, recall, f1;
  Metric insertion_rate, deletion_rate;
  double collar_s = 0.5;
};

inline constexpr double kDefaultCollarSeconds = 0.5;

// Greedy onset matching. Detections are visited in onset order; each takes the
// unmatched reference with the nearest onset inside the collar (earlier one on
// a tie). Offsets are ignored. Throws DomainError on a negative collar.
EventScore event_metrics(std::span<const EventAnnotation> reference, std::span<const DetectionEvent> detected,
                         double collar_s = kDefaultCollarSeconds);

// Sums the counts of per-file scores and recomputes the ratios.
EventScore combine(std::span<const EventScore> parts);

struct ThresholdChoice {
  double threshold = 0.5;
  BinaryMetrics metrics;
};

// Cut maximizing window F1 (the highest such cut on a tie). The returned
// threshold is the midpoint between that score and the next lower distinct
// score, so it lies strictly inside (0, 1) for scores there. Throws DomainError
// without positives.
ThresholdChoice select_threshold(const WindowScores& scores);

nlohmann::json to_json(const BinaryMetrics& m);
nlohmann::json to_json(const EventScore& s);

struct MetricsRow {
  std::string model;
  BinaryMetrics window;
  Metric average_precision;
  std::optional<EventScore> events;
};

// Aligned columns: model, P, R, F1, AP and, when present, event P/R/F1/ins/del.
std::string format_metrics_table(std::span<const MetricsRow> rows);

} // namespace shotlog
