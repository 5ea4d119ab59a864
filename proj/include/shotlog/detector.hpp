#pragma once

#include "shotlog/civil_time.hpp"
#include "shotlog/clip_io.hpp"
#include "shotlog/eval_metrics.hpp"
#include "shotlog/indicators.hpp"
#include "shotlog/labeling.hpp"

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shotlog {

// Where a detected onset is placed relative to its first window. A window
// first becomes positive when an impulse enters its last frame, so
// `last_frame` (window start + window - hop) tracks the true onset;
// `window_start` reports the window start itself.
enum class OnsetAnchor { window_start, last_frame };

std::string_view to_string(OnsetAnchor anchor) noexcept;
// Throws ConfigError.
OnsetAnchor parse_onset_anchor(std::string_view text);

inline constexpr double kDefaultMinGapSeconds = 0.25;
inline constexpr double kDefaultSessionGapSeconds = 600.0;

struct DecodeOptions {
  double threshold = 0.5;
  double min_gap_s = kDefaultMinGapSeconds;
  OnsetAnchor anchor = OnsetAnchor::last_frame;
  double window_s = kWindowSeconds;
  double hop_s = kHopSeconds;
};

// Maximal runs of windows with probability >= threshold. Two runs merge when
// (sub-threshold windows between them) * hop < min_gap_s. Offset is the end of
// the run's last window. Throws DomainError on a probability outside [0, 1]
// or a threshold outside (0, 1).
std::vector<DetectionEvent> decode_events(std::span<const double> probabilities, const DecodeOptions& options);

// A detection (or annotation) placed on the wall clock.
struct TimedEvent {
  UnixSeconds onset = 0.0;
  UnixSeconds offset = 0.0;
  EventLabel label = EventLabel::gunshot;
  std::string source;
};

// Detected onsets carry the class of the nearest reference onset within
// `collar_s`; unmatched detections get `fallback`.
std::vector<EventLabel> attribute_classes(std::span<const DetectionEvent> detected,
                                          std::span<const EventAnnotation> reference, double collar_s,
                                          EventLabel fallback = EventLabel::gunshot);

std::vector<TimedEvent> anchor_events(std::span<const DetectionEvent> detected, std::span<const EventLabel> labels,
                                      UnixSeconds file_start, const std::string& source);

struct ActivitySession {
  UnixSeconds start = 0.0;
  UnixSeconds end = 0.0;
  std::size_t event_count = 0;
  std::size_t gunshot_count = 0;
  std::size_t explosion_count = 0;
  bool within_permitted_hours = false;
  std::vector<std::string> sources;
};

// Consecutive events whose onsets lie at most session_gap_s apart share a
// session. Start is the first onset, end the latest offset. Events must be
// sorted by onset (DomainError otherwise).
std::vector<ActivitySession> sessions_from_events(std::span<const TimedEvent> events, double session_gap_s,
                                                  const TimeZone& zone);

struct RegulatoryCounters {
  static constexpr std::uint64_t kGunshotLimit = 2'000'000;
  static constexpr std::uint64_t kExplosionLimit = 1250;

  int year = 1970;
  std::uint64_t gunshot_count = 0;
  std::uint64_t explosion_count = 0;
  std::uint64_t out_of_hours_event_count = 0;

  bool gunshot_violation() const noexcept { return gunshot_count > kGunshotLimit; }
  bool explosion_violation() const noexcept { return explosion_count > kExplosionLimit; }
  friend bool operator==(const RegulatoryCounters&, const RegulatoryCounters&) = default;
};

// A limit crossed during one update, at the event that crossed it.
struct Violation {
  EventLabel label = EventLabel::gunshot;
  UnixSeconds at = 0.0;
  std::uint64_t count = 0;
};

struct CounterUpdate {
  RegulatoryCounters counters;
  std::vector<Violation> raised;
};

// Throws DomainError for an event outside the counters' local year.
CounterUpdate update_counters(const RegulatoryCounters& counters, std::span<const TimedEvent> events,
                              const TimeZone& zone);
// Counts of independently processed chunks of the same year.
RegulatoryCounters merge(const RegulatoryCounters& a, const RegulatoryCounters& b);

nlohmann::json to_json(const RegulatoryCounters& c);
// Throws FormatError.
RegulatoryCounters counters_from_json(const nlohmann::json& j);

// Poisson events during the first `active_hours` permitted hours of `year`
// (Mon-Fri 07:00-19:00 local), fed to the counters hour by hour.
RegulatoryCounters simulate_year(int year, double gunshots_per_hour, double explosions_per_hour, double active_hours,
                                 const TimeZone& zone, std::uint64_t seed);

struct AnnualEstimate {
  Metric corrected;
  // Normal-approximation 95% interval from binomial standard errors of the
  // two rates.
  Metric lower, upper;
  Metric standard_error;
};

// corrected = detected * (1 - insertion_rate) / (1 - deletion_rate). The rate
// sample sizes (detections for insertion, references for deletion) set the
// interval width; zero sizes give a zero-width interval. Throws DomainError
// for rates outside [0, 1]; a deletion rate of 1 leaves every field undefined.
AnnualEstimate estimate_annual_counts(std::uint64_t detected_count, double deletion_rate, double insertion_rate,
                                      std::size_t n_reference = 0, std::size_t n_detected = 0);

nlohmann::json to_json(const ActivitySession& s, const TimeZone& zone);
std::string format_logbook_jsonl(std::span<const ActivitySession> sessions, const TimeZone& zone);
std::string format_detections_jsonl(std::span<const TimedEvent> events, std::span<const DetectionEvent> detail,
                                    const TimeZone& zone);
// Reads the wall-clock events back from detection JSONL. Throws ValidationError.
std::vector<TimedEvent> parse_detections_jsonl(std::string_view jsonl, const TimeZone& zone);

} // namespace shotlog
