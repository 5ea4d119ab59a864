#include "shotlog/detector.hpp"

#include "shotlog/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace shotlog {

std::string_view to_string(OnsetAnchor anchor) noexcept {
  return anchor == OnsetAnchor::window_start ? "window_start" : "last_frame";
}

OnsetAnchor parse_onset_anchor(std::string_view text) {
  if (text == "window_start") return OnsetAnchor::window_start;
  if (text == "last_frame") return OnsetAnchor::last_frame;
  throw ConfigError(fmt::format("unknown onset anchor '{}' (expected window_start or last_frame)", text));
}

std::vector<DetectionEvent> decode_events(std::span<const double> p, const DecodeOptions& o) {
  if (!(o.threshold > 0.0 && o.threshold < 1.0))
    throw DomainError(fmt::format("threshold must lie in (0, 1), got {}", o.threshold));
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw DomainError(fmt::format("probability {} at window {}", p[i], i));

  const double shift = o.anchor == OnsetAnchor::last_frame ? o.window_s - o.hop_s : 0.0;
  std::vector<DetectionEvent> events;
  std::size_t last_above = 0;
  bool open = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < o.threshold) continue;
    const double gap = open ? static_cast<double>(i - last_above - 1) * o.hop_s : 0.0;
    if (open && gap < o.min_gap_s) {
      auto& e = events.back();
      e.offset_s = static_cast<double>(i) * o.hop_s + o.window_s;
      e.peak_probability = std::max(e.peak_probability, p[i]);
      ++e.n_windows;
    } else {
      const double start = static_cast<double>(i) * o.hop_s;
      events.push_back({start + shift, start + o.window_s, p[i], 1});
      open = true;
    }
    last_above = i;
  }
  return events;
}

std::vector<EventLabel> attribute_classes(std::span<const DetectionEvent> detected,
                                          std::span<const EventAnnotation> reference, double collar_s,
                                          EventLabel fallback) {
  std::vector<EventLabel> labels;
  labels.reserve(detected.size());
  for (const auto& d : detected) {
    EventLabel l = fallback;
    double best = collar_s;
    bool found = false;
    for (const auto& r : reference) {
      const double gap = std::abs(r.onset_s - d.onset_s);
      if (gap <= collar_s && (!found || gap < best)) {
        best = gap;
        l = r.label;
        found = true;
      }
    }
    labels.push_back(l);
  }
  return labels;
}

std::vector<TimedEvent> anchor_events(std::span<const DetectionEvent> detected, std::span<const EventLabel> labels,
                                      UnixSeconds file_start, const std::string& source) {
  if (labels.size() != detected.size()) throw DomainError("one class label per detection is required");
  std::vector<TimedEvent> out;
  out.reserve(detected.size());
  for (std::size_t i = 0; i < detected.size(); ++i)
    out.push_back({file_start + detected[i].onset_s, file_start + detected[i].offset_s, labels[i], source});
  return out;
}

std::vector<ActivitySession> sessions_from_events(std::span<const TimedEvent> events, double session_gap_s,
                                                  const TimeZone& zone) {
  std::vector<ActivitySession> sessions;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (i > 0 && e.onset < events[i - 1].onset) throw DomainError("events must be sorted by onset");
    if (i == 0 || e.onset - events[i - 1].onset > session_gap_s) sessions.push_back({e.onset, e.offset, 0, 0, 0, false, {}});
    auto& s = sessions.back();
    s.end = std::max(s.end, e.offset);
    ++s.event_count;
    ++(e.label == EventLabel::gunshot ? s.gunshot_count : s.explosion_count);
    if (!e.source.empty() && std::find(s.sources.begin(), s.sources.end(), e.source) == s.sources.end())
      s.sources.push_back(e.source);
  }
  for (auto& s : sessions) s.within_permitted_hours = within_permitted_hours(s.start, s.end, zone);
  return sessions;
}

CounterUpdate update_counters(const RegulatoryCounters& counters, std::span<const TimedEvent> events,
                              const TimeZone& zone) {
  CounterUpdate u{counters, {}};
  auto& c = u.counters;
  for (const auto& e : events) {
    const LocalDateTime l = zone.to_local(e.onset);
    if (l.year != c.year)
      throw DomainError(fmt::format("event at {} lies outside counter year {}", format_iso8601(e.onset, zone), c.year));
    const double sod = l.hour * 3600.0 + l.minute * 60.0 + l.second;
    if (!(l.weekday >= 1 && l.weekday <= 5 && sod >= 7 * 3600.0 && sod < 19 * 3600.0)) ++c.out_of_hours_event_count;
    if (e.label == EventLabel::gunshot) {
      if (++c.gunshot_count == RegulatoryCounters::kGunshotLimit + 1)
        u.raised.push_back({EventLabel::gunshot, e.onset, c.gunshot_count});
    } else {
      if (++c.explosion_count == RegulatoryCounters::kExplosionLimit + 1)
        u.raised.push_back({EventLabel::explosion, e.onset, c.explosion_count});
    }
  }
  return u;
}

RegulatoryCounters merge(const RegulatoryCounters& a, const RegulatoryCounters& b) {
  if (a.year != b.year) throw DomainError(fmt::format("cannot merge counters of years {} and {}", a.year, b.year));
  RegulatoryCounters c = a;
  c.gunshot_count += b.gunshot_count;
  c.explosion_count += b.explosion_count;
  c.out_of_hours_event_count += b.out_of_hours_event_count;
  return c;
}

nlohmann::json to_json(const RegulatoryCounters& c) {
  return {{"year", c.year},
          {"gunshot_count", c.gunshot_count},
          {"gunshot_limit", RegulatoryCounters::kGunshotLimit},
          {"gunshot_violation", c.gunshot_violation()},
          {"explosion_count", c.explosion_count},
          {"explosion_limit", RegulatoryCounters::kExplosionLimit},
          {"explosion_violation", c.explosion_violation()},
          {"out_of_hours_event_count", c.out_of_hours_event_count}};
}

RegulatoryCounters counters_from_json(const nlohmann::json& j) {
  try {
    RegulatoryCounters c;
    c.year = j.at("year").get<int>();
    c.gunshot_count = j.at("gunshot_count").get<std::uint64_t>();
    c.explosion_count = j.at("explosion_count").get<std::uint64_t>();
    c.out_of_hours_event_count = j.at("out_of_hours_event_count").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed counters: {}", e.what()));
  }
}

RegulatoryCounters simulate_year(int year, double gunshots_per_hour, double explosions_per_hour, double active_hours,
                                 const TimeZone& zone, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<long> gunshots(gunshots_per_hour), explosions(explosions_per_hour);
  std::uniform_real_distribution<double> within(0.0, 3600.0);
  RegulatoryCounters c;
  c.year = year;
  double hours = 0.0;
  std::vector<TimedEvent> batch;
  const UnixSeconds jan1 = zone.from_local(year, 1, 1, 12, 0, 0.0);
  for (int day = 0; day < 366 && hours < active_hours; ++day) {
    const LocalDateTime noon = zone.to_local(jan1 + day * 86400.0);
    if (noon.year != year) break;
    if (noon.weekday < 1 || noon.weekday > 5) continue;
    for (int hour = 7; hour < 19 && hours < active_hours; ++hour, hours += 1.0) {
      const UnixSeconds h0 = zone.from_local(noon.year, noon.month, noon.day, hour, 0, 0.0);
      const double span = std::min(1.0, active_hours - hours) * 3600.0;
      batch.clear();
      const long ng = gunshots_per_hour > 0 ? gunshots(rng) : 0;
      const long ne = explosions_per_hour > 0 ? explosions(rng) : 0;
      for (long k = 0; k < ng + ne; ++k) {
        const double t = within(rng) * span / 3600.0;
        batch.push_back({h0 + t, h0 + t + 1.0, k < ng ? EventLabel::gunshot : EventLabel::explosion, {}});
      }
      std::sort(batch.begin(), batch.end(), [](const auto& a, const auto& b) { return a.onset < b.onset; });
      c = update_counters(c, batch, zone).counters;
    }
  }
  return c;
}

AnnualEstimate estimate_annual_counts(std::uint64_t detected_count, double deletion_rate, double insertion_rate,
                                      std::size_t n_reference, std::size_t n_detected) {
  if (!(deletion_rate >= 0.0 && deletion_rate <= 1.0) || !(insertion_rate >= 0.0 && insertion_rate <= 1.0))
    throw DomainError(fmt::format("error rates must lie in [0, 1], got deletion {} insertion {}", deletion_rate,
                                  insertion_rate));
  AnnualEstimate e;
  if (deletion_rate == 1.0) return e;
  const double d = static_cast<double>(detected_count);
  const double kept = 1.0 - deletion_rate;
  const double corrected = d * (1.0 - insertion_rate) / kept;
  const double var_ins = n_detected ? insertion_rate * (1.0 - insertion_rate) / static_cast<double>(n_detected) : 0.0;
  const double var_del = n_reference ? deletion_rate * kept / static_cast<double>(n_reference) : 0.0;
  const double d_ins = -d / kept;
  const double d_del = corrected / kept;
  const double se = std::sqrt(d_ins * d_ins * var_ins + d_del * d_del * var_del);
  e.corrected = corrected;
  e.standard_error = se;
  e.lower = std::max(0.0, corrected - 1.96 * se);
  e.upper = corrected + 1.96 * se;
  return e;
}

nlohmann::json to_json(const ActivitySession& s, const TimeZone& zone) {
  return {{"start", format_iso8601(s.start, zone)},
          {"end", format_iso8601(s.end, zone)},
          {"event_count", s.event_count},
          {"gunshot_count", s.gunshot_count},
          {"explosion_count", s.explosion_count},
          {"within_permitted_hours", s.within_permitted_hours},
          {"sources", s.sources}};
}

std::string format_logbook_jsonl(std::span<const ActivitySession> sessions, const TimeZone& zone) {
  std::string out;
  for (const auto& s : sessions) out += to_json(s, zone).dump() + "\n";
  return out;
}

std::string format_detections_jsonl(std::span<const TimedEvent> events, std::span<const DetectionEvent> detail,
                                    const TimeZone& zone) {
  if (events.size() != detail.size()) throw DomainError("one detection record per timed event is required");
  std::string out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const nlohmann::json j{{"source", events[i].source},
                           {"onset_s", detail[i].onset_s},
                           {"offset_s", detail[i].offset_s},
                           {"onset", format_iso8601(events[i].onset, zone)},
                           {"label", std::string(to_string(events[i].label))},
                           {"peak_probability", detail[i].peak_probability},
                           {"n_windows", detail[i].n_windows}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<TimedEvent> parse_detections_jsonl(std::string_view jsonl, const TimeZone& zone) {
  std::vector<TimedEvent> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const UnixSeconds onset = parse_iso8601(j.at("onset").get<std::string>(), zone);
      const double duration = j.at("offset_s").get<double>() - j.at("onset_s").get<double>();
      out.push_back({onset, onset + duration, parse_event_label(j.at("label").get<std::string>()),
                     j.value("source", std::string())});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("malformed detection record: {}", e.what()), line_no);
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), line_no);
    }
  }
  return out;
}

} // namespace shotlog
