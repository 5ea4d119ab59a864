#include "shotlog/eval_metrics.hpp"

#include "shotlog/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace shotlog {

namespace {

Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

// Indices sorted by descending probability, stable for equal scores.
std::vector<std::size_t> ranking(const WindowScores& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.probability[a] > s.probability[b]; });
  return order;
}

// Cumulative counts after admitting every window scoring >= each distinct cut.
struct Cut {
  double score;
  std::size_t tp, fp;
};

std::vector<Cut> sweep(const WindowScores& s) {
  const auto order = ranking(s);
  std::vector<Cut> cuts;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    (s.label[i] ? tp : fp) += 1;
    if (k + 1 == order.size() || s.probability[order[k + 1]] != s.probability[i])
      cuts.push_back({s.probability[i], tp, fp});
  }
  return cuts;
}

BinaryMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  BinaryMetrics m{tp, fp, fn, tn, ratio(tp, tp + fp), ratio(tp, tp + fn), ratio(2 * tp, 2 * tp + fp + fn)};
  return m;
}

nlohmann::json metric_json(const Metric& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

std::string metric_text(const Metric& m) { return m ? fmt::format("{:.4f}", *m) : std::string("n/a"); }

} // namespace

std::size_t WindowScores::positives() const noexcept {
  return static_cast<std::size_t>(std::count(label.begin(), label.end(), std::uint8_t{1}));
}

void WindowScores::validate() const {
  if (probability.size() != label.size())
    throw DomainError(fmt::format("{} probabilities for {} labels", probability.size(), label.size()));
  for (std::size_t i = 0; i < probability.size(); ++i)
    if (!(probability[i] >= 0.0 && probability[i] <= 1.0))
      throw DomainError(fmt::format("probability {} at window {} outside [0, 1]", probability[i], i));
}

void WindowScores::append(const WindowScores& other) {
  probability.insert(probability.end(), other.probability.begin(), other.probability.end());
  label.insert(label.end(), other.label.begin(), other.label.end());
}

BinaryMetrics window_f1(const WindowScores& scores, double threshold) {
  scores.validate();
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores.probability[i] >= threshold;
    if (scores.label[i])
      (predicted ? tp : fn) += 1;
    else
      (predicted ? fp : tn) += 1;
  }
  return from_counts(tp, fp, fn, tn);
}

Metric average_precision(const WindowScores& scores) {
  scores.validate();
  const std::size_t positives = scores.positives();
  if (positives == 0) return std::nullopt;
  const auto order = ranking(scores);
  double sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k)
    if (scores.label[order[k]]) {
      ++tp;
      sum += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  return sum / static_cast<double>(positives);
}

DetCurve det_curve(const WindowScores& scores) {
  scores.validate();
  const std::size_t pos = scores.positives(), neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw DomainError("DET curve needs both classes");
  const double inf = std::numeric_limits<double>::infinity();
  DetCurve c;
  c.points.push_back({inf, 0.0, 1.0});
  for (const auto& cut : sweep(scores))
    c.points.push_back({cut.score, static_cast<double>(cut.fp) / static_cast<double>(neg),
                        static_cast<double>(pos - cut.tp) / static_cast<double>(pos)});
  c.points.push_back({-inf, 1.0, 0.0});
  return c;
}

std::string format_det_csv(const DetCurve& curve) {
  std::string out = "threshold,false_positive_rate,false_negative_rate\n";
  for (const auto& p : curve.points) {
    const std::string thr = std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf") : fmt::format("{}", p.threshold);
    out += fmt::format("{},{},{}\n", thr, p.false_positive_rate, p.false_negative_rate);
  }
  return out;
}

DetCurve parse_det_csv(std::string_view csv) {
  DetCurve c;
  std::size_t pos = 0, line_no = 0;
  auto number = [&](const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(fmt::format("'{}' is not a number", s), line_no);
  };
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    std::string line(csv.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "threshold,false_positive_rate,false_negative_rate")
        throw ValidationError(fmt::format("unexpected DET header '{}'", line), line_no);
      continue;
    }
    const auto a = line.find(','), b = line.find(',', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) throw ValidationError("DET row needs 3 fields", line_no);
    c.points.push_back({number(line.substr(0, a)), number(line.substr(a + 1, b - a - 1)), number(line.substr(b + 1))});
  }
  if (c.points.empty()) throw ValidationError("DET curve has no points", line_no);
  return c;
}

std::string format_det_svg(std::span<const std::pair<std::string, DetCurve>> curves) {
  constexpr double size = 400.0, left = 60.0, top = 20.0;
  constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  auto px = [&](double fpr) { return left + fpr * size; };
  auto py = [&](double fnr) { return top + (1.0 - fnr) * size; };
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      left + size + 20.0, top + size + 50.0, left, top, size, size);
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#ddd\"/>\n", px(v), top, top + size);
    out += fmt::format("<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#ddd\"/>\n", py(v), left, left + size);
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.1f}</text>\n", px(v), top + size + 16.0, v);
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.1f}</text>\n", left - 6.0, py(v) + 4.0, v);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">False positive rate</text>\n", left + size / 2,
                     top + size + 40.0);
  out += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">False "
                     "negative rate</text>\n",
                     top + size / 2);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = colors[i % std::size(colors)];
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"", color);
    for (const auto& p : curves[i].second.points)
      out += fmt::format("{:.2f},{:.2f} ", px(p.false_positive_rate), py(p.false_negative_rate));
    out += "\"/>\n";
    const double ly = top + 20.0 + 16.0 * static_cast<double>(i);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       left + size - 150.0, ly, left + size - 130.0, ly, color);
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + size - 125.0, ly + 4.0, curves[i].first);
  }
  out += "</svg>\n";
  return out;
}

EventScore event_metrics(std::span<const EventAnnotation> reference, std::span<const DetectionEvent> detected,
                         double collar_s) {
  if (!(collar_s >= 0.0)) throw DomainError(fmt::format("collar must be non-negative, got {}", collar_s));
  std::vector<bool> used(reference.size(), false);
  std::size_t matched = 0;
  for (const auto& d : detected) {
    std::size_t best = reference.size();
    double best_gap = 0.0;
    for (std::size_t r = 0; r < reference.size(); ++r) {
      if (used[r]) continue;
      const double gap = std::abs(d.onset_s - reference[r].onset_s);
      if (gap <= collar_s && (best == reference.size() || gap < best_gap)) {
        best = r;
        best_gap = gap;
      }
    }
    if (best != reference.size()) {
      used[best] = true;
      ++matched;
    }
  }
  EventScore s;
  s.n_reference = reference.size();
  s.n_detected = detected.size();
  s.n_matched = matched;
  s.collar_s = collar_s;
  std::vector<EventScore> one{s};
  return combine(one);
}

EventScore combine(std::span<const EventScore> parts) {
  EventScore s;
  if (!parts.empty()) s.collar_s = parts.front().collar_s;
  for (const auto& p : parts) {
    s.n_reference += p.n_reference;
    s.n_detected += p.n_detected;
    s.n_matched += p.n_matched;
  }
  s.precision = ratio(s.n_matched, s.n_detected);
  s.recall = ratio(s.n_matched, s.n_reference);
  s.f1 = ratio(2 * s.n_matched, s.n_detected + s.n_reference);
  s.insertion_rate = ratio(s.n_detected - s.n_matched, s.n_detected);
  s.deletion_rate = ratio(s.n_reference - s.n_matched, s.n_reference);
  return s;
}

ThresholdChoice select_threshold(const WindowScores& scores) {
  scores.validate();
  const std::size_t pos = scores.positives();
  if (pos == 0) throw DomainError("threshold selection needs at least one positive window");
  const auto cuts = sweep(scores);
  std::size_t best = 0;
  double best_f1 = -1.0;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const double f1 = 2.0 * static_cast<double>(cuts[k].tp) / static_cast<double>(cuts[k].tp + cuts[k].fp + pos);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = k;
    }
  }
  const double lower = best + 1 < cuts.size() ? cuts[best + 1].score : 0.0;
  ThresholdChoice c;
  c.threshold = 0.5 * (cuts[best].score + lower);
  c.metrics = window_f1(scores, c.threshold);
  return c;
}

nlohmann::json to_json(const BinaryMetrics& m) {
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"fn", m.fn},
          {"tn", m.tn},
          {"precision", metric_json(m.precision)},
          {"recall", metric_json(m.recall)},
          {"f1", metric_json(m.f1)}};
}

nlohmann::json to_json(const EventScore& s) {
  return {{"collar_s", s.collar_s},
          {"n_reference", s.n_reference},
          {"n_detected", s.n_detected},
          {"n_matched", s.n_matched},
          {"precision", metric_json(s.precision)},
          {"recall", metric_json(s.recall)},
          {"f1", metric_json(s.f1)},
          {"insertion_rate", metric_json(s.insertion_rate)},
          {"deletion_rate", metric_json(s.deletion_rate)}};
}

std::string format_metrics_table(std::span<const MetricsRow> rows) {
  std::size_t width = 5;
  bool events = false;
  for (const auto& r : rows) {
    width = std::max(width, r.model.size());
    events = events || r.events.has_value();
  }
  std::string out = fmt::format("{:<{}}  {:>7}  {:>7}  {:>7}  {:>7}", "model", width, "P", "R", "F1", "AP");
  if (events) out += fmt::format("  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}", "ev_P", "ev_R", "ev_F1", "ins", "del");
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}  {:>7}  {:>7}  {:>7}  {:>7}", r.model, width, metric_text(r.window.precision),
                       metric_text(r.window.recall), metric_text(r.window.f1), metric_text(r.average_precision));
    if (r.events)
      out += fmt::format("  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}", metric_text(r.events->precision),
                         metric_text(r.events->recall), metric_text(r.events->f1),
                         metric_text(r.events->insertion_rate), metric_text(r.events->deletion_rate));
    out += '\n';
  }
  return out;
}

} // namespace shotlog
