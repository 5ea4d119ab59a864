#include "shotlog/error.hpp"
#include "shotlog/eval_metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace shotlog;

namespace {

WindowScores scores(std::vector<double> p, std::vector<std::uint8_t> y) { return {std::move(p), std::move(y)}; }

WindowScores random_scores(std::size_t n, std::uint64_t seed, bool coarse = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  WindowScores s;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = u(rng) < 0.3;
    double p = std::clamp(0.5 * u(rng) + (y ? 0.3 : 0.0), 0.0, 1.0);
    if (coarse) p = std::round(p * 8.0) / 8.0;
    s.probability.push_back(p);
    s.label.push_back(y);
  }
  return s;
}

// Precision at each positive's rank, counting higher-scored windows and
// equal-scored ones that come earlier in the input.
double brute_force_ap(const WindowScores& s) {
  double sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.label[i]) continue;
    ++pos;
    std::size_t above = 0, above_pos = 0;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s.probability[j] > s.probability[i] || (s.probability[j] == s.probability[i] && j <= i)) {
        ++above;
        above_pos += s.label[j];
      }
    sum += static_cast<double>(above_pos) / static_cast<double>(above);
  }
  return sum / static_cast<double>(pos);
}

std::vector<EventAnnotation> refs(std::initializer_list<double> onsets) {
  std::vector<EventAnnotation> r;
  for (double t : onsets) r.push_back({t, t + 0.5, EventLabel::gunshot, ""});
  return r;
}

std::vector<DetectionEvent> dets(std::initializer_list<double> onsets) {
  std::vector<DetectionEvent> d;
  for (double t : onsets) d.push_back({t, t + 1.0, 0.9, 1});
  return d;
}

void check_complementary(const EventScore& s) {
  if (s.precision) CHECK(*s.insertion_rate == doctest::Approx(1.0 - *s.precision).epsilon(1e-15));
  if (s.recall) CHECK(*s.deletion_rate == doctest::Approx(1.0 - *s.recall).epsilon(1e-15));
  if (s.precision && s.recall && *s.precision + *s.recall > 0)
    CHECK(*s.f1 == doctest::Approx(2 * *s.precision * *s.recall / (*s.precision + *s.recall)));
}

} // namespace

TEST_CASE("window F1") {
  SUBCASE("perfect predictions") {
    const auto m = window_f1(scores({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0}), 0.5);
    CHECK(*m.precision == 1.0);
    CHECK(*m.recall == 1.0);
    CHECK(*m.f1 == 1.0);
  }
  SUBCASE("3 TP, 1 FP, 1 FN") {
    const auto m = window_f1(scores({0.9, 0.8, 0.7, 0.6, 0.1, 0.2}, {1, 1, 1, 0, 1, 0}), 0.5);
    CHECK(m.tp == 3);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.tn == 1);
    CHECK(*m.precision == 0.75);
    CHECK(*m.recall == 0.75);
    CHECK(*m.f1 == 0.75);
  }
  SUBCASE("all predicted negative") {
    const auto m = window_f1(scores({0.1, 0.2, 0.3}, {1, 0, 1}), 0.5);
    CHECK(!m.precision);
    CHECK(*m.recall == 0.0);
    CHECK(*m.f1 == 0.0);
  }
  SUBCASE("no positives") {
    const auto m = window_f1(scores({0.1, 0.2}, {0, 0}), 0.5);
    CHECK(!m.recall);
    CHECK(!m.precision);
    CHECK(!m.f1);
    CHECK(to_json(m)["recall"].is_null());
  }
  SUBCASE("threshold is inclusive") { CHECK(window_f1(scores({0.5}, {1}), 0.5).tp == 1); }
  SUBCASE("malformed input") {
    CHECK_THROWS_AS(window_f1(scores({0.5, 0.2}, {1}), 0.5), DomainError);
    CHECK_THROWS_AS(window_f1(scores({1.5}, {1}), 0.5), DomainError);
    CHECK_THROWS_AS(window_f1(scores({NAN}, {1}), 0.5), DomainError);
  }
}

TEST_CASE("average precision") {
  CHECK(*average_precision(scores({0.9, 0.8, 0.1}, {1, 0, 1})) == doctest::Approx(0.8333333333333334).epsilon(1e-15));
  CHECK(*average_precision(scores({0.9, 0.8, 0.1}, {1, 0, 1})) == (1.0 + 2.0 / 3.0) / 2.0);
  CHECK(*average_precision(scores({0.9, 0.7, 0.3, 0.1}, {1, 1, 0, 0})) == 1.0);
  CHECK(*average_precision(scores({0.1, 0.5, 0.3}, {1, 1, 1})) == 1.0);
  CHECK(!average_precision(scores({0.1, 0.5}, {0, 0})));
  SUBCASE("ties keep input order") {
    CHECK(*average_precision(scores({0.5, 0.5}, {0, 1})) == 0.5);
    CHECK(*average_precision(scores({0.5, 0.5}, {1, 0})) == 1.0);
  }
  SUBCASE("brute-force oracle and monotone invariance") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto s = random_scores(60, seed, seed % 2 == 1);
      if (s.positives() == 0) continue;
      const double ap = *average_precision(s);
      CHECK(ap == doctest::Approx(brute_force_ap(s)).epsilon(1e-12));
      auto t = s;
      for (auto& p : t.probability) p = std::pow(p, 3.0) * 0.5 + 0.1;
      CHECK(*average_precision(t) == doctest::Approx(ap).epsilon(1e-12));
    }
  }
}

TEST_CASE("DET curve") {
  SUBCASE("sentinels") {
    const auto c = det_curve(scores({0.9, 0.4, 0.6, 0.2}, {1, 0, 1, 0}));
    CHECK(std::isinf(c.points.front().threshold));
    CHECK(c.points.front().false_positive_rate == 0.0);
    CHECK(c.points.front().false_negative_rate == 1.0);
    CHECK(c.points.back().false_positive_rate == 1.0);
    CHECK(c.points.back().false_negative_rate == 0.0);
    CHECK(c.points.size() == 6);
    CHECK(format_det_csv(c).rfind("threshold,false_positive_rate,false_negative_rate\ninf,0,1\n", 0) == 0);
  }
  SUBCASE("CSV round trip") {
    const auto c = det_curve(random_scores(60, 3, false));
    const auto back = parse_det_csv(format_det_csv(c));
    REQUIRE(back.points.size() == c.points.size());
    CHECK(std::isinf(back.points.front().threshold));
    CHECK(back.points.back().threshold < 0.0);
    for (std::size_t i = 1; i + 1 < c.points.size(); ++i) {
      CHECK(back.points[i].threshold == doctest::Approx(c.points[i].threshold).epsilon(1e-9));
      CHECK(back.points[i].false_positive_rate == doctest::Approx(c.points[i].false_positive_rate).epsilon(1e-9));
      CHECK(back.points[i].false_negative_rate == doctest::Approx(c.points[i].false_negative_rate).epsilon(1e-9));
    }
    CHECK_THROWS_AS(parse_det_csv("threshold,false_positive_rate,false_negative_rate\n0.5,x,1\n"), ValidationError);
    CHECK_THROWS_AS(parse_det_csv("a,b\n"), ValidationError);
  }
  SUBCASE("perfect separation reaches the origin") {
    const auto c = det_curve(scores({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}));
    bool origin = false;
    for (const auto& p : c.points) origin = origin || (p.false_positive_rate == 0.0 && p.false_negative_rate == 0.0);
    CHECK(origin);
  }
  SUBCASE("monotone and consistent with window_f1") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto s = random_scores(80, seed, seed % 2 == 0);
      if (s.positives() == 0 || s.positives() == s.size()) continue;
      const auto c = det_curve(s);
      for (std::size_t i = 1; i < c.points.size(); ++i) {
        // Thresholds decrease along the curve.
        CHECK(c.points[i].threshold < c.points[i - 1].threshold);
        CHECK(c.points[i].false_positive_rate >= c.points[i - 1].false_positive_rate);
        CHECK(c.points[i].false_negative_rate <= c.points[i - 1].false_negative_rate);
      }
      const auto& mid = c.points[c.points.size() / 2];
      const auto m = window_f1(s, mid.threshold);
      CHECK(mid.false_positive_rate == doctest::Approx(static_cast<double>(m.fp) / (m.fp + m.tn)));
      CHECK(mid.false_negative_rate == doctest::Approx(static_cast<double>(m.fn) / (m.fn + m.tp)));
    }
  }
  SUBCASE("single class") { CHECK_THROWS_AS(det_curve(scores({0.1, 0.2}, {1, 1})), DomainError); }
  SUBCASE("svg") {
    const std::vector<std::pair<std::string, DetCurve>> curves{
        {"cnn", det_curve(scores({0.9, 0.4}, {1, 0}))}, {"forest", det_curve(scores({0.4, 0.9}, {1, 0}))}};
    const auto svg = format_det_svg(curves);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("forest") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
}

TEST_CASE("event metrics") {
  SUBCASE("match inside the collar") {
    const auto s = event_metrics(refs({5.0}), dets({5.2}), 0.5);
    CHECK(*s.precision == 1.0);
    CHECK(*s.recall == 1.0);
    CHECK(*s.f1 == 1.0);
    CHECK(*s.insertion_rate == 0.0);
  }
  SUBCASE("collar boundary and negative collar") {
    CHECK(event_metrics(refs({5.0}), dets({5.5}), 0.5).n_matched == 1);
    CHECK(event_metrics(refs({5.0}), dets({5.51}), 0.5).n_matched == 0);
    CHECK_THROWS_AS(event_metrics(refs({5.0}), dets({5.0}), -0.1), DomainError);
  }
  SUBCASE("each reference matches once") {
    const auto s = event_metrics(refs({5.0}), dets({4.9, 5.1}), 0.5);
    CHECK(s.n_matched == 1);
    CHECK(*s.precision == 0.5);
    CHECK(*s.insertion_rate == 0.5);
    check_complementary(s);
  }
  SUBCASE("nearest unmatched reference wins") {
    const auto s = event_metrics(refs({1.0, 1.4}), dets({1.3, 0.9}), 0.5);
    CHECK(s.n_matched == 2);
  }
  SUBCASE("empty detections") {
    const auto s = event_metrics(refs({1.0, 2.0}), {}, 0.5);
    CHECK(*s.recall == 0.0);
    CHECK(*s.deletion_rate == 1.0);
    CHECK(!s.insertion_rate);
    CHECK(!s.precision);
    CHECK(to_json(s)["insertion_rate"].is_null());
  }
  SUBCASE("reference against itself") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    std::vector<EventAnnotation> r;
    for (int i = 0; i < 30; ++i) r.push_back({u(rng), 0.0, EventLabel::gunshot, ""});
    std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.onset_s < b.onset_s; });
    std::vector<DetectionEvent> d;
    for (const auto& a : r) d.push_back({a.onset_s, a.onset_s + 1.0, 1.0, 8});
    for (double collar : {0.0, 0.2, 0.5, 3.0}) {
      const auto s = event_metrics(r, d, collar);
      CHECK(*s.precision == 1.0);
      CHECK(*s.recall == 1.0);
      CHECK(*s.insertion_rate == 0.0);
      CHECK(*s.deletion_rate == 0.0);
    }
  }
  SUBCASE("reported operating point: 64 of 67 detections match 92 references") {
    std::vector<EventAnnotation> r;
    std::vector<DetectionEvent> d;
    for (int i = 0; i < 92; ++i) r.push_back({10.0 * i, 10.0 * i + 0.3, EventLabel::gunshot, ""});
    for (int i = 0; i < 64; ++i) d.push_back({10.0 * i + 0.1, 10.0 * i + 1.1, 0.9, 8});
    for (int i = 0; i < 3; ++i) d.push_back({2000.0 + 5.0 * i, 2001.0 + 5.0 * i, 0.9, 8});
    const auto s = event_metrics(r, d, 0.5);
    CHECK(s.n_matched == 64);
    CHECK(std::round(*s.precision * 1000.0) / 10.0 == 95.5);
    CHECK(std::round(*s.recall * 1000.0) / 10.0 == 69.6);
    CHECK(std::round(*s.f1 * 1000.0) / 10.0 == 80.5);
    CHECK(std::round(*s.insertion_rate * 1000.0) / 10.0 == 4.5);
    CHECK(std::round(*s.deletion_rate * 1000.0) / 10.0 == 30.4);
    check_complementary(s);
  }
  SUBCASE("complementarity on random fixtures, combined totals") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 60.0);
    std::vector<EventScore> parts;
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<EventAnnotation> r;
      std::vector<DetectionEvent> d;
      for (int i = 0; i < trial % 7; ++i) r.push_back({u(rng), 0.0, EventLabel::gunshot, ""});
      for (int i = 0; i < trial % 5; ++i) d.push_back({u(rng), 61.0, 0.7, 1});
      std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.onset_s < b.onset_s; });
      std::sort(d.begin(), d.end(), [](auto& a, auto& b) { return a.onset_s < b.onset_s; });
      parts.push_back(event_metrics(r, d, 5.0));
      check_complementary(parts.back());
    }
    const auto total = combine(parts);
    std::size_t m = 0;
    for (const auto& p : parts) m += p.n_matched;
    CHECK(total.n_matched == m);
    check_complementary(total);
  }
}

TEST_CASE("threshold selection") {
  const auto s = scores({0.95, 0.9, 0.6, 0.55, 0.3, 0.1}, {1, 1, 0, 1, 0, 0});
  const auto c = select_threshold(s);
  // Cuts: 0.9 gives F1 0.8, 0.55 gives F1 6/7.
  CHECK(c.threshold == doctest::Approx((0.55 + 0.3) / 2.0));
  CHECK(*c.metrics.f1 == doctest::Approx(6.0 / 7.0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = random_scores(100, seed, true);
    if (r.positives() == 0) continue;
    const auto best = select_threshold(r);
    for (double t = 0.0; t <= 1.0; t += 0.01) CHECK(*window_f1(r, t).f1 <= *best.metrics.f1 + 1e-12);
  }
  CHECK_THROWS_AS(select_threshold(scores({0.1}, {0})), DomainError);
}

TEST_CASE("metrics table") {
  std::vector<MetricsRow> rows{{"logistic", window_f1(scores({0.9, 0.1}, {1, 0}), 0.5), 1.0, std::nullopt},
                               {"cnn", window_f1(scores({0.1}, {1}), 0.5), std::nullopt,
                                event_metrics(refs({1.0}), dets({1.1}), 0.5)}};
  const auto t = format_metrics_table(rows);
  CHECK(t.find("model") == 0);
  CHECK(t.find("logistic") != std::string::npos);
  CHECK(t.find("n/a") != std::string::npos);
  CHECK(t.find("ev_F1") != std::string::npos);
}
