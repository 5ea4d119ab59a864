#include "shotlog/error.hpp"
#include "shotlog/labeling.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace shotlog;

namespace {

double log_pdf(const GaussianEmission& e, double x) {
  return -std::log(e.std_db * std::sqrt(2.0 * std::numbers::pi)) -
         (x - e.mean_db) * (x - e.mean_db) / (2.0 * e.std_db * e.std_db);
}

// Joint log-probability of a path and the observations, written out directly.
double path_score(const HmmModel& m, const std::vector<int>& path, const std::vector<double>& x) {
  double s = std::log(m.initial[path[0]]) + log_pdf(m.emission[path[0]], x[0]);
  for (std::size_t t = 1; t < x.size(); ++t)
    s += std::log(m.transition[path[t - 1]][path[t]]) + log_pdf(m.emission[path[t]], x[t]);
  return s;
}

std::vector<int> bits(unsigned mask, std::size_t n) {
  std::vector<int> p(n);
  for (std::size_t t = 0; t < n; ++t) p[t] = (mask >> t) & 1u;
  return p;
}

std::vector<int> brute_force_path(const HmmModel& m, const std::vector<double>& x) {
  double best = -INFINITY;
  std::vector<int> arg;
  for (unsigned mask = 0; mask < (1u << x.size()); ++mask) {
    const auto p = bits(mask, x.size());
    const double s = path_score(m, p, x);
    if (s > best) {
      best = s;
      arg = p;
    }
  }
  return arg;
}

HmmModel random_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.02, 0.98), mu(-70.0, -10.0), sd(1.0, 15.0);
  HmmModel m;
  m.emission = {GaussianEmission{mu(rng), sd(rng)}, GaussianEmission{mu(rng), sd(rng)}};
  const double a = u(rng), b = u(rng), p = u(rng);
  m.transition = {{{a, 1.0 - a}, {b, 1.0 - b}}};
  m.initial = {p, 1.0 - p};
  return m;
}

std::vector<int> as_ints(const std::vector<HmmState>& s) {
  std::vector<int> out;
  for (auto v : s) out.push_back(static_cast<int>(v));
  return out;
}

} // namespace

TEST_CASE("viterbi_decode equals exhaustive search") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  std::uniform_real_distribution<double> obs(-80.0, 0.0);
  int exact = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(rng);
    std::vector<double> x(len(rng));
    for (auto& v : x) v = obs(rng);
    exact += as_ints(viterbi_decode(m, x)) == brute_force_path(m, x);
  }
  CHECK(exact == 100);
}

TEST_CASE("viterbi_decode: single spike under sticky transitions") {
  HmmModel m;
  m.emission = {GaussianEmission{-60.0, 2.0}, GaussianEmission{-20.0, 2.0}};
  m.transition = {{{0.99, 0.01}, {0.01, 0.99}}};
  m.initial = {0.99, 0.01};
  for (double spike : {-58.0, -52.0, -45.0, -40.0, -30.0, -20.0}) {
    std::vector<double> x(8, -60.0);
    x[4] = spike;
    CAPTURE(spike);
    CHECK(as_ints(viterbi_decode(m, x)) == brute_force_path(m, x));
  }
  std::vector<double> quiet(8, -60.0);
  for (auto s : viterbi_decode(m, quiet)) CHECK(s == HmmState::background);
  CHECK_THROWS_AS(viterbi_decode(m, std::vector<double>{}), DomainError);
}

TEST_CASE("log_likelihood equals the sum over all paths") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> obs(-80.0, 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model(rng);
    std::vector<double> x(6);
    for (auto& v : x) v = obs(rng);
    double total = 0.0;
    for (unsigned mask = 0; mask < 64; ++mask) total += std::exp(path_score(m, bits(mask, 6), x));
    CHECK(log_likelihood(m, x) == doctest::Approx(std::log(total)).epsilon(1e-10));
  }
}

TEST_CASE("fit_hmm") {
  SUBCASE("recovers two well separated Gaussians") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> quiet(-60.0, 2.0), loud(-20.0, 2.0);
    std::bernoulli_distribution stay(0.95);
    std::vector<double> x;
    int state = 0;
    for (int t = 0; t < 2000; ++t) {
      if (!stay(rng)) state = 1 - state;
      x.push_back(state ? loud(rng) : quiet(rng));
    }
    const auto m = fit_hmm(x);
    CHECK(std::abs(m.emission[0].mean_db + 60.0) <= 1.0);
    CHECK(std::abs(m.emission[1].mean_db + 20.0) <= 1.0);
    CHECK(std::abs(m.emission[0].std_db - 2.0) <= 0.3);
    CHECK(m.transition[0][0] == doctest::Approx(0.95).epsilon(0.03));
    for (const auto& row : m.transition) CHECK(std::abs(row[0] + row[1] - 1.0) <= 1e-9);
    const auto path = viterbi_decode(m, x);
    int agree = 0;
    for (std::size_t t = 0; t < x.size(); ++t) agree += (x[t] > -40.0) == (path[t] == HmmState::event);
    CHECK(agree >= 1990);
  }
  SUBCASE("states are ordered even when the loud state dominates") {
    std::vector<double> x(50, -10.0);
    for (int t = 20; t < 23; ++t) x[t] = -70.0 + t;
    const auto m = fit_hmm(x);
    CHECK(m.emission[1].mean_db > m.emission[0].mean_db);
  }
  SUBCASE("EM log-likelihood is nondecreasing") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-70.0, -20.0);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x(300);
      for (auto& v : x) v = u(rng);
      HmmFitOptions o;
      o.max_iterations = 20;
      o.tolerance = -INFINITY;
      const auto m = fit_hmm(x, o);
      REQUIRE(m.log_likelihood_history.size() == 20);
      for (std::size_t i = 1; i < 20; ++i)
        CHECK(m.log_likelihood_history[i] >= m.log_likelihood_history[i - 1] - 1e-9);
    }
  }
  SUBCASE("degenerate input") {
    CHECK_THROWS_AS(fit_hmm(std::vector<double>(30, -45.0)), FitError);
    CHECK_THROWS_AS(fit_hmm(std::vector<double>{-1, -2, -3}), FitError);
    LevelSeries s;
    s.values_db.assign(40, -120.0);
    CHECK_THROWS_AS(fit_hmm(s), FitError);
  }
}

TEST_CASE("states_to_annotations") {
  using S = HmmState;
  const std::vector<S> bbeeebb{S::background, S::background, S::event, S::event,
                               S::event,      S::background, S::background};
  const auto a = states_to_annotations(bbeeebb, 0.125, 0.2);
  REQUIRE(a.size() == 1);
  CHECK(a[0].onset_s == 0.25);
  CHECK(a[0].offset_s == 0.625);
  CHECK(a[0].label == EventLabel::gunshot);

  const std::vector<S> single{S::background, S::event, S::background};
  CHECK(states_to_annotations(single, 0.125, 0.25).empty());
  CHECK(states_to_annotations(single, 0.125, 0.125).size() == 1);
  CHECK(states_to_annotations(std::vector<S>(9, S::background)).empty());

  const std::vector<S> edges{S::event, S::background, S::event, S::event};
  const auto b = states_to_annotations(edges, 0.125, 0.0, EventLabel::explosion);
  REQUIRE(b.size() == 2);
  CHECK(b[1].onset_s == 0.25);
  CHECK(b[1].offset_s == 0.5);
  CHECK(b[1].label == EventLabel::explosion);
}

TEST_CASE("window labels") {
  const std::vector<EventAnnotation> shot{{3.0, 3.2, EventLabel::gunshot, ""}};
  SUBCASE("overlap containment") {
    const auto w = annotations_to_window_labels(shot, 20.0, LabelMode::overlap);
    REQUIRE(w.size() == 153);
    CHECK(w.labels[20] == 1); // [2.5, 3.5)
    CHECK(w.labels[16] == 0); // [2.0, 3.0) ends at the onset
    CHECK(w.labels[17] == 1);
    CHECK(w.labels[25] == 1); // [3.125, 4.125) still overlaps the tail
    CHECK(w.labels[26] == 0); // [3.25, 4.25)
    CHECK(w.positives() == 9);
  }
  SUBCASE("onset_only needs the onset instant") {
    const auto w = annotations_to_window_labels(shot, 20.0, LabelMode::onset_only);
    CHECK(w.labels[25] == 0); // [3.125, 4.125)
    CHECK(w.labels[24] == 1); // [3.0, 4.0)
    CHECK(w.labels[17] == 1); // [2.125, 3.125)
    CHECK(w.labels[16] == 0);
    CHECK(w.positives() == 8);
  }
  SUBCASE("no annotations") {
    const auto w = annotations_to_window_labels({}, 20.0);
    CHECK(w.positives() == 0);
    CHECK(w.size() == 153);
  }
  SUBCASE("window count formula") {
    CHECK(window_count(0.5) == 0);
    CHECK(window_count(1.0) == 1);
    CHECK(window_count(1.124) == 1);
    CHECK(window_count(1.125) == 2);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(0.0, 100.0);
    for (int i = 0; i < 1000; ++i) {
      const double dur = d(rng);
      const long expected = std::max(0L, static_cast<long>(std::floor((dur - 1.0) / 0.125)) + 1);
      CHECK(window_count(dur) == static_cast<std::size_t>(expected));
    }
  }
  SUBCASE("positive windows per isolated event are bounded") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> len(0.01, 3.0), on(2.0, 15.0);
    for (int i = 0; i < 500; ++i) {
      const double l = len(rng), o = on(rng);
      const std::vector<EventAnnotation> ev{{o, o + l, EventLabel::gunshot, ""}};
      const auto w = annotations_to_window_labels(ev, 20.0);
      CHECK(w.positives() >= static_cast<std::size_t>(std::floor(l / 0.125)));
      CHECK(w.positives() <= static_cast<std::size_t>(std::ceil((l + 1.0) / 0.125)) + 1);
    }
  }
}
