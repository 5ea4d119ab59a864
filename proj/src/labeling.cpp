#include "shotlog/labeling.hpp"

#include "shotlog/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace shotlog {

namespace {

double log_density(const GaussianEmission& e, double x) {
  const double z = (x - e.mean_db) / e.std_db;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(e.std_db) - 0.5 * z * z;
}

struct ForwardBackward {
  std::vector<std::array<double, 2>> gamma;
  std::array<std::array<double, 2>, 2> xi_sum{};
  double log_likelihood = 0.0;
};

// Scaled emission likelihoods: b[t][k] = p(x_t | k) / exp(shift[t]).
void emissions(const HmmModel& m, std::span<const double> x, std::vector<std::array<double, 2>>& b,
               std::vector<double>& shift) {
  b.resize(x.size());
  shift.resize(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double l0 = log_density(m.emission[0], x[t]);
    const double l1 = log_density(m.emission[1], x[t]);
    shift[t] = std::max(l0, l1);
    b[t] = {std::exp(l0 - shift[t]), std::exp(l1 - shift[t])};
  }
}

ForwardBackward forward_backward(const HmmModel& m, std::span<const double> x, bool want_posteriors) {
  const std::size_t n = x.size();
  std::vector<std::array<double, 2>> b;
  std::vector<double> shift;
  emissions(m, x, b, shift);

  std::vector<std::array<double, 2>> alpha(n);
  std::vector<double> c(n);
  ForwardBackward r;
  for (std::size_t t = 0; t < n; ++t) {
    for (int k = 0; k < 2; ++k) {
      const double prior = t == 0 ? m.initial[k]
                                  : alpha[t - 1][0] * m.transition[0][k] + alpha[t - 1][1] * m.transition[1][k];
      alpha[t][k] = prior * b[t][k];
    }
    c[t] = alpha[t][0] + alpha[t][1];
    alpha[t][0] /= c[t];
    alpha[t][1] /= c[t];
    r.log_likelihood += std::log(c[t]) + shift[t];
  }
  if (!want_posteriors) return r;

  std::vector<std::array<double, 2>> beta(n, {1.0, 1.0});
  for (std::size_t t = n - 1; t-- > 0;) {
    for (int i = 0; i < 2; ++i) {
      double s = 0.0;
      for (int j = 0; j < 2; ++j) s += m.transition[i][j] * b[t + 1][j] * beta[t + 1][j];
      beta[t][i] = s / c[t + 1];
    }
  }
  r.gamma.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double g0 = alpha[t][0] * beta[t][0], g1 = alpha[t][1] * beta[t][1];
    r.gamma[t] = {g0 / (g0 + g1), g1 / (g0 + g1)};
  }
  for (std::size_t t = 0; t + 1 < n; ++t)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        r.xi_sum[i][j] += alpha[t][i] * m.transition[i][j] * b[t + 1][j] * beta[t + 1][j] / c[t + 1];
  return r;
}

HmmModel two_means_start(std::span<const double> x, double min_std) {
  double lo = *std::min_element(x.begin(), x.end());
  double hi = *std::max_element(x.begin(), x.end());
  std::vector<int> assign(x.size(), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const int k = std::abs(x[t] - hi) < std::abs(x[t] - lo) ? 1 : 0;
      changed |= k != assign[t];
      assign[t] = k;
    }
    std::array<double, 2> sum{}, cnt{};
    for (std::size_t t = 0; t < x.size(); ++t) {
      sum[assign[t]] += x[t];
      cnt[assign[t]] += 1.0;
    }
    if (cnt[0] > 0) lo = sum[0] / cnt[0];
    if (cnt[1] > 0) hi = sum[1] / cnt[1];
    if (!changed && iter > 0) break;
  }
  HmmModel m;
  std::array<double, 2> ss{}, cnt{};
  std::array<std::array<double, 2>, 2> trans{{{1.0, 1.0}, {1.0, 1.0}}};
  for (std::size_t t = 0; t < x.size(); ++t) {
    const int k = assign[t];
    const double mu = k ? hi : lo;
    ss[k] += (x[t] - mu) * (x[t] - mu);
    cnt[k] += 1.0;
    if (t + 1 < x.size()) trans[k][assign[t + 1]] += 1.0;
  }
  m.emission[0] = {lo, std::max(min_std, std::sqrt(ss[0] / std::max(1.0, cnt[0])))};
  m.emission[1] = {hi, std::max(min_std, std::sqrt(ss[1] / std::max(1.0, cnt[1])))};
  for (int i = 0; i < 2; ++i) {
    const double row = trans[i][0] + trans[i][1];
    m.transition[i] = {trans[i][0] / row, trans[i][1] / row};
  }
  m.initial = {0.5, 0.5};
  return m;
}

} // namespace

HmmModel fit_hmm(std::span<const double> x, const HmmFitOptions& options) {
  if (x.size() < 10) throw FitError(fmt::format("HMM fit needs at least 10 levels, got {}", x.size()));
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (!(*mx - *mn > 1e-9))
    throw FitError("level series is constant; the HMM cannot separate events, label this recording manually");
  for (double v : x)
    if (!std::isfinite(v)) throw FitError("level series contains non-finite values");

  HmmModel m = two_means_start(x, options.min_std_db);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    const auto fb = forward_backward(m, x, true);
    m.log_likelihood_history.push_back(fb.log_likelihood);
    const std::size_t h = m.log_likelihood_history.size();
    if (h > 1 && fb.log_likelihood - m.log_likelihood_history[h - 2] < options.tolerance) break;

    HmmModel next = m;
    next.initial = fb.gamma.front();
    for (int i = 0; i < 2; ++i) {
      const double row = fb.xi_sum[i][0] + fb.xi_sum[i][1];
      if (row > 0.0) next.transition[i] = {fb.xi_sum[i][0] / row, fb.xi_sum[i][1] / row};
      double w = 0.0, s = 0.0;
      for (std::size_t t = 0; t < x.size(); ++t) {
        w += fb.gamma[t][i];
        s += fb.gamma[t][i] * x[t];
      }
      if (w <= 0.0) continue;
      const double mu = s / w;
      double v = 0.0;
      for (std::size_t t = 0; t < x.size(); ++t) v += fb.gamma[t][i] * (x[t] - mu) * (x[t] - mu);
      next.emission[i] = {mu, std::max(options.min_std_db, std::sqrt(v / w))};
    }
    m.emission = next.emission;
    m.transition = next.transition;
    m.initial = next.initial;
  }

  if (m.emission[0].mean_db > m.emission[1].mean_db) {
    std::swap(m.emission[0], m.emission[1]);
    std::swap(m.initial[0], m.initial[1]);
    m.transition = {{{m.transition[1][1], m.transition[1][0]}, {m.transition[0][1], m.transition[0][0]}}};
  }
  return m;
}

HmmModel fit_hmm(const LevelSeries& series, const HmmFitOptions& options) {
  return fit_hmm(series.values_db, options);
}

double log_likelihood(const HmmModel& model, std::span<const double> values_db) {
  if (values_db.empty()) return 0.0;
  return forward_backward(model, values_db, false).log_likelihood;
}

std::vector<HmmState> viterbi_decode(const HmmModel& m, std::span<const double> x) {
  if (x.empty()) throw DomainError("cannot decode an empty series");
  const std::size_t n = x.size();
  auto safe_log = [](double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); };
  std::array<std::array<double, 2>, 2> la{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) la[i][j] = safe_log(m.transition[i][j]);

  std::vector<std::array<std::uint8_t, 2>> back(n);
  std::array<double, 2> delta{safe_log(m.initial[0]) + log_density(m.emission[0], x[0]),
                              safe_log(m.initial[1]) + log_density(m.emission[1], x[0])};
  for (std::size_t t = 1; t < n; ++t) {
    std::array<double, 2> next{};
    for (int j = 0; j < 2; ++j) {
      const double from0 = delta[0] + la[0][j], from1 = delta[1] + la[1][j];
      back[t][j] = from1 > from0 ? 1 : 0;
      next[j] = std::max(from0, from1) + log_density(m.emission[j], x[t]);
    }
    delta = next;
  }
  std::vector<HmmState> path(n);
  std::uint8_t s = delta[1] > delta[0] ? 1 : 0;
  for (std::size_t t = n; t-- > 0;) {
    path[t] = static_cast<HmmState>(s);
    if (t > 0) s = back[t][s];
  }
  return path;
}

std::vector<HmmState> viterbi_decode(const HmmModel& model, const LevelSeries& series) {
  return viterbi_decode(model, series.values_db);
}

std::vector<EventAnnotation> states_to_annotations(std::span<const HmmState> states, double hop_s,
                                                   double min_duration_s, EventLabel label) {
  std::vector<EventAnnotation> out;
  std::size_t i = 0;
  while (i < states.size()) {
    if (states[i] != HmmState::event) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < states.size() && states[j] == HmmState::event) ++j;
    const double on = static_cast<double>(i) * hop_s, off = static_cast<double>(j) * hop_s;
    if (off - on >= min_duration_s - 1e-9) out.push_back({on, off, label, {}});
    i = j;
  }
  return out;
}

std::size_t WindowLabeling::positives() const noexcept {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

std::size_t window_count(double duration_s, double window_s, double hop_s) {
  const double k = std::floor((duration_s - window_s) / hop_s + 1e-9);
  return k < 0.0 ? 0 : static_cast<std::size_t>(k) + 1;
}

WindowLabeling annotations_to_window_labels(std::span<const EventAnnotation> annotations, double duration_s,
                                            LabelMode mode) {
  WindowLabeling w;
  w.mode = mode;
  w.labels.assign(window_count(duration_s, w.window_length_s, w.hop_s), 0);
  for (std::size_t i = 0; i < w.labels.size(); ++i) {
    const double a = w.window_start_s(i), b = a + w.window_length_s;
    for (const auto& e : annotations) {
      const bool hit = mode == LabelMode::overlap ? (e.onset_s < b && e.offset_s > a)
                                                  : (e.onset_s >= a && e.onset_s < b);
      if (hit) {
        w.labels[i] = 1;
        break;
      }
    }
  }
  return w;
}

} // namespace shotlog
