#include "shotlog/logistic.hpp"

#include "shotlog/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace shotlog {

namespace {

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void require_both_classes(std::span<const std::uint8_t> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), std::uint8_t{1});
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw TrainingError("logistic regression needs at least one example of each class");
}

} // namespace

LogisticModel zero_logistic(std::size_t dim) {
  LogisticModel m;
  m.weights.assign(dim, 0.0);
  m.standardization.mean.assign(dim, 0.0);
  m.standardization.std.assign(dim, 1.0);
  return m;
}

double LogisticModel::predict_proba(std::span<const double> features) const {
  if (features.size() != weights.size())
    throw DomainError(fmt::format("logistic model expects {} features, got {}", weights.size(), features.size()));
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j)
    z += weights[j] * (features[j] - standardization.mean[j]) / standardization.std[j];
  return sigmoid(z);
}

std::vector<double> LogisticModel::predict_proba(const FeatureMatrix& data) const {
  std::vector<double> p(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) p[i] = predict_proba(data.row(i));
  return p;
}

double logistic_objective(std::span<const double> params, std::span<const double> rows, std::size_t dim,
                          std::span<const std::uint8_t> labels, double positive_weight, double l2,
                          std::vector<double>* gradient) {
  const std::size_t n = labels.size();
  if (params.size() != dim + 1 || rows.size() != n * dim) throw DomainError("logistic objective: shape mismatch");
  if (gradient) gradient->assign(dim + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = rows.subspan(i * dim, dim);
    double z = params[dim];
    for (std::size_t j = 0; j < dim; ++j) z += params[j] * x[j];
    const double y = labels[i];
    const double w = labels[i] ? positive_weight : 1.0;
    loss += w * (softplus(z) - y * z);
    if (gradient) {
      const double r = w * (sigmoid(z) - y);
      for (std::size_t j = 0; j < dim; ++j) (*gradient)[j] += r * x[j];
      (*gradient)[dim] += r;
    }
  }
  const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
  loss *= inv;
  double penalty = 0.0;
  for (std::size_t j = 0; j < dim; ++j) penalty += params[j] * params[j];
  loss += 0.5 * l2 * penalty;
  if (gradient) {
    for (auto& g : *gradient) g *= inv;
    for (std::size_t j = 0; j < dim; ++j) (*gradient)[j] += l2 * params[j];
  }
  return loss;
}

LogisticModel train_logistic(const FeatureMatrix& data, const TrainConfig& config, TrainingLog* log) {
  config.validate();
  require_both_classes(data.labels);
  const std::size_t d = data.dim;
  const double pw = positive_class_weight(data.labels, config);

  LogisticModel m = zero_logistic(d);
  m.standardization = fit_standardization(data.values, d);
  std::vector<double> x(data.values);
  for (std::size_t i = 0; i < data.rows(); ++i) m.standardization.apply(std::span(x).subspan(i * d, d));

  std::vector<double> params(d + 1, 0.0), grad, trial(d + 1);
  double lr = config.learning_rate;
  double loss = logistic_objective(params, x, d, data.labels, pw, config.l2, &grad);
  if (log) log->loss.push_back(loss);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double next = loss;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = params[j] - lr * grad[j];
      next = logistic_objective(trial, x, d, data.labels, pw, config.l2, nullptr);
      if (next <= loss) break;
      lr *= 0.5;
    }
    if (next > loss) break;
    params = trial;
    loss = logistic_objective(params, x, d, data.labels, pw, config.l2, &grad);
    if (log) log->loss.push_back(loss);
  }
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d), m.weights.begin());
  m.bias = params[d];
  return m;
}

} // namespace shotlog
