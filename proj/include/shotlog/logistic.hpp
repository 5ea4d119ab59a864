#pragma once

#include "shotlog/features.hpp"
#include "shotlog/models.hpp"

#include <span>
#include <vector>

namespace shotlog {

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  // Applied to raw features before the linear map.
  Standardization standardization;

  std::size_t dim() const noexcept { return weights.size(); }
  // Probability for one raw feature row. Throws DomainError on a width mismatch.
  double predict_proba(std::span<const double> features) const;
  std::vector<double> predict_proba(const FeatureMatrix& data) const;
  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

// Zero weights over `dim` features, identity standardization.
LogisticModel zero_logistic(std::size_t dim);

// Mean class-weighted binary cross-entropy plus 0.5 * l2 * |w|^2 (bias not
// penalized) on already standardized rows. params = (w_0 .. w_{d-1}, b).
// Fills `gradient` when non-null.
double logistic_objective(std::span<const double> params, std::span<const double> rows, std::size_t dim,
                          std::span<const std::uint8_t> labels, double positive_weight, double l2,
                          std::vector<double>* gradient);

// Full-batch gradient descent; the step halves whenever it would raise the
// loss. Throws TrainingError unless both classes are present.
LogisticModel train_logistic(const FeatureMatrix& data, const TrainConfig& config, TrainingLog* log = nullptr);

} // namespace shotlog
