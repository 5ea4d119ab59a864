#pragma once

#include "shotlog/features.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace shotlog {

enum class ModelKind { logistic, forest, cnn };

std::string_view to_string(ModelKind kind) noexcept;
// Throws ConfigError naming the valid kinds.
ModelKind parse_model_kind(std::string_view text);

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 300;
  std::size_t batch_size = 64;
  double l2 = 1e-4;
  // Weight of positive examples in the loss; unset means negatives / positives
  // of the training data.
  std::optional<double> class_weight;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  std::size_t n_trees = 100;
  std::size_t max_depth = 12;
  std::size_t features_per_split = 2;
  std::size_t min_samples_leaf = 1;

  // Worker threads. Results do not depend on this value.
  std::size_t threads = 1;

  // Throws ConfigError on a non-positive hyperparameter.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

TrainConfig default_train_config(ModelKind kind);

// negatives / positives, or the configured override.
double positive_class_weight(std::span<const std::uint8_t> labels, const TrainConfig& config);

// Per-epoch training summary.
// Logistic: full-batch loss before the first step and after each epoch.
// Convnet: mean minibatch loss of each epoch.
struct TrainingLog {
  std::vector<double> loss;
};

} // namespace shotlog
