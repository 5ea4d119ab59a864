#include "shotlog/models.hpp"

#include "shotlog/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace shotlog {

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
  case ModelKind::logistic: return "logistic";
  case ModelKind::forest: return "forest";
  case ModelKind::cnn: return "cnn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::logistic, ModelKind::forest, ModelKind::cnn})
    if (text == to_string(k)) return k;
  throw ConfigError(fmt::format("unknown model kind '{}' (valid kinds: logistic, forest, cnn)", text));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (class_weight && !(*class_weight > 0.0)) throw ConfigError("class_weight must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (n_trees == 0) throw ConfigError("n_trees must be positive");
  if (max_depth == 0) throw ConfigError("max_depth must be positive");
  if (features_per_split == 0) throw ConfigError("features_per_split must be positive");
  if (min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be positive");
  if (threads == 0) throw ConfigError("threads must be positive");
}

TrainConfig default_train_config(ModelKind kind) {
  TrainConfig c;
  switch (kind) {
  case ModelKind::logistic:
    c.learning_rate = 0.5;
    c.epochs = 500;
    break;
  case ModelKind::forest:
    break;
  case ModelKind::cnn:
    c.learning_rate = 0.01;
    c.epochs = 12;
    c.batch_size = 64;
    break;
  }
  return c;
}

double positive_class_weight(std::span<const std::uint8_t> labels, const TrainConfig& config) {
  if (config.class_weight) return *config.class_weight;
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw TrainingError("training data needs both classes");
  return neg / pos;
}

} // namespace shotlog
