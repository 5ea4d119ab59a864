#pragma once

#include "shotlog/features.hpp"
#include "shotlog/models.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace shotlog {

// Binary tree in parallel arrays. feature[n] < 0 marks a leaf whose value is
// the positive-class fraction of its training samples; otherwise samples with
// x[feature] <= threshold go left.
struct DecisionTree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<std::int32_t> left;
  std::vector<std::int32_t> right;
  std::vector<double> value;

  std::size_t node_count() const noexcept { return feature.size(); }
  std::size_t depth() const;
  double predict(std::span<const double> x) const;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct TreeOptions {
  std::size_t max_depth = 12;
  std::size_t features_per_split = 2;
  std::size_t min_samples_leaf = 1;
};

// CART with Gini impurity on the rows listed in `sample` (repeats allowed).
DecisionTree fit_tree(std::span<const double> rows, std::size_t dim, std::span<const std::uint8_t> labels,
                      std::span<const std::size_t> sample, const TreeOptions& options, std::uint64_t seed);

struct ForestModel {
  std::size_t dim = kFeatureCount;
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_seeds;

  // Mean of the tree outputs. Throws DomainError on a width mismatch.
  double predict_proba(std::span<const double> features) const;
  std::vector<double> predict_proba(const FeatureMatrix& data) const;
  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

// Bagged CART trees on raw features. Single-class data gives single-leaf trees.
ForestModel train_forest(const FeatureMatrix& data, const TrainConfig& config);

} // namespace shotlog
