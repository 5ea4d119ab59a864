#include "shotlog/forest.hpp"

#include "parallel.hpp"
#include "shotlog/error.hpp"
#include "shotlog/seed.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <random>

namespace shotlog {

namespace {

struct Builder {
  std::span<const double> rows;
  std::size_t dim;
  std::span<const std::uint8_t> labels;
  TreeOptions options;
  std::mt19937_64 rng;
  DecisionTree tree;
  std::vector<std::size_t> order;

  double x(std::size_t sample, std::size_t f) const { return rows[sample * dim + f]; }

  std::int32_t leaf(double value) {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(value);
    return static_cast<std::int32_t>(tree.feature.size() - 1);
  }

  // Builds the subtree over order[begin, end).
  std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t n = end - begin;
    std::size_t pos = 0;
    for (std::size_t i = begin; i < end; ++i) pos += labels[order[i]];
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    if (pos == 0 || pos == n || depth >= options.max_depth || n < 2 * options.min_samples_leaf)
      return leaf(p);

    std::vector<std::size_t> features(dim);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng);

    double best_score = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::size_t tried = 0;
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(end);
    for (std::size_t f : features) {
      if (tried >= options.features_per_split) break;
      std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
      if (x(*first, f) == x(*(last - 1), f)) continue; // constant here: does not count as tried
      ++tried;
      // Gini of a split, scaled by n: nl * 2 pl (1 - pl) + nr * 2 pr (1 - pr).
      std::size_t left_pos = 0;
      for (std::size_t k = 1; k < n; ++k) {
        left_pos += labels[order[begin + k - 1]];
        const double a = x(order[begin + k - 1], f), b = x(order[begin + k], f);
        if (a == b || k < options.min_samples_leaf || n - k < options.min_samples_leaf) continue;
        const double nl = static_cast<double>(k), nr = static_cast<double>(n - k);
        const double pl = left_pos / nl, pr = (pos - left_pos) / nr;
        const double impurity = nl * pl * (1.0 - pl) + nr * pr * (1.0 - pr);
        if (best_feature < 0 || impurity < best_score) {
          best_score = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = a + 0.5 * (b - a);
          if (best_threshold >= b) best_threshold = a;
        }
      }
    }
    if (best_feature < 0) return leaf(p);

    const auto f = static_cast<std::size_t>(best_feature);
    const auto mid = std::stable_partition(first, last, [&](std::size_t s) { return x(s, f) <= best_threshold; });
    const std::size_t split = static_cast<std::size_t>(mid - order.begin());
    const std::int32_t node = leaf(p);
    tree.feature[node] = best_feature;
    tree.threshold[node] = best_threshold;
    const std::int32_t l = grow(begin, split, depth + 1);
    const std::int32_t r = grow(split, end, depth + 1);
    tree.left[node] = l;
    tree.right[node] = r;
    return node;
  }
};

} // namespace

std::size_t DecisionTree::depth() const {
  if (feature.empty()) return 0;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
  std::size_t best = 0;
  while (!stack.empty()) {
    const auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (feature[n] >= 0) {
      stack.push_back({left[n], d + 1});
      stack.push_back({right[n], d + 1});
    }
  }
  return best;
}

double DecisionTree::predict(std::span<const double> x) const {
  std::int32_t n = 0;
  while (feature[n] >= 0) n = x[feature[n]] <= threshold[n] ? left[n] : right[n];
  return value[n];
}

DecisionTree fit_tree(std::span<const double> rows, std::size_t dim, std::span<const std::uint8_t> labels,
                      std::span<const std::size_t> sample, const TreeOptions& options, std::uint64_t seed) {
  if (sample.empty()) throw TrainingError("cannot fit a tree on zero samples");
  Builder b{rows, dim, labels, options, std::mt19937_64(seed), {}, {sample.begin(), sample.end()}};
  b.grow(0, b.order.size(), 0);
  return std::move(b.tree);
}

double ForestModel::predict_proba(std::span<const double> features) const {
  if (features.size() != dim)
    throw DomainError(fmt::format("forest expects {} features, got {}", dim, features.size()));
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(features);
  return s / static_cast<double>(trees.size());
}

std::vector<double> ForestModel::predict_proba(const FeatureMatrix& data) const {
  std::vector<double> p(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) p[i] = predict_proba(data.row(i));
  return p;
}

ForestModel train_forest(const FeatureMatrix& data, const TrainConfig& config) {
  config.validate();
  if (data.rows() == 0) throw TrainingError("cannot train a forest on an empty dataset");
  ForestModel m;
  m.dim = data.dim;
  m.trees.resize(config.n_trees);
  m.tree_seeds.resize(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) m.tree_seeds[t] = derive_seed(config.seed, t);
  const TreeOptions opt{config.max_depth, config.features_per_split, config.min_samples_leaf};
  detail::parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
    std::mt19937_64 rng(m.tree_seeds[t]);
    std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
    std::vector<std::size_t> sample(data.rows());
    for (auto& s : sample) s = pick(rng);
    m.trees[t] = fit_tree(data.values, data.dim, data.labels, sample, opt, rng());
  });
  return m;
}

} // namespace shotlog
