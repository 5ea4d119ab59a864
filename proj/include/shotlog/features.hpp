#pragma once

#include "shotlog/indicators.hpp"
#include "shotlog/labeling.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shotlog {

inline constexpr std::size_t kFeatureCount = 5;

struct FeatureVector {
  double max_level_db = 0.0;
  double max_diff_from_median_db = 0.0;
  double max_pos_change_db = 0.0;
  // Signed: negative for a drop.
  double max_neg_change_db = 0.0;
  // (index of the largest drop - index of the largest rise) * hop; positive
  // when the drop follows the rise.
  double time_between_extreme_changes_s = 0.0;

  std::array<double, kFeatureCount> as_array() const noexcept;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

const std::array<std::string_view, kFeatureCount>& feature_names() noexcept;

// Five level features of one 1 s window (8 consecutive L_AF values). Throws
// DomainError on the wrong length or non-finite values.
FeatureVector window_features(std::span<const double> levels);

// Row-major matrix, one row per window, aligned with labels.
struct FeatureMatrix {
  std::size_t dim = kFeatureCount;
  std::vector<double> values;
  std::vector<std::uint8_t> labels;

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return std::span(values).subspan(i * dim, dim); }
  void append(const FeatureMatrix& other);
};

// Window i uses levels i .. i+7. Throws AlignmentError unless the series has
// exactly labeling.size() + 7 values on the same hop.
FeatureMatrix featurize_dataset(const LevelSeries& series, const WindowLabeling& labeling);

std::string format_feature_csv(const FeatureMatrix& matrix);

// Per-column z-score statistics.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const noexcept { return mean.size(); }
  void apply(std::span<double> row) const;
  friend bool operator==(const Standardization&, const Standardization&) = default;
};

// Columns with zero spread get std 1. `rows` is row-major with `dim` columns.
Standardization fit_standardization(std::span<const double> rows, std::size_t dim);

} // namespace shotlog
