#include "shotlog/features.hpp"

#include "shotlog/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace shotlog {

std::array<double, kFeatureCount> FeatureVector::as_array() const noexcept {
  return {max_level_db, max_diff_from_median_db, max_pos_change_db, max_neg_change_db,
          time_between_extreme_changes_s};
}

const std::array<std::string_view, kFeatureCount>& feature_names() noexcept {
  static constexpr std::array<std::string_view, kFeatureCount> names{
      "max_level_db", "max_diff_from_median_db", "max_pos_change_db", "max_neg_change_db",
      "time_between_extreme_changes_s"};
  return names;
}

FeatureVector window_features(std::span<const double> v) {
  if (v.size() != kWindowFrames)
    throw DomainError(fmt::format("window features need {} levels, got {}", kWindowFrames, v.size()));
  for (double x : v)
    if (!std::isfinite(x)) throw DomainError("window features need finite levels");

  std::array<double, kWindowFrames> sorted{};
  std::copy(v.begin(), v.end(), sorted.begin());
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[3] + sorted[4]);

  FeatureVector f;
  f.max_level_db = sorted.back();
  f.max_diff_from_median_db = sorted.back() - median;
  std::size_t up = 0, down = 0;
  double best_up = v[1] - v[0], best_down = best_up;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const double d = v[i + 1] - v[i];
    if (d > best_up) {
      best_up = d;
      up = i;
    }
    if (d < best_down) {
      best_down = d;
      down = i;
    }
  }
  f.max_pos_change_db = best_up;
  f.max_neg_change_db = best_down;
  f.time_between_extreme_changes_s = (static_cast<double>(down) - static_cast<double>(up)) * kHopSeconds;
  return f;
}

void FeatureMatrix::append(const FeatureMatrix& other) {
  if (other.rows() == 0) return;
  if (other.dim != dim) throw AlignmentError("feature matrices differ in width");
  values.insert(values.end(), other.values.begin(), other.values.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

FeatureMatrix featurize_dataset(const LevelSeries& series, const WindowLabeling& labeling) {
  if (std::abs(series.hop_s - labeling.hop_s) > 1e-12)
    throw AlignmentError(fmt::format("level hop {} s differs from window hop {} s", series.hop_s, labeling.hop_s));
  const std::size_t windows = series.size() >= kWindowFrames ? series.size() - kWindowFrames + 1 : 0;
  if (windows != labeling.size())
    throw AlignmentError(fmt::format("{} levels give {} windows but the labeling has {}", series.size(), windows,
                                     labeling.size()));
  FeatureMatrix m;
  m.values.reserve(windows * kFeatureCount);
  m.labels = labeling.labels;
  for (std::size_t i = 0; i < windows; ++i) {
    const auto f = window_features(std::span(series.values_db).subspan(i, kWindowFrames)).as_array();
    m.values.insert(m.values.end(), f.begin(), f.end());
  }
  return m;
}

std::string format_feature_csv(const FeatureMatrix& m) {
  std::string out;
  for (auto n : feature_names()) out += fmt::format("{},", n);
  out += "label\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (double v : m.row(i)) out += fmt::format("{},", v);
    out += fmt::format("{}\n", m.labels[i]);
  }
  return out;
}

void Standardization::apply(std::span<double> row) const {
  if (row.size() != mean.size()) throw DomainError("row width does not match the standardization");
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / std[j];
}

Standardization fit_standardization(std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw DomainError("rows are not a whole number of columns");
  const std::size_t n = rows.size() / dim;
  Standardization s;
  s.mean.assign(dim, 0.0);
  s.std.assign(dim, 1.0);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] += rows[i * dim + j];
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = rows[i * dim + j] - s.mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.std[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

} // namespace shotlog
