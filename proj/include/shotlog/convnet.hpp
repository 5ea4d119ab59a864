#pragma once

#include "shotlog/features.hpp"
#include "shotlog/indicators.hpp"
#include "shotlog/labeling.hpp"
#include "shotlog/models.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace shotlog {

inline constexpr std::size_t kPatchBands = kBandCount;
inline constexpr std::size_t kPatchFrames = kWindowFrames;
// Patch layout: row-major [band][frame].
inline constexpr std::size_t kPatchSize = kPatchBands * kPatchFrames;

// One 27 x 8 patch per window (frames i .. i+7). Throws AlignmentError unless
// the spectrogram has labeling.size() + 7 frames on the same hop.
FeatureMatrix spectrogram_patches(const Spectrogram& spectrogram, const WindowLabeling& labeling);

// Parameter block inside ConvNetModel::params.
struct ParameterBlock {
  std::string_view name;
  std::size_t offset;
  std::size_t size;
  bool is_weight;
};

// conv 3x3 (16) -> ReLU -> maxpool 2x2 -> conv 3x3 (32) -> ReLU -> maxpool 2x2
// -> FC 64 -> ReLU -> FC 32 -> ReLU -> FC 1 -> sigmoid. Convolutions use zero
// "same" padding; pooling drops an odd trailing row/column.
// Shapes: 1x27x8 -> 16x27x8 -> 16x13x4 -> 32x13x4 -> 32x6x2 (384) -> 64 -> 32 -> 1.
struct ConvNetModel {
  std::vector<double> params;
  // Per-band statistics applied to every frame of a raw dB patch.
  Standardization standardization;

  static std::size_t parameter_count() noexcept;
  static const std::array<ParameterBlock, 10>& blocks() noexcept;

  // Output logit for a standardized patch.
  double logit(std::span<const double> standardized_patch) const;
  // Probability for a raw dB patch. Throws DomainError on a shape mismatch.
  double predict_proba(std::span<const double> patch) const;
  std::vector<double> predict_proba(const FeatureMatrix& patches, std::size_t threads = 1) const;
  friend bool operator==(const ConvNetModel&, const ConvNetModel&) = default;
};

// All-zero parameters and identity standardization.
ConvNetModel zero_convnet();
// He-normal weights, zero biases.
ConvNetModel init_convnet(std::uint64_t seed);

// Mean class-weighted cross-entropy over standardized patches plus
// 0.5 * l2 * |weights|^2 (biases not penalized). Fills `gradient` when non-null.
double convnet_objective(std::span<const double> params, std::span<const double> patches,
                         std::span<const std::uint8_t> labels, double positive_weight, double l2,
                         std::vector<double>* gradient);

// Mini-batch SGD with momentum. Throws TrainingError unless both classes are
// present and DomainError unless rows are 27 x 8 patches.
ConvNetModel train_convnet(const FeatureMatrix& patches, const TrainConfig& config, TrainingLog* log = nullptr);

} // namespace shotlog
