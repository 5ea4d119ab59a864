#include "shotlog/convnet.hpp"

#include "parallel.hpp"
#include "shotlog/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace shotlog {

namespace {

constexpr std::size_t H0 = kPatchBands, W0 = kPatchFrames;
constexpr std::size_t C1 = 16, C2 = 32;
constexpr std::size_t H1 = H0 / 2, W1 = W0 / 2; // after pool 1: 13 x 4
constexpr std::size_t H2 = H1 / 2, W2 = W1 / 2; // after pool 2: 6 x 2
constexpr std::size_t F0 = C2 * H2 * W2, F1 = 64, F2 = 32;

// Padded plane sizes for the 3x3 "same" convolutions.
constexpr std::size_t PH0 = H0 + 2, PW0 = W0 + 2;
constexpr std::size_t PH1 = H1 + 2, PW1 = W1 + 2;

constexpr std::size_t kConv1W = 0, kConv1B = kConv1W + C1 * 9;
constexpr std::size_t kConv2W = kConv1B + C1, kConv2B = kConv2W + C2 * C1 * 9;
constexpr std::size_t kFc1W = kConv2B + C2, kFc1B = kFc1W + F1 * F0;
constexpr std::size_t kFc2W = kFc1B + F1, kFc2B = kFc2W + F2 * F1;
constexpr std::size_t kFc3W = kFc2B + F2, kFc3B = kFc3W + F2;
constexpr std::size_t kParamCount = kFc3B + 1;

// Gradient accumulation is split into this many fixed chunks per batch and
// reduced in chunk order, so results do not depend on the thread count.
constexpr std::size_t kChunks = 4;

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Workspace {
  std::array<double, PH0 * PW0> in{};
  std::array<double, C1 * H0 * W0> a1{};
  std::array<std::uint16_t, C1 * H1 * W1> idx1{};
  std::array<double, C1 * PH1 * PW1> p1{};
  std::array<double, C2 * H1 * W1> a2{};
  std::array<std::uint16_t, F0> idx2{};
  std::array<double, F0> p2{};
  std::array<double, F1> h1{};
  std::array<double, F2> h2{};
  // Backward buffers.
  std::array<double, F0> dp2{};
  std::array<double, F1> dh1{};
  std::array<double, F2> dh2{};
  std::array<double, C2 * H1 * W1> da2{};
  std::array<double, C1 * PH1 * PW1> dp1{};
  std::array<double, C1 * H0 * W0> da1{};
};

double forward(const double* w, const double* patch, Workspace& ws) {
  for (std::size_t y = 0; y < H0; ++y)
    for (std::size_t x = 0; x < W0; ++x) ws.in[(y + 1) * PW0 + x + 1] = patch[y * W0 + x];

  for (std::size_t c = 0; c < C1; ++c) {
    double* out = &ws.a1[c * H0 * W0];
    std::fill(out, out + H0 * W0, w[kConv1B + c]);
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double k = w[kConv1W + c * 9 + ky * 3 + kx];
        const double* src = &ws.in[ky * PW0 + kx];
        for (std::size_t y = 0; y < H0; ++y)
          for (std::size_t x = 0; x < W0; ++x) out[y * W0 + x] += k * src[y * PW0 + x];
      }
    for (std::size_t i = 0; i < H0 * W0; ++i) out[i] = std::max(0.0, out[i]);
  }

  for (std::size_t c = 0; c < C1; ++c)
    for (std::size_t y = 0; y < H1; ++y)
      for (std::size_t x = 0; x < W1; ++x) {
        std::size_t best = c * H0 * W0 + (2 * y) * W0 + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t j = c * H0 * W0 + (2 * y + dy) * W0 + 2 * x + dx;
            if (ws.a1[j] > ws.a1[best]) best = j;
          }
        ws.idx1[(c * H1 + y) * W1 + x] = static_cast<std::uint16_t>(best);
        ws.p1[c * PH1 * PW1 + (y + 1) * PW1 + x + 1] = ws.a1[best];
      }

  for (std::size_t o = 0; o < C2; ++o) {
    double* out = &ws.a2[o * H1 * W1];
    std::fill(out, out + H1 * W1, w[kConv2B + o]);
    for (std::size_t i = 0; i < C1; ++i)
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const double k = w[kConv2W + (o * C1 + i) * 9 + ky * 3 + kx];
          const double* src = &ws.p1[i * PH1 * PW1 + ky * PW1 + kx];
          for (std::size_t y = 0; y < H1; ++y)
            for (std::size_t x = 0; x < W1; ++x) out[y * W1 + x] += k * src[y * PW1 + x];
        }
    for (std::size_t j = 0; j < H1 * W1; ++j) out[j] = std::max(0.0, out[j]);
  }

  for (std::size_t c = 0; c < C2; ++c)
    for (std::size_t y = 0; y < H2; ++y)
      for (std::size_t x = 0; x < W2; ++x) {
        std::size_t best = c * H1 * W1 + (2 * y) * W1 + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t j = c * H1 * W1 + (2 * y + dy) * W1 + 2 * x + dx;
            if (ws.a2[j] > ws.a2[best]) best = j;
          }
        const std::size_t k = (c * H2 + y) * W2 + x;
        ws.idx2[k] = static_cast<std::uint16_t>(best);
        ws.p2[k] = ws.a2[best];
      }

  for (std::size_t j = 0; j < F1; ++j) {
    const double* row = &w[kFc1W + j * F0];
    double s = w[kFc1B + j];
    for (std::size_t k = 0; k < F0; ++k) s += row[k] * ws.p2[k];
    ws.h1[j] = std::max(0.0, s);
  }
  for (std::size_t j = 0; j < F2; ++j) {
    const double* row = &w[kFc2W + j * F1];
    double s = w[kFc2B + j];
    for (std::size_t k = 0; k < F1; ++k) s += row[k] * ws.h1[k];
    ws.h2[j] = std::max(0.0, s);
  }
  double z = w[kFc3B];
  for (std::size_t k = 0; k < F2; ++k) z += w[kFc3W + k] * ws.h2[k];
  return z;
}

// Adds dLoss/dparams for one example to g, given dz = dLoss/dlogit.
void backward(const double* w, double dz, Workspace& ws, double* g) {
  for (std::size_t k = 0; k < F2; ++k) {
    g[kFc3W + k] += dz * ws.h2[k];
    ws.dh2[k] = ws.h2[k] > 0.0 ? dz * w[kFc3W + k] : 0.0;
  }
  g[kFc3B] += dz;

  std::fill(ws.dh1.begin(), ws.dh1.end(), 0.0);
  for (std::size_t j = 0; j < F2; ++j) {
    const double d = ws.dh2[j];
    if (d == 0.0) continue;
    g[kFc2B + j] += d;
    double* gr = &g[kFc2W + j * F1];
    const double* row = &w[kFc2W + j * F1];
    for (std::size_t k = 0; k < F1; ++k) {
      gr[k] += d * ws.h1[k];
      ws.dh1[k] += d * row[k];
    }
  }
  for (std::size_t k = 0; k < F1; ++k)
    if (ws.h1[k] <= 0.0) ws.dh1[k] = 0.0;

  std::fill(ws.dp2.begin(), ws.dp2.end(), 0.0);
  for (std::size_t j = 0; j < F1; ++j) {
    const double d = ws.dh1[j];
    if (d == 0.0) continue;
    g[kFc1B + j] += d;
    double* gr = &g[kFc1W + j * F0];
    const double* row = &w[kFc1W + j * F0];
    for (std::size_t k = 0; k < F0; ++k) {
      gr[k] += d * ws.p2[k];
      ws.dp2[k] += d * row[k];
    }
  }

  std::fill(ws.da2.begin(), ws.da2.end(), 0.0);
  for (std::size_t k = 0; k < F0; ++k) ws.da2[ws.idx2[k]] += ws.dp2[k];

  std::fill(ws.dp1.begin(), ws.dp1.end(), 0.0);
  for (std::size_t o = 0; o < C2; ++o)
    for (std::size_t y = 0; y < H1; ++y)
      for (std::size_t x = 0; x < W1; ++x) {
        const std::size_t j = (o * H1 + y) * W1 + x;
        const double d = ws.a2[j] > 0.0 ? ws.da2[j] : 0.0;
        if (d == 0.0) continue;
        g[kConv2B + o] += d;
        for (std::size_t i = 0; i < C1; ++i) {
          double* gk = &g[kConv2W + (o * C1 + i) * 9];
          const double* wk = &w[kConv2W + (o * C1 + i) * 9];
          const double* src = &ws.p1[i * PH1 * PW1 + y * PW1 + x];
          double* dsrc = &ws.dp1[i * PH1 * PW1 + y * PW1 + x];
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              gk[ky * 3 + kx] += d * src[ky * PW1 + kx];
              dsrc[ky * PW1 + kx] += d * wk[ky * 3 + kx];
            }
        }
      }

  std::fill(ws.da1.begin(), ws.da1.end(), 0.0);
  for (std::size_t c = 0; c < C1; ++c)
    for (std::size_t y = 0; y < H1; ++y)
      for (std::size_t x = 0; x < W1; ++x)
        ws.da1[ws.idx1[(c * H1 + y) * W1 + x]] += ws.dp1[c * PH1 * PW1 + (y + 1) * PW1 + x + 1];

  for (std::size_t c = 0; c < C1; ++c)
    for (std::size_t y = 0; y < H0; ++y)
      for (std::size_t x = 0; x < W0; ++x) {
        const std::size_t j = (c * H0 + y) * W0 + x;
        const double d = ws.a1[j] > 0.0 ? ws.da1[j] : 0.0;
        if (d == 0.0) continue;
        g[kConv1B + c] += d;
        const double* src = &ws.in[y * PW0 + x];
        double* gk = &g[kConv1W + c * 9];
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) gk[ky * 3 + kx] += d * src[ky * PW0 + kx];
      }
}

// Sum over `rows` of the weighted loss, gradient sum added into g.
double accumulate(const double* w, std::span<const double> patches, std::span<const std::uint8_t> labels,
                  std::span<const std::size_t> rows, double positive_weight, double* g, Workspace& ws) {
  double loss = 0.0;
  for (std::size_t r : rows) {
    const double z = forward(w, &patches[r * kPatchSize], ws);
    const double y = labels[r];
    const double wt = labels[r] ? positive_weight : 1.0;
    loss += wt * (softplus(z) - y * z);
    if (g) backward(w, wt * (sigmoid(z) - y), ws, g);
  }
  return loss;
}

double add_l2(std::span<const double> params, double l2, double* g) {
  double penalty = 0.0;
  for (const auto& b : ConvNetModel::blocks()) {
    if (!b.is_weight) continue;
    for (std::size_t k = b.offset; k < b.offset + b.size; ++k) {
      penalty += params[k] * params[k];
      if (g) g[k] += l2 * params[k];
    }
  }
  return 0.5 * l2 * penalty;
}

void check_patches(const FeatureMatrix& m) {
  if (m.dim != kPatchSize)
    throw DomainError(fmt::format("convnet expects {}x{} patches, got rows of {}", kPatchBands, kPatchFrames, m.dim));
}

} // namespace

FeatureMatrix spectrogram_patches(const Spectrogram& s, const WindowLabeling& labeling) {
  if (std::abs(s.hop_s - labeling.hop_s) > 1e-12) throw AlignmentError("spectrogram hop differs from window hop");
  const std::size_t windows = s.n_frames() >= kPatchFrames ? s.n_frames() - kPatchFrames + 1 : 0;
  if (windows != labeling.size())
    throw AlignmentError(fmt::format("{} spectrogram frames give {} windows but the labeling has {}", s.n_frames(),
                                     windows, labeling.size()));
  FeatureMatrix m;
  m.dim = kPatchSize;
  m.labels = labeling.labels;
  m.values.resize(windows * kPatchSize);
  for (std::size_t i = 0; i < windows; ++i)
    for (std::size_t b = 0; b < kPatchBands; ++b)
      for (std::size_t t = 0; t < kPatchFrames; ++t) m.values[i * kPatchSize + b * kPatchFrames + t] = s.at(i + t, b);
  return m;
}

std::size_t ConvNetModel::parameter_count() noexcept { return kParamCount; }

const std::array<ParameterBlock, 10>& ConvNetModel::blocks() noexcept {
  static const std::array<ParameterBlock, 10> b{{
      {"conv1.weight", kConv1W, C1 * 9, true},
      {"conv1.bias", kConv1B, C1, false},
      {"conv2.weight", kConv2W, C2 * C1 * 9, true},
      {"conv2.bias", kConv2B, C2, false},
      {"fc1.weight", kFc1W, F1 * F0, true},
      {"fc1.bias", kFc1B, F1, false},
      {"fc2.weight", kFc2W, F2 * F1, true},
      {"fc2.bias", kFc2B, F2, false},
      {"fc3.weight", kFc3W, F2, true},
      {"fc3.bias", kFc3B, 1, false},
  }};
  return b;
}

double ConvNetModel::logit(std::span<const double> patch) const {
  if (patch.size() != kPatchSize || params.size() != kParamCount)
    throw DomainError(fmt::format("convnet expects a {}-value patch", kPatchSize));
  Workspace ws;
  return forward(params.data(), patch.data(), ws);
}

double ConvNetModel::predict_proba(std::span<const double> patch) const {
  if (patch.size() != kPatchSize) throw DomainError(fmt::format("convnet expects a {}-value patch", kPatchSize));
  std::array<double, kPatchSize> z{};
  for (std::size_t b = 0; b < kPatchBands; ++b)
    for (std::size_t t = 0; t < kPatchFrames; ++t)
      z[b * kPatchFrames + t] = (patch[b * kPatchFrames + t] - standardization.mean[b]) / standardization.std[b];
  return sigmoid(logit(z));
}

std::vector<double> ConvNetModel::predict_proba(const FeatureMatrix& patches, std::size_t threads) const {
  check_patches(patches);
  std::vector<double> p(patches.rows());
  const std::size_t chunk = 256;
  const std::size_t n_chunks = (p.size() + chunk - 1) / chunk;
  detail::parallel_for(n_chunks, threads, [&](std::size_t c) {
    for (std::size_t i = c * chunk; i < std::min(p.size(), (c + 1) * chunk); ++i) p[i] = predict_proba(patches.row(i));
  });
  return p;
}

ConvNetModel zero_convnet() {
  ConvNetModel m;
  m.params.assign(kParamCount, 0.0);
  m.standardization.mean.assign(kPatchBands, 0.0);
  m.standardization.std.assign(kPatchBands, 1.0);
  return m;
}

ConvNetModel init_convnet(std::uint64_t seed) {
  ConvNetModel m = zero_convnet();
  std::mt19937_64 rng(seed);
  const std::array<std::pair<std::size_t, double>, 5> layers{{{kConv1W, 2.0 / 9.0},
                                                               {kConv2W, 2.0 / (9.0 * C1)},
                                                               {kFc1W, 2.0 / F0},
                                                               {kFc2W, 2.0 / F1},
                                                               {kFc3W, 1.0 / F2}}};
  for (const auto& b : ConvNetModel::blocks()) {
    if (!b.is_weight) continue;
    double var = 0.0;
    for (const auto& [off, v] : layers)
      if (off == b.offset) var = v;
    std::normal_distribution<double> dist(0.0, std::sqrt(var));
    for (std::size_t k = b.offset; k < b.offset + b.size; ++k) m.params[k] = dist(rng);
  }
  return m;
}

double convnet_objective(std::span<const double> params, std::span<const double> patches,
                         std::span<const std::uint8_t> labels, double positive_weight, double l2,
                         std::vector<double>* gradient) {
  if (params.size() != kParamCount || patches.size() != labels.size() * kPatchSize)
    throw DomainError("convnet objective: shape mismatch");
  if (gradient) gradient->assign(kParamCount, 0.0);
  std::vector<std::size_t> rows(labels.size());
  std::iota(rows.begin(), rows.end(), 0);
  Workspace ws;
  double loss =
      accumulate(params.data(), patches, labels, rows, positive_weight, gradient ? gradient->data() : nullptr, ws);
  const double inv = labels.empty() ? 0.0 : 1.0 / static_cast<double>(labels.size());
  loss *= inv;
  if (gradient)
    for (auto& v : *gradient) v *= inv;
  return loss + add_l2(params, l2, gradient ? gradient->data() : nullptr);
}

ConvNetModel train_convnet(const FeatureMatrix& data, const TrainConfig& config, TrainingLog* log) {
  config.validate();
  check_patches(data);
  const double pw = positive_class_weight(data.labels, config);
  const std::size_t n = data.rows();

  ConvNetModel m = init_convnet(config.seed);
  // Per-band statistics over every frame of every training patch.
  std::vector<double> sum(kPatchBands, 0.0), sq(kPatchBands, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < kPatchBands; ++b)
      for (std::size_t t = 0; t < kPatchFrames; ++t) sum[b] += data.values[i * kPatchSize + b * kPatchFrames + t];
  const double count = static_cast<double>(n * kPatchFrames);
  for (std::size_t b = 0; b < kPatchBands; ++b) m.standardization.mean[b] = sum[b] / count;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < kPatchBands; ++b)
      for (std::size_t t = 0; t < kPatchFrames; ++t) {
        const double d = data.values[i * kPatchSize + b * kPatchFrames + t] - m.standardization.mean[b];
        sq[b] += d * d;
      }
  for (std::size_t b = 0; b < kPatchBands; ++b) {
    const double sd = std::sqrt(sq[b] / count);
    m.standardization.std[b] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<double> x(data.values);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < kPatchBands; ++b)
      for (std::size_t t = 0; t < kPatchFrames; ++t) {
        auto& v = x[i * kPatchSize + b * kPatchFrames + t];
        v = (v - m.standardization.mean[b]) / m.standardization.std[b];
      }

  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> velocity(kParamCount, 0.0), grad(kParamCount);
  std::vector<std::vector<double>> chunk_grad(kChunks, std::vector<double>(kParamCount));
  std::vector<double> chunk_loss(kChunks);
  std::vector<Workspace> ws(kChunks);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::size_t len = end - start;
      detail::parallel_for(kChunks, config.threads, [&](std::size_t c) {
        const std::size_t a = start + len * c / kChunks, b = start + len * (c + 1) / kChunks;
        std::fill(chunk_grad[c].begin(), chunk_grad[c].end(), 0.0);
        chunk_loss[c] = accumulate(m.params.data(), x, data.labels, std::span(order).subspan(a, b - a), pw,
                                   chunk_grad[c].data(), ws[c]);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t c = 0; c < kChunks; ++c) {
        batch_loss += chunk_loss[c];
        for (std::size_t k = 0; k < kParamCount; ++k) grad[k] += chunk_grad[c][k];
      }
      const double inv = 1.0 / static_cast<double>(len);
      for (auto& v : grad) v *= inv;
      epoch_loss += batch_loss;
      add_l2(m.params, config.l2, grad.data());
      for (std::size_t k = 0; k < kParamCount; ++k) {
        velocity[k] = config.momentum * velocity[k] - config.learning_rate * grad[k];
        m.params[k] += velocity[k];
      }
    }
    if (log) log->loss.push_back(epoch_loss / static_cast<double>(n));
  }
  return m;
}

} // namespace shotlog
