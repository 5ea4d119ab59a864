#include "shotlog/convnet.hpp"
#include "shotlog/error.hpp"
#include "shotlog/forest.hpp"
#include "shotlog/logistic.hpp"
#include "shotlog/model_file.hpp"
#include "gradient_check.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

using namespace shotlog;

namespace {

FeatureMatrix gaussian_blobs(std::size_t n, std::size_t dim, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureMatrix m;
  m.dim = dim;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = i % 3 == 0;
    m.labels.push_back(y);
    for (std::size_t j = 0; j < dim; ++j) m.values.push_back(noise(rng) + (y ? separation : 0.0) * (j + 1) * 0.5);
  }
  return m;
}

// Impulse-like patches (broadband burst in the middle frames) vs. smooth noise.
FeatureMatrix toy_patches(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::uniform_int_distribution<int> at(1, 6);
  FeatureMatrix m;
  m.dim = kPatchSize;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = i % 2;
    m.labels.push_back(y);
    const int t0 = at(rng);
    for (std::size_t b = 0; b < kPatchBands; ++b)
      for (std::size_t t = 0; t < kPatchFrames; ++t) {
        double v = -60.0 + noise(rng);
        if (y && (static_cast<int>(t) == t0 || static_cast<int>(t) == t0 + 1) && b > 8) v += 15.0;
        m.values.push_back(v);
      }
  }
  return m;
}

double accuracy(const std::vector<double>& p, const std::vector<std::uint8_t>& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += (p[i] >= 0.5) == (y[i] == 1);
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

} // namespace

TEST_CASE("model kinds") {
  CHECK(parse_model_kind("cnn") == ModelKind::cnn);
  CHECK(to_string(ModelKind::forest) == "forest");
  try {
    parse_model_kind("svm");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("logistic, forest, cnn") != std::string::npos);
  }
  TrainConfig c;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("logistic regression") {
  SUBCASE("zero weights predict 0.5") {
    const auto m = zero_logistic(5);
    CHECK(m.predict_proba(std::vector<double>{1, -2, 3, 4, 5}) == 0.5);
  }
  SUBCASE("separable two-point set") {
    FeatureMatrix d;
    d.dim = 1;
    d.values = {-1.0, 1.0};
    d.labels = {0, 1};
    auto c = default_train_config(ModelKind::logistic);
    c.l2 = 0.0;
    TrainingLog log;
    const auto m = train_logistic(d, c, &log);
    CHECK(accuracy(m.predict_proba(d), d.labels) == 1.0);
    CHECK(log.loss.back() <= log.loss.front());
  }
  SUBCASE("analytic gradient matches central differences") {
    CHECK(shotlog::testing::logistic_gradient_error(3) < 1e-6);
  }
  SUBCASE("training lowers the loss and is deterministic") {
    const auto d = gaussian_blobs(300, 5, 1.5, 7);
    TrainingLog log;
    const auto a = train_logistic(d, default_train_config(ModelKind::logistic), &log);
    const auto b = train_logistic(d, default_train_config(ModelKind::logistic));
    CHECK(a == b);
    CHECK(log.loss.back() < log.loss.front());
    for (std::size_t i = 1; i < log.loss.size(); ++i) CHECK(log.loss[i] <= log.loss[i - 1]);
    CHECK(accuracy(a.predict_proba(d), d.labels) > 0.85);
  }
  SUBCASE("monotone in a feature with positive weight") {
    auto m = zero_logistic(5);
    m.weights[0] = 0.8;
    CHECK(m.predict_proba(std::vector<double>{2, 0, 0, 0, 0}) > m.predict_proba(std::vector<double>{1, 0, 0, 0, 0}));
  }
  SUBCASE("errors") {
    auto d = gaussian_blobs(10, 5, 1.0, 1);
    std::fill(d.labels.begin(), d.labels.end(), 0);
    CHECK_THROWS_AS(train_logistic(d, default_train_config(ModelKind::logistic)), TrainingError);
    CHECK_THROWS_AS(zero_logistic(5).predict_proba(std::vector<double>{1, 2}), DomainError);
  }
}

TEST_CASE("decision trees and forests") {
  SUBCASE("a pure training set gives certain predictions") {
    auto d = gaussian_blobs(50, 5, 1.0, 2);
    std::fill(d.labels.begin(), d.labels.end(), 1);
    const auto f = train_forest(d, default_train_config(ModelKind::forest));
    for (std::size_t i = 0; i < d.rows(); ++i) CHECK(f.predict_proba(d.row(i)) == 1.0);
    for (const auto& t : f.trees) CHECK(t.node_count() == 1);
  }
  SUBCASE("depth-1 tree recovers a 1-D threshold") {
    std::vector<double> x;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 20; ++i) {
      x.push_back(i);
      y.push_back(i >= 13);
    }
    std::vector<std::size_t> all(20);
    std::iota(all.begin(), all.end(), 0);
    const auto t = fit_tree(x, 1, y, all, {1, 1, 1}, 0);
    REQUIRE(t.node_count() == 3);
    CHECK(t.threshold[0] >= 12.0);
    CHECK(t.threshold[0] <= 13.0);
    CHECK(t.predict(std::vector<double>{12.0}) == 0.0);
    CHECK(t.predict(std::vector<double>{13.0}) == 1.0);
  }
  SUBCASE("root split is the exhaustive Gini optimum") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 25, dim = 3;
      std::vector<double> x(n * dim);
      std::vector<std::uint8_t> y(n);
      for (auto& v : x) v = std::round(u(rng) * 10.0);
      for (std::size_t i = 0; i < n; ++i) y[i] = u(rng) < 0.3 + 0.4 * x[i * dim + 1] / 10.0;
      if (std::count(y.begin(), y.end(), 1) == 0) continue;
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), 0);
      const auto t = fit_tree(x, dim, y, all, {1, dim, 1}, trial);
      auto weighted_gini = [&](std::size_t f, double thr) {
        double nl = 0, pl = 0, nr = 0, pr = 0;
        for (std::size_t i = 0; i < n; ++i)
          (x[i * dim + f] <= thr ? (nl += 1, pl += y[i]) : (nr += 1, pr += y[i]));
        if (nl == 0 || nr == 0) return std::numeric_limits<double>::infinity();
        return nl * (pl / nl) * (1 - pl / nl) + nr * (pr / nr) * (1 - pr / nr);
      };
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t f = 0; f < dim; ++f)
        for (double thr = -0.5; thr <= 10.5; thr += 1.0) best = std::min(best, weighted_gini(f, thr));
      if (t.node_count() == 1) continue; // pure node
      CHECK(weighted_gini(static_cast<std::size_t>(t.feature[0]), t.threshold[0]) == doctest::Approx(best));
    }
  }
  SUBCASE("forest mean, determinism, bounds") {
    const auto d = gaussian_blobs(400, 5, 1.5, 4);
    auto c = default_train_config(ModelKind::forest);
    c.n_trees = 3;
    const auto f = train_forest(d, c);
    for (std::size_t i = 0; i < 20; ++i) {
      const auto r = d.row(i);
      CHECK(f.predict_proba(r) ==
            doctest::Approx((f.trees[0].predict(r) + f.trees[1].predict(r) + f.trees[2].predict(r)) / 3.0));
    }
    c.n_trees = 20;
    const auto a = train_forest(d, c);
    CHECK(a == train_forest(d, c));
    c.threads = 3;
    CHECK(a == train_forest(d, c));
    c.seed = 99;
    CHECK(!(a.trees == train_forest(d, c).trees));
    for (const auto& t : a.trees) {
      CHECK(t.depth() <= 12);
      for (double v : t.value) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    CHECK(accuracy(a.predict_proba(d), d.labels) > 0.9);
    CHECK_THROWS_AS(a.predict_proba(std::vector<double>{1.0}), DomainError);
  }
}

TEST_CASE("convnet") {
  SUBCASE("shapes and parameter count") {
    CHECK(ConvNetModel::parameter_count() == 160 + 4640 + 24640 + 2080 + 33);
    std::size_t total = 0;
    for (const auto& b : ConvNetModel::blocks()) {
      CHECK(b.offset == total);
      total += b.size;
    }
    CHECK(total == ConvNetModel::parameter_count());
  }
  SUBCASE("zero model on zero input gives 0.5") {
    CHECK(zero_convnet().predict_proba(std::vector<double>(kPatchSize, 0.0)) == 0.5);
  }
  SUBCASE("backprop matches central differences in every layer") {
    const auto worst = shotlog::testing::convnet_gradient_error(5);
    CHECK(worst.size() == 10);
    for (const auto& [name, err] : worst) {
      CAPTURE(name);
      CHECK(err < 1e-5);
    }
  }
  SUBCASE("learns a toy impulse task") {
    const auto d = toy_patches(200, 6);
    auto c = default_train_config(ModelKind::cnn);
    c.epochs = 50;
    c.batch_size = 16;
    TrainingLog log;
    const auto m = train_convnet(d, c, &log);
    for (std::size_t e = 1; e < 5; ++e) CHECK(log.loss[e] < log.loss[e - 1]);
    CHECK(accuracy(m.predict_proba(d), d.labels) >= 0.95);
    CHECK(accuracy(m.predict_proba(toy_patches(200, 7)), toy_patches(200, 7).labels) >= 0.9);
  }
  SUBCASE("determinism and batch independence") {
    const auto d = toy_patches(64, 8);
    auto c = default_train_config(ModelKind::cnn);
    c.epochs = 2;
    const auto a = train_convnet(d, c);
    CHECK(a == train_convnet(d, c));
    c.threads = 3;
    CHECK(a == train_convnet(d, c));
    const auto batch = a.predict_proba(d, 2);
    for (std::size_t i = 0; i < d.rows(); ++i) CHECK(batch[i] == a.predict_proba(d.row(i)));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(zero_convnet().predict_proba(std::vector<double>(10, 0.0)), DomainError);
    FeatureMatrix wrong;
    wrong.dim = 5;
    wrong.values.assign(10, 0.0);
    wrong.labels = {0, 1};
    CHECK_THROWS_AS(train_convnet(wrong, default_train_config(ModelKind::cnn)), DomainError);
    auto one_class = toy_patches(10, 1);
    std::fill(one_class.labels.begin(), one_class.labels.end(), 0);
    CHECK_THROWS_AS(train_convnet(one_class, default_train_config(ModelKind::cnn)), TrainingError);
  }
  SUBCASE("spectrogram patches line up with windows") {
    Spectrogram s;
    for (std::size_t f = 0; f < 20; ++f)
      for (std::size_t b = 0; b < kBandCount; ++b) s.cells_db.push_back(100.0 * f + b);
    WindowLabeling w;
    w.labels.assign(13, 0);
    const auto p = spectrogram_patches(s, w);
    CHECK(p.rows() == 13);
    CHECK(p.row(4)[3 * kPatchFrames + 2] == 100.0 * 6 + 3);
    w.labels.assign(12, 0);
    CHECK_THROWS_AS(spectrogram_patches(s, w), AlignmentError);
  }
}

TEST_CASE("model files round trip bit-exactly") {
  shotlog::testing::TempDir dir;
  const auto feats = gaussian_blobs(200, 5, 1.5, 11);
  const auto patches = toy_patches(32, 12);
  auto ccfg = default_train_config(ModelKind::cnn);
  ccfg.epochs = 1;
  auto fcfg = default_train_config(ModelKind::forest);
  fcfg.n_trees = 5;
  fcfg.class_weight = 2.5;
  const std::vector<ModelContainer> models{
      {train_logistic(feats, default_train_config(ModelKind::logistic)), 0.4375,
       default_train_config(ModelKind::logistic)},
      {train_forest(feats, fcfg), 0.61, fcfg},
      {train_convnet(patches, ccfg), 1.0 / 3.0, ccfg}};
  for (const auto& m : models) {
    CAPTURE(to_string(m.kind()));
    const auto path = dir / (std::string(to_string(m.kind())) + ".json");
    save_model(m, path);
    const auto back = load_model(path);
    CHECK(back == m);
    CHECK(serialize_model(back) == serialize_model(m));
    const auto& data = m.kind() == ModelKind::cnn ? patches : feats;
    std::visit(
        [&](const auto& a) {
          const auto& b = std::get<std::decay_t<decltype(a)>>(back.model);
          for (std::size_t i = 0; i < data.rows(); ++i) REQUIRE(a.predict_proba(data.row(i)) == b.predict_proba(data.row(i)));
        },
        m.model);
  }
  CHECK_THROWS_AS(deserialize_model("{\"format\": \"other\"}"), FormatError);
  CHECK_THROWS_AS(deserialize_model("not json"), FormatError);
  auto text = serialize_model(models[0]);
  text.replace(text.find("\"version\": 1"), 12, "\"version\": 9");
  CHECK_THROWS_AS(deserialize_model(text), FormatError);
  CHECK_THROWS_AS(load_model(dir / "missing.json"), IoError);
}
