#include "shotlog/model_file.hpp"

#include "shotlog/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace shotlog {

using nlohmann::ordered_json;

ModelKind kind_of(const AnyModel& model) noexcept {
  return static_cast<ModelKind>(model.index());
}

namespace {

ordered_json config_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["l2"] = c.l2;
  j["class_weight"] = c.class_weight ? ordered_json(*c.class_weight) : ordered_json(nullptr);
  j["momentum"] = c.momentum;
  j["seed"] = c.seed;
  j["n_trees"] = c.n_trees;
  j["max_depth"] = c.max_depth;
  j["features_per_split"] = c.features_per_split;
  j["min_samples_leaf"] = c.min_samples_leaf;
  return j;
}

TrainConfig config_from(const ordered_json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.l2 = j.at("l2").get<double>();
  if (!j.at("class_weight").is_null()) c.class_weight = j.at("class_weight").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_trees = j.at("n_trees").get<std::size_t>();
  c.max_depth = j.at("max_depth").get<std::size_t>();
  c.features_per_split = j.at("features_per_split").get<std::size_t>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  return c;
}

ordered_json standardization_json(const Standardization& s) {
  return ordered_json{{"mean", s.mean}, {"std", s.std}};
}

Standardization standardization_from(const ordered_json& j) {
  Standardization s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.std.size()) throw FormatError("standardization mean/std lengths differ");
  for (double v : s.std)
    if (!(v > 0.0)) throw FormatError("standardization std must be positive");
  return s;
}

} // namespace

std::string serialize_model(const ModelContainer& c) {
  ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["kind"] = to_string(c.kind());
  j["threshold"] = c.threshold;
  j["train_config"] = config_json(c.train_config);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogisticModel>) {
          j["standardization"] = standardization_json(m.standardization);
          j["params"] = {{"weights", m.weights}, {"bias", m.bias}};
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          j["standardization"] = nullptr;
          ordered_json trees = ordered_json::array();
          for (const auto& t : m.trees)
            trees.push_back({{"feature", t.feature},
                             {"threshold", t.threshold},
                             {"left", t.left},
                             {"right", t.right},
                             {"value", t.value}});
          j["params"] = {{"dim", m.dim}, {"tree_seeds", m.tree_seeds}, {"trees", trees}};
        } else {
          j["standardization"] = standardization_json(m.standardization);
          j["params"] = {{"architecture", "c16-p-c32-p-f64-f32-f1"}, {"values", m.params}};
        }
      },
      c.model);
  return j.dump(1) + "\n";
}

ModelContainer deserialize_model(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    if (!j.is_object() || j.value("format", "") != kModelFormat) throw FormatError("not a shotlog model file");
    if (j.at("version").get<int>() != kModelVersion)
      throw FormatError(fmt::format("unsupported model version {}", j.at("version").dump()));
    ModelContainer c;
    c.threshold = j.at("threshold").get<double>();
    c.train_config = config_from(j.at("train_config"));
    const auto& p = j.at("params");
    switch (parse_model_kind(j.at("kind").get<std::string>())) {
    case ModelKind::logistic: {
      LogisticModel m;
      m.weights = p.at("weights").get<std::vector<double>>();
      m.bias = p.at("bias").get<double>();
      m.standardization = standardization_from(j.at("standardization"));
      if (m.standardization.dim() != m.weights.size()) throw FormatError("standardization width mismatch");
      c.model = std::move(m);
      break;
    }
    case ModelKind::forest: {
      ForestModel m;
      m.dim = p.at("dim").get<std::size_t>();
      m.tree_seeds = p.at("tree_seeds").get<std::vector<std::uint64_t>>();
      for (const auto& t : p.at("trees")) {
        DecisionTree tree;
        tree.feature = t.at("feature").get<std::vector<int>>();
        tree.threshold = t.at("threshold").get<std::vector<double>>();
        tree.left = t.at("left").get<std::vector<std::int32_t>>();
        tree.right = t.at("right").get<std::vector<std::int32_t>>();
        tree.value = t.at("value").get<std::vector<double>>();
        const auto n = tree.feature.size();
        if (n == 0 || tree.threshold.size() != n || tree.left.size() != n || tree.right.size() != n ||
            tree.value.size() != n)
          throw FormatError("inconsistent tree arrays");
        for (std::size_t k = 0; k < n; ++k)
          if (tree.feature[k] >= 0 &&
              (tree.feature[k] >= static_cast<int>(m.dim) || tree.left[k] <= static_cast<std::int32_t>(k) ||
               tree.right[k] <= static_cast<std::int32_t>(k) || tree.left[k] >= static_cast<std::int32_t>(n) ||
               tree.right[k] >= static_cast<std::int32_t>(n)))
            throw FormatError("malformed tree node");
        m.trees.push_back(std::move(tree));
      }
      if (m.trees.empty()) throw FormatError("forest has no trees");
      c.model = std::move(m);
      break;
    }
    case ModelKind::cnn: {
      ConvNetModel m;
      m.params = p.at("values").get<std::vector<double>>();
      if (m.params.size() != ConvNetModel::parameter_count()) throw FormatError("convnet parameter count mismatch");
      m.standardization = standardization_from(j.at("standardization"));
      if (m.standardization.dim() != kPatchBands) throw FormatError("standardization width mismatch");
      c.model = std::move(m);
      break;
    }
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed model file: {}", e.what()));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

void save_model(const ModelContainer& container, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(container));
}

ModelContainer load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open model file {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

} // namespace shotlog
