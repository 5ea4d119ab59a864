#pragma once

#include "shotlog/convnet.hpp"
#include "shotlog/forest.hpp"
#include "shotlog/logistic.hpp"
#include "shotlog/models.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

namespace shotlog {

using AnyModel = std::variant<LogisticModel, ForestModel, ConvNetModel>;

ModelKind kind_of(const AnyModel& model) noexcept;

// Versioned JSON container. Doubles are written in shortest round-trip form,
// so loading reproduces predictions bit for bit.
struct ModelContainer {
  AnyModel model;
  double threshold = 0.5;
  TrainConfig train_config;

  ModelKind kind() const noexcept { return kind_of(model); }
  friend bool operator==(const ModelContainer&, const ModelContainer&) = default;
};

inline constexpr std::string_view kModelFormat = "shotlog-model";
inline constexpr int kModelVersion = 1;

std::string serialize_model(const ModelContainer& container);
// Throws FormatError on a foreign or malformed document.
ModelContainer deserialize_model(std::string_view text);

void save_model(const ModelContainer& container, const std::filesystem::path& path);
ModelContainer load_model(const std::filesystem::path& path);

} // namespace shotlog
