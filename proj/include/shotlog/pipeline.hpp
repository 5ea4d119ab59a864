#pragma once

#include "shotlog/detector.hpp"
#include "shotlog/eval_metrics.hpp"
#include "shotlog/features.hpp"
#include "shotlog/model_file.hpp"
#include "shotlog/scene_synth.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace shotlog {

inline constexpr std::string_view kManifestName = "manifest.csv";

// Renders every scene of `spec` into `out_dir` (scene_NNNN.wav + .jsonl) and
// writes the manifest. Scene i uses seed derive_seed(spec.seed, i) and starts
// i * duration after the configured start time. Pools must be resolved.
std::vector<ManifestRow> synthesize_dataset(const SceneSpecFile& spec, const std::filesystem::path& out_dir,
                                            std::size_t threads = 1);

// Start timestamp of scene `index`, keeping the base's offset style.
std::string scene_start_time(const std::string& base, std::size_t index, double duration_s);

enum class Split { train, validation, test };

std::string_view to_string(Split split) noexcept;

// Seeded shuffle of scene indices, then 70/15/15 by scene.
std::vector<Split> split_scenes(std::size_t n_scenes, std::uint64_t seed);

// One scene with everything the models need, aligned window by window.
struct SceneData {
  ManifestRow row;
  double duration_s = 0.0;
  std::vector<EventAnnotation> annotations;
  WindowLabeling labeling;
  FeatureMatrix level_features;
  Spectrogram spectrogram;

  FeatureMatrix patches() const;
};

SceneData analyze_scene(const AudioClip& clip, std::vector<EventAnnotation> annotations, ManifestRow row = {});
SceneData load_scene(const std::filesystem::path& data_dir, const ManifestRow& row);
std::vector<SceneData> load_dataset(const std::filesystem::path& data_dir, std::size_t threads = 1);

struct PartitionedData {
  std::vector<const SceneData*> train, validation, test;
};

PartitionedData partition(const std::vector<SceneData>& scenes, std::uint64_t seed);

// Model input rows (level features or spectrogram patches) of the scenes.
FeatureMatrix model_inputs(ModelKind kind, std::span<const SceneData* const> scenes);

// Per-window probabilities of one scene.
std::vector<double> predict_scene(const ModelContainer& model, const SceneData& scene, std::size_t threads = 1);
WindowScores score_scenes(const ModelContainer& model, std::span<const SceneData* const> scenes,
                          std::size_t threads = 1);

struct TrainResult {
  ModelContainer model;
  TrainingLog log;
  BinaryMetrics validation;
  Metric validation_ap;
};

// Fits on the training scenes and picks the F1-optimal threshold on the
// validation scenes.
TrainResult train_model(ModelKind kind, const TrainConfig& config, std::span<const SceneData* const> train,
                        std::span<const SceneData* const> validation);

// Event decoding always uses the model's stored threshold in place of
// decode.threshold.
struct EventEval {
  EventScore score;
  std::size_t n_detected = 0;
  std::size_t n_reference = 0;
};

EventEval evaluate_events(const ModelContainer& model, std::span<const SceneData* const> scenes,
                          const DecodeOptions& decode, double collar_s, std::size_t threads = 1);

struct EvalReport {
  std::string model_name;
  BinaryMetrics window;
  Metric average_precision;
  DetCurve det;
  EventScore events;
};

EvalReport evaluate_model(const ModelContainer& model, std::span<const SceneData* const> scenes,
                          const DecodeOptions& decode, double collar_s, std::size_t threads = 1);

// Scores every window with its own training label (threshold 0.5).
EvalReport evaluate_oracle(std::span<const SceneData* const> scenes, const DecodeOptions& decode, double collar_s);

nlohmann::json to_json(const EvalReport& report);

// Detected count on `test` corrected with insertion/deletion rates measured
// on `validation` at the same operating point.
struct CountCheck {
  std::size_t true_count = 0;
  std::size_t detected_count = 0;
  EventScore validation_events;
  AnnualEstimate estimate;
};

CountCheck check_event_count(const ModelContainer& model, std::span<const SceneData* const> validation,
                             std::span<const SceneData* const> test, const DecodeOptions& decode, double collar_s,
                             std::size_t threads = 1);

} // namespace shotlog
