#include "shotlog/pipeline.hpp"

#include "parallel.hpp"
#include "shotlog/error.hpp"
#include "shotlog/seed.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace shotlog {

namespace {

constexpr std::uint64_t kSplitStream = 0x5B117;

bool has_offset_suffix(const std::string& s) {
  if (!s.empty() && s.back() == 'Z') return true;
  return s.size() > 6 && (s[s.size() - 6] == '+' || s[s.size() - 6] == '-') && s[s.size() - 3] == ':';
}

template <class Fn>
decltype(auto) with_alignment_context(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const DomainError& e) {
    throw AlignmentError(fmt::format("{}: {}", what, e.what()));
  }
}

} // namespace

std::string scene_start_time(const std::string& base, std::size_t index, double duration_s) {
  const TimeZone utc = TimeZone::utc();
  const UnixSeconds t = parse_iso8601(base, utc) + static_cast<double>(index) * duration_s;
  std::string out = format_iso8601(t, utc);
  if (!has_offset_suffix(base)) out.resize(out.size() - 6);
  return out;
}

std::vector<ManifestRow> synthesize_dataset(const SceneSpecFile& file, const std::filesystem::path& out_dir,
                                            std::size_t threads) {
  file.spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError(fmt::format("cannot create output directory {}: {}", out_dir.string(), ec.message()));
  std::vector<ManifestRow> rows(file.n_scenes);
  detail::parallel_for(file.n_scenes, threads, [&](std::size_t i) {
    SceneSpec spec = file.spec;
    spec.seed = derive_seed(file.spec.seed, i);
    const SceneInstance scene = synthesize(spec);
    ManifestRow& r = rows[i];
    r.scene_id = fmt::format("scene_{:04}", i);
    r.audio_file = r.scene_id + ".wav";
    r.annotation_file = r.scene_id + ".jsonl";
    r.seed = spec.seed;
    for (const auto& a : scene.annotations) ++(a.label == EventLabel::gunshot ? r.n_gunshots : r.n_explosions);
    r.start_time = scene_start_time(file.start_time, i, spec.duration_s);
    write_wav(scene.mixture, out_dir / r.audio_file);
    write_annotations(scene.annotations, out_dir / r.annotation_file);
  });
  write_file_atomic(out_dir / kManifestName, format_manifest(rows));
  return rows;
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
  case Split::train: return "train";
  case Split::validation: return "validation";
  case Split::test: return "test";
  }
  return "train";
}

std::vector<Split> split_scenes(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, kSplitStream));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
  std::vector<Split> out(n, Split::test);
  for (std::size_t k = 0; k < n; ++k)
    out[order[k]] = k < n_train ? Split::train : (k < n_train + n_val ? Split::validation : Split::test);
  return out;
}

FeatureMatrix SceneData::patches() const { return spectrogram_patches(spectrogram, labeling); }

SceneData analyze_scene(const AudioClip& clip, std::vector<EventAnnotation> annotations, ManifestRow row) {
  SceneData s;
  s.row = std::move(row);
  s.duration_s = clip.duration_s();
  s.annotations = std::move(annotations);
  s.labeling = annotations_to_window_labels(s.annotations, s.duration_s);
  s.level_features = featurize_dataset(level_series(clip), s.labeling);
  s.spectrogram = third_octave_spectrogram(clip);
  if (s.spectrogram.n_frames() != s.labeling.size() + kWindowFrames - 1 && s.labeling.size() > 0)
    throw AlignmentError(fmt::format("spectrogram has {} frames for {} windows", s.spectrogram.n_frames(),
                                     s.labeling.size()));
  return s;
}

SceneData load_scene(const std::filesystem::path& dir, const ManifestRow& row) {
  const AudioClip clip = read_wav(dir / row.audio_file);
  return analyze_scene(clip, read_annotations(dir / row.annotation_file), row);
}

std::vector<SceneData> load_dataset(const std::filesystem::path& dir, std::size_t threads) {
  const auto rows = read_manifest(dir / kManifestName);
  std::vector<SceneData> scenes(rows.size());
  detail::parallel_for(rows.size(), threads, [&](std::size_t i) { scenes[i] = load_scene(dir, rows[i]); });
  return scenes;
}

PartitionedData partition(const std::vector<SceneData>& scenes, std::uint64_t seed) {
  const auto split = split_scenes(scenes.size(), seed);
  PartitionedData p;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    (split[i] == Split::train ? p.train : split[i] == Split::validation ? p.validation : p.test).push_back(&scenes[i]);
  return p;
}

FeatureMatrix model_inputs(ModelKind kind, std::span<const SceneData* const> scenes) {
  FeatureMatrix m;
  m.dim = kind == ModelKind::cnn ? kPatchSize : kFeatureCount;
  for (const SceneData* s : scenes) m.append(kind == ModelKind::cnn ? s->patches() : s->level_features);
  return m;
}

std::vector<double> predict_scene(const ModelContainer& model, const SceneData& scene, std::size_t threads) {
  return with_alignment_context(fmt::format("scene '{}' does not fit the {} model", scene.row.scene_id,
                                            to_string(model.kind())),
                                [&]() -> std::vector<double> {
                                  return std::visit(
                                      [&](const auto& m) -> std::vector<double> {
                                        using M = std::decay_t<decltype(m)>;
                                        if constexpr (std::is_same_v<M, ConvNetModel>)
                                          return m.predict_proba(scene.patches(), threads);
                                        else
                                          return m.predict_proba(scene.level_features);
                                      },
                                      model.model);
                                });
}

WindowScores score_scenes(const ModelContainer& model, std::span<const SceneData* const> scenes,
                          std::size_t threads) {
  WindowScores s;
  for (const SceneData* scene : scenes) {
    const auto p = predict_scene(model, *scene, threads);
    s.probability.insert(s.probability.end(), p.begin(), p.end());
    s.label.insert(s.label.end(), scene->labeling.labels.begin(), scene->labeling.labels.end());
  }
  return s;
}

TrainResult train_model(ModelKind kind, const TrainConfig& config, std::span<const SceneData* const> train,
                        std::span<const SceneData* const> validation) {
  const FeatureMatrix data = model_inputs(kind, train);
  spdlog::info("training {} on {} windows ({} positive) from {} scenes", to_string(kind), data.rows(),
               std::count(data.labels.begin(), data.labels.end(), std::uint8_t{1}), train.size());
  TrainResult r;
  r.model.train_config = config;
  switch (kind) {
  case ModelKind::logistic: r.model.model = train_logistic(data, config, &r.log); break;
  case ModelKind::forest: r.model.model = train_forest(data, config); break;
  case ModelKind::cnn: r.model.model = train_convnet(data, config, &r.log); break;
  }
  const WindowScores val = score_scenes(r.model, validation, config.threads);
  const ThresholdChoice choice = select_threshold(val);
  r.model.threshold = choice.threshold;
  r.validation = choice.metrics;
  r.validation_ap = average_precision(val);
  return r;
}

EventEval evaluate_events(const ModelContainer& model, std::span<const SceneData* const> scenes,
                          const DecodeOptions& decode, double collar_s, std::size_t threads) {
  DecodeOptions d = decode;
  d.threshold = model.threshold;
  std::vector<EventScore> parts;
  EventEval e;
  for (const SceneData* s : scenes) {
    const auto events = decode_events(predict_scene(model, *s, threads), d);
    parts.push_back(event_metrics(s->annotations, events, collar_s));
    e.n_detected += events.size();
    e.n_reference += s->annotations.size();
  }
  e.score = combine(parts);
  e.score.collar_s = collar_s;
  return e;
}

namespace {

EvalReport evaluate_scores(std::string name, double threshold, const std::vector<std::vector<double>>& probabilities,
                           std::span<const SceneData* const> scenes, const DecodeOptions& decode, double collar_s) {
  EvalReport r;
  r.model_name = std::move(name);
  WindowScores s;
  DecodeOptions d = decode;
  d.threshold = threshold;
  std::vector<EventScore> parts;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& p = probabilities[i];
    const auto& labels = scenes[i]->labeling.labels;
    s.probability.insert(s.probability.end(), p.begin(), p.end());
    s.label.insert(s.label.end(), labels.begin(), labels.end());
    parts.push_back(event_metrics(scenes[i]->annotations, decode_events(p, d), collar_s));
  }
  r.window = window_f1(s, threshold);
  r.average_precision = average_precision(s);
  r.det = det_curve(s);
  r.events = combine(parts);
  r.events.collar_s = collar_s;
  return r;
}

} // namespace

EvalReport evaluate_model(const ModelContainer& model, std::span<const SceneData* const> scenes,
                          const DecodeOptions& decode, double collar_s, std::size_t threads) {
  std::vector<std::vector<double>> p;
  for (const SceneData* s : scenes) p.push_back(predict_scene(model, *s, threads));
  return evaluate_scores(std::string(to_string(model.kind())), model.threshold, p, scenes, decode, collar_s);
}

EvalReport evaluate_oracle(std::span<const SceneData* const> scenes, const DecodeOptions& decode, double collar_s) {
  std::vector<std::vector<double>> p;
  for (const SceneData* s : scenes) p.emplace_back(s->labeling.labels.begin(), s->labeling.labels.end());
  return evaluate_scores("oracle", 0.5, p, scenes, decode, collar_s);
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"model", r.model_name},
          {"window", to_json(r.window)},
          {"average_precision", r.average_precision ? nlohmann::json(*r.average_precision) : nlohmann::json(nullptr)},
          {"events", to_json(r.events)}};
}

CountCheck check_event_count(const ModelContainer& model, std::span<const SceneData* const> validation,
                             std::span<const SceneData* const> test, const DecodeOptions& decode, double collar_s,
                             std::size_t threads) {
  CountCheck c;
  c.validation_events = evaluate_events(model, validation, decode, collar_s, threads).score;
  const EventEval t = evaluate_events(model, test, decode, collar_s, threads);
  c.true_count = t.n_reference;
  c.detected_count = t.n_detected;
  const auto& v = c.validation_events;
  c.estimate = estimate_annual_counts(c.detected_count, v.deletion_rate.value_or(1.0), v.insertion_rate.value_or(0.0),
                                      v.n_reference, v.n_detected);
  return c;
}

} // namespace shotlog
