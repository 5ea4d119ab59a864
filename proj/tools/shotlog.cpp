#include "shotlog/error.hpp"
#include "shotlog/pipeline.hpp"
#include "shotlog/seed.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace shotlog;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec ? ec.message() : "not a directory"));
  const fs::path probe = dir / ".shotlog-write-test";
  {
    std::ofstream out(probe);
    if (!out) throw IoError(fmt::format("output directory {} is not writable", dir.string()));
  }
  fs::remove(probe, ec);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("shotlog");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("SHOTLOG_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string_view(env) != "off")
      throw ConfigError(fmt::format("SHOTLOG_LOG='{}' is not a log level (trace, debug, info, warn, error, off)", env));
    spdlog::set_level(level);
  }
}

struct SynthOptions {
  std::string spec;
  std::string out;
  std::optional<std::size_t> n_scenes;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

int run_synth(const SynthOptions& o) {
  SceneSpecFile file;
  fs::path base = fs::current_path();
  if (!o.spec.empty()) {
    file = read_scene_spec(o.spec);
    base = fs::absolute(o.spec).parent_path();
  }
  if (o.seed) {
    file.spec.seed = *o.seed;
    file.seed_given = true;
  }
  if (!file.seed_given) throw ConfigError("synth needs a seed (--seed or `seed` in the scene spec)");
  if (o.n_scenes) file.n_scenes = *o.n_scenes;
  ensure_dir(o.out);
  resolve_pools(file, base);
  const auto rows = synthesize_dataset(file, o.out, o.threads);
  std::size_t gunshots = 0, explosions = 0;
  for (const auto& r : rows) {
    gunshots += r.n_gunshots;
    explosions += r.n_explosions;
  }
  fmt::print("wrote {} scenes to {} ({} gunshots, {} explosions)\n", rows.size(), o.out, gunshots, explosions);
  return 0;
}

struct TrainOptions {
  std::string data;
  std::string kind;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::string report;
  std::optional<double> learning_rate, l2, class_weight, momentum;
  std::optional<std::size_t> epochs, batch_size, n_trees, max_depth, features_per_split, min_samples_leaf;
  std::size_t threads = 1;
};

TrainConfig train_config(ModelKind kind, const TrainOptions& o) {
  TrainConfig c = default_train_config(kind);
  c.seed = *o.seed;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.l2) c.l2 = *o.l2;
  if (o.class_weight) c.class_weight = *o.class_weight;
  if (o.momentum) c.momentum = *o.momentum;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.n_trees) c.n_trees = *o.n_trees;
  if (o.max_depth) c.max_depth = *o.max_depth;
  if (o.features_per_split) c.features_per_split = *o.features_per_split;
  if (o.min_samples_leaf) c.min_samples_leaf = *o.min_samples_leaf;
  c.threads = o.threads;
  c.validate();
  return c;
}

nlohmann::json metric(const Metric& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

std::string show(const Metric& m) { return m ? fmt::format("{:.4f}", *m) : "n/a"; }

int run_train(const TrainOptions& o) {
  const ModelKind kind = parse_model_kind(o.kind);
  if (!o.seed) throw ConfigError("train needs --seed");
  const TrainConfig config = train_config(kind, o);
  const auto scenes = load_dataset(o.data, o.threads);
  const auto parts = partition(scenes, config.seed);
  if (parts.train.empty() || parts.validation.empty())
    throw ConfigError(fmt::format("dataset {} has too few scenes ({}) for a train/validation split", o.data,
                                  scenes.size()));
  TrainResult r = train_model(kind, config, parts.train, parts.validation);
  save_model(r.model, o.model);
  for (std::size_t e = 0; e < r.log.loss.size(); ++e) spdlog::debug("epoch {} loss {:.6f}", e + 1, r.log.loss[e]);
  fmt::print("kind {}  threshold {:.4f}\nvalidation  P {}  R {}  F1 {}  AP {}\n", to_string(kind), r.model.threshold,
             show(r.validation.precision), show(r.validation.recall), show(r.validation.f1),
             show(r.validation_ap));
  if (!r.log.loss.empty())
    fmt::print("loss first {:.6f}  last {:.6f}  ({} epochs)\n", r.log.loss.front(), r.log.loss.back(),
               r.log.loss.size());
  if (!o.report.empty())
    write_json(o.report, {{"kind", std::string(to_string(kind))},
                          {"threshold", r.model.threshold},
                          {"n_train_scenes", parts.train.size()},
                          {"n_validation_scenes", parts.validation.size()},
                          {"validation", to_json(r.validation)},
                          {"validation_average_precision", metric(r.validation_ap)},
                          {"loss", r.log.loss}});
  return 0;
}

struct DecodeFlags {
  double collar = kDefaultCollarSeconds;
  double min_gap = kDefaultMinGapSeconds;
  std::string anchor = "last_frame";
  std::optional<double> threshold;

  DecodeOptions options() const {
    DecodeOptions d;
    d.min_gap_s = min_gap;
    d.anchor = parse_onset_anchor(anchor);
    if (!(collar >= 0.0)) throw ConfigError("--collar must be non-negative");
    if (!(min_gap >= 0.0)) throw ConfigError("--min-gap must be non-negative");
    return d;
  }
  void apply(ModelContainer& m) const {
    if (!threshold) return;
    if (!(*threshold > 0.0 && *threshold < 1.0)) throw ConfigError("--threshold must lie in (0, 1)");
    m.threshold = *threshold;
  }
};

void add_decode_flags(CLI::App* cmd, DecodeFlags& f) {
  cmd->add_option("--collar", f.collar, "Onset collar for event matching, seconds")->capture_default_str();
  cmd->add_option("--min-gap", f.min_gap, "Runs closer than this merge, seconds")->capture_default_str();
  cmd->add_option("--anchor", f.anchor, "Onset anchor: last_frame or window_start")->capture_default_str();
  cmd->add_option("--threshold", f.threshold, "Override the model's stored decision threshold");
}

struct EvalOptions {
  std::string data;
  std::vector<std::string> models;
  std::string out;
  std::string split = "test";
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  DecodeFlags decode;
  std::size_t threads = 1;
};

int run_eval(const EvalOptions& o) {
  std::vector<ModelContainer> models;
  for (const auto& m : o.models) {
    models.push_back(load_model(m));
    o.decode.apply(models.back());
  }
  if (models.empty() && !o.oracle) throw ConfigError("eval needs at least one --model (or --oracle)");
  if (models.empty() && !o.seed) throw ConfigError("--oracle without a model needs --seed for the split");
  std::uint64_t seed = o.seed ? *o.seed : models.front().train_config.seed;
  if (!o.seed)
    for (const auto& m : models)
      if (m.train_config.seed != seed)
        throw ConfigError("models were trained with different split seeds; pass --seed to choose one");
  ensure_dir(o.out);
  const auto scenes = load_dataset(o.data, o.threads);
  const auto parts = partition(scenes, seed);
  std::vector<const SceneData*> chosen;
  if (o.split == "test") chosen = parts.test;
  else if (o.split == "validation") chosen = parts.validation;
  else if (o.split == "train") chosen = parts.train;
  else if (o.split == "all")
    for (const auto& s : scenes) chosen.push_back(&s);
  else throw ConfigError(fmt::format("unknown split '{}' (expected train, validation, test or all)", o.split));
  if (chosen.empty()) throw ConfigError(fmt::format("split '{}' is empty", o.split));

  const DecodeOptions decode = o.decode.options();
  nlohmann::json metrics{{"split", o.split}, {"n_scenes", chosen.size()}, {"models", nlohmann::json::array()}};
  nlohmann::json events{{"collar_s", o.decode.collar},
                        {"min_gap_s", o.decode.min_gap},
                        {"anchor", o.decode.anchor},
                        {"models", nlohmann::json::array()}};
  std::vector<MetricsRow> rows;
  std::vector<std::pair<std::string, DetCurve>> curves;
  std::map<std::string, int> seen;
  std::vector<EvalReport> reports;
  std::vector<double> thresholds;
  if (o.oracle) {
    reports.push_back(evaluate_oracle(chosen, decode, o.decode.collar));
    thresholds.push_back(0.5);
  }
  for (const auto& m : models) {
    reports.push_back(evaluate_model(m, chosen, decode, o.decode.collar, o.threads));
    thresholds.push_back(m.threshold);
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    EvalReport& r = reports[i];
    const double threshold = thresholds[i];
    std::string name = r.model_name;
    if (seen[name]++) name += fmt::format("_{}", seen[name]);
    metrics["models"].push_back({{"model", name},
                                 {"threshold", threshold},
                                 {"window", to_json(r.window)},
                                 {"average_precision", metric(r.average_precision)}});
    events["models"].push_back({{"model", name}, {"threshold", threshold}, {"events", to_json(r.events)}});
    write_file_atomic(fs::path(o.out) / fmt::format("det_{}.csv", name), format_det_csv(r.det));
    rows.push_back({name, r.window, r.average_precision, r.events});
    curves.emplace_back(name, std::move(r.det));
  }
  write_json(fs::path(o.out) / "metrics.json", metrics);
  write_json(fs::path(o.out) / "events.json", events);
  write_file_atomic(fs::path(o.out) / "det.svg", format_det_svg(curves));
  fmt::print("{}", format_metrics_table(rows));
  return 0;
}

struct LogbookFlags {
  std::string timezone;
  double session_gap = kDefaultSessionGapSeconds;
  std::string counters;
  std::string rates;
  std::optional<int> year;
};

void add_logbook_flags(CLI::App* cmd, LogbookFlags& f) {
  cmd->add_option("--timezone", f.timezone, "POSIX TZ rule, east-positive (e.g. CET+01CEST+01,M3.5.0,M10.5.0/03)")
      ->required();
  cmd->add_option("--session-gap", f.session_gap, "Events closer than this share a session, seconds")
      ->capture_default_str();
  cmd->add_option("--counters", f.counters, "Resume from a previous summary.json");
  cmd->add_option("--rates", f.rates, "events.json from eval; corrects the counts for insertions and deletions");
  cmd->add_option("--year", f.year, "Counter year (default: year of the first event)");
}

// Writes logbook.jsonl and summary.json for wall-clock events sorted by onset.
void write_logbook(std::vector<TimedEvent> events, const LogbookFlags& f, const TimeZone& zone, const fs::path& out) {
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.onset < b.onset; });
  if (!(f.session_gap >= 0.0)) throw ConfigError("--session-gap must be non-negative");
  const auto sessions = sessions_from_events(events, f.session_gap, zone);
  write_file_atomic(out / "logbook.jsonl", format_logbook_jsonl(sessions, zone));

  RegulatoryCounters counters;
  if (!f.counters.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(f.counters));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(fmt::format("{}: {}", f.counters, e.what()));
    }
    counters = counters_from_json(j.contains("counters") ? j["counters"] : j);
  } else if (f.year) {
    counters.year = *f.year;
  } else if (!events.empty()) {
    counters.year = zone.to_local(events.front().onset).year;
  } else {
    counters.year = zone.to_local(0.0).year;
  }
  if (f.year && *f.year != counters.year)
    throw ConfigError(fmt::format("--year {} disagrees with resumed counters of {}", *f.year, counters.year));
  const CounterUpdate update = update_counters(counters, events, zone);
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : update.raised)
    violations.push_back({{"label", std::string(to_string(v.label))}, {"at", format_iso8601(v.at, zone)}, {"count", v.count}});
  std::size_t out_of_hours_sessions = 0;
  for (const auto& s : sessions) out_of_hours_sessions += !s.within_permitted_hours;
  nlohmann::json summary{{"timezone", zone.rule()},
                         {"n_events", events.size()},
                         {"n_sessions", sessions.size()},
                         {"n_out_of_hours_sessions", out_of_hours_sessions},
                         {"counters", to_json(update.counters)},
                         {"violations_raised", violations}};
  if (!f.rates.empty()) {
    nlohmann::json r;
    try {
      r = nlohmann::json::parse(read_text(f.rates));
      const auto& ev = r.contains("models") ? r.at("models").at(0).at("events") : r;
      const auto ins = ev.at("insertion_rate"), del = ev.at("deletion_rate");
      if (ins.is_null() || del.is_null()) throw ConfigError(fmt::format("{} has undefined error rates", f.rates));
      const auto estimate =
          estimate_annual_counts(static_cast<std::uint64_t>(events.size()), del.get<double>(), ins.get<double>(),
                                 ev.at("n_reference").get<std::size_t>(), ev.at("n_detected").get<std::size_t>());
      summary["corrected_event_count"] = {{"detected", events.size()},
                                          {"corrected", metric(estimate.corrected)},
                                          {"lower_95", metric(estimate.lower)},
                                          {"upper_95", metric(estimate.upper)}};
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(fmt::format("{}: {}", f.rates, e.what()));
    }
  }
  write_json(out / "summary.json", summary);
  fmt::print("{} events in {} sessions ({} outside permitted hours); gunshots {} / {}, explosions {} / {}\n",
             events.size(), sessions.size(), out_of_hours_sessions, update.counters.gunshot_count,
             RegulatoryCounters::kGunshotLimit, update.counters.explosion_count, RegulatoryCounters::kExplosionLimit);
  for (const auto& v : update.raised)
    spdlog::warn("{} limit exceeded at {} (count {})", to_string(v.label), format_iso8601(v.at, zone), v.count);
}

struct DetectOptions {
  std::string model;
  std::string manifest;
  std::vector<std::string> only;
  std::string out;
  DecodeFlags decode;
  LogbookFlags logbook;
  std::size_t threads = 1;
};

int run_detect(const DetectOptions& o) {
  const TimeZone zone(o.logbook.timezone);
  ModelContainer model = load_model(o.model);
  o.decode.apply(model);
  const auto rows = read_manifest(o.manifest);
  const fs::path base = fs::absolute(o.manifest).parent_path();
  for (const auto& r : rows)
    if (r.start_time.empty())
      throw ValidationError(fmt::format("manifest row '{}' has no start_time", r.scene_id));
  ensure_dir(o.out);
  DecodeOptions decode = o.decode.options();
  decode.threshold = model.threshold;

  std::vector<TimedEvent> all;
  std::string detections;
  for (const auto& r : rows) {
    if (!o.only.empty() && std::find(o.only.begin(), o.only.end(), r.audio_file) == o.only.end()) continue;
    const UnixSeconds start = parse_iso8601(r.start_time, zone);
    const AudioClip clip = read_wav(base / r.audio_file);
    std::vector<EventAnnotation> reference;
    if (!r.annotation_file.empty() && fs::exists(base / r.annotation_file))
      reference = read_annotations(base / r.annotation_file);
    const SceneData scene = analyze_scene(clip, reference, r);
    const auto events = decode_events(predict_scene(model, scene, o.threads), decode);
    const auto labels = attribute_classes(events, reference, o.decode.collar);
    const auto timed = anchor_events(events, labels, start, r.audio_file);
    detections += format_detections_jsonl(timed, events, zone);
    all.insert(all.end(), timed.begin(), timed.end());
    spdlog::debug("{}: {} detections", r.audio_file, events.size());
  }
  write_file_atomic(fs::path(o.out) / "detections.jsonl", detections);
  write_logbook(std::move(all), o.logbook, zone, o.out);
  return 0;
}

struct LogbookOptions {
  std::vector<std::string> detections;
  std::string out;
  LogbookFlags logbook;
};

int run_logbook(const LogbookOptions& o) {
  const TimeZone zone(o.logbook.timezone);
  std::vector<TimedEvent> all;
  for (const auto& path : o.detections) {
    auto events = parse_detections_jsonl(read_text(path), zone);
    all.insert(all.end(), events.begin(), events.end());
  }
  ensure_dir(o.out);
  write_logbook(std::move(all), o.logbook, zone, o.out);
  return 0;
}

struct PlotOptions {
  std::vector<std::string> curves;
  std::string out;
};

int run_plot(const PlotOptions& o) {
  std::vector<std::pair<std::string, DetCurve>> curves;
  for (const auto& spec : o.curves) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    curves.emplace_back(name, parse_det_csv(read_text(path)));
  }
  write_file_atomic(o.out, format_det_svg(curves));
  fmt::print("wrote {} curves to {}\n", curves.size(), o.out);
  return 0;
}

struct IndicatorOptions {
  std::string input;
  std::string levels;
  std::string spectrogram;
  double calibration = 0.0;
};

int run_indicators(const IndicatorOptions& o) {
  if (o.levels.empty() && o.spectrogram.empty()) throw ConfigError("pass --levels and/or --spectrogram");
  const AudioClip clip = read_wav(o.input);
  if (!o.levels.empty()) {
    const auto series = level_series(clip, o.calibration);
    write_file_atomic(o.levels, format_level_csv(series));
    if (!series.empty()) fmt::print("LAFmax {:.2f} dB over {} frames\n", laf_max(series), series.size());
  }
  if (!o.spectrogram.empty()) write_file_atomic(o.spectrogram, format_spectrogram_csv(third_octave_spectrogram(clip)));
  return 0;
}

struct LabelOptions {
  std::string input;
  std::string out;
  double min_duration = kHopSeconds;
};

int run_label(const LabelOptions& o) {
  const AudioClip clip = read_wav(o.input);
  const auto series = level_series(clip);
  const HmmModel hmm = fit_hmm(series);
  const auto states = viterbi_decode(hmm, series);
  auto proposals = states_to_annotations(states, series.hop_s, o.min_duration);
  for (auto& p : proposals) p.source_file = fs::path(o.input).filename().string();
  write_file_atomic(o.out, format_annotations(proposals, {.proposed = true}));
  fmt::print("{} proposed events (background {:.1f} dB, event {:.1f} dB)\n", proposals.size(),
             hmm.emission[0].mean_db, hmm.emission[1].mean_db);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Impulsive noise detection, evaluation and logbook tool"};
  app.set_config("--config", "", "TOML config; [subcommand] sections set that command's options, flags win");
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")->capture_default_str();

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Synthesize labeled scenes");
  c_synth->add_option("--spec", synth.spec, "Scene spec TOML")->check(CLI::ExistingFile);
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--n-scenes", synth.n_scenes, "Number of scenes");
  c_synth->add_option("--seed", synth.seed, "Root seed");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train a model on the training split");
  c_train->add_option("--data", train.data, "Dataset directory (with manifest.csv)")->required();
  c_train->add_option("--kind", train.kind, "logistic, forest or cnn")->required();
  c_train->add_option("--model", train.model, "Output model file")->required();
  c_train->add_option("--seed", train.seed, "Root seed for the split and the model");
  c_train->add_option("--report", train.report, "Validation report JSON");
  c_train->add_option("--learning-rate", train.learning_rate);
  c_train->add_option("--epochs", train.epochs);
  c_train->add_option("--batch-size", train.batch_size);
  c_train->add_option("--l2", train.l2);
  c_train->add_option("--momentum", train.momentum);
  c_train->add_option("--class-weight", train.class_weight, "Positive-class loss weight (default negatives/positives)");
  c_train->add_option("--trees", train.n_trees);
  c_train->add_option("--max-depth", train.max_depth);
  c_train->add_option("--features-per-split", train.features_per_split);
  c_train->add_option("--min-samples-leaf", train.min_samples_leaf);

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "Window and event metrics, DET curves");
  c_eval->add_option("--data", eval.data, "Dataset directory")->required();
  c_eval->add_option("--model", eval.models, "Model file (repeatable)");
  c_eval->add_flag("--oracle", eval.oracle, "Add a row scoring each window with its own label");
  c_eval->add_option("--out", eval.out, "Output directory")->required();
  c_eval->add_option("--split", eval.split, "train, validation, test or all")->capture_default_str();
  c_eval->add_option("--seed", eval.seed, "Split seed (default: the models' training seed)");
  add_decode_flags(c_eval, eval.decode);

  DetectOptions detect;
  auto* c_detect = app.add_subcommand("detect", "Detect events in recordings and write a logbook");
  c_detect->add_option("--model", detect.model, "Model file")->required();
  c_detect->add_option("--manifest", detect.manifest, "Manifest CSV with start_time per file")->required();
  c_detect->add_option("--only", detect.only, "Restrict to these audio_file entries");
  c_detect->add_option("--out", detect.out, "Output directory")->required();
  add_decode_flags(c_detect, detect.decode);
  add_logbook_flags(c_detect, detect.logbook);

  LogbookOptions logbook;
  auto* c_logbook = app.add_subcommand("logbook", "Sessions and annual counters from detection files");
  c_logbook->add_option("detections", logbook.detections, "detections.jsonl files")->required();
  c_logbook->add_option("--out", logbook.out, "Output directory")->required();
  add_logbook_flags(c_logbook, logbook.logbook);

  PlotOptions plot;
  auto* c_plot = app.add_subcommand("plot-det", "SVG plot of DET curve CSVs");
  c_plot->add_option("curves", plot.curves, "[name=]det.csv")->required();
  c_plot->add_option("--out", plot.out, "Output SVG")->required();

  IndicatorOptions ind;
  auto* c_ind = app.add_subcommand("indicators", "A-weighted fast levels and 1/3-octave spectrogram");
  c_ind->add_option("--input", ind.input, "WAV file")->required();
  c_ind->add_option("--levels", ind.levels, "Level CSV output");
  c_ind->add_option("--spectrogram", ind.spectrogram, "Spectrogram CSV output");
  c_ind->add_option("--calibration-db", ind.calibration, "Offset added to every level");

  LabelOptions label;
  auto* c_label = app.add_subcommand("label", "Propose event annotations with a two-state HMM");
  c_label->add_option("--input", label.input, "WAV file")->required();
  c_label->add_option("--out", label.out, "Proposed annotations JSONL")->required();
  c_label->add_option("--min-duration", label.min_duration, "Drop shorter proposals, seconds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    setup_logging();
    synth.threads = train.threads = eval.threads = detect.threads = threads;
    if (*c_synth) return run_synth(synth);
    if (*c_train) return run_train(train);
    if (*c_eval) return run_eval(eval);
    if (*c_detect) return run_detect(detect);
    if (*c_logbook) return run_logbook(logbook);
    if (*c_plot) return run_plot(plot);
    if (*c_ind) return run_indicators(ind);
    if (*c_label) return run_label(label);
  } catch (const shotlog::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 1;
  }
  return 1;
}
