#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "awapd/awa.hpp"
#include "awapd/augment.hpp"
#include "awapd/dataset.hpp"
#include "awapd/evaluation.hpp"
#include "awapd/features.hpp"
#include "awapd/forest.hpp"
#include "awapd/io.hpp"
#include "awapd/peaks.hpp"
#include "awapd/png.hpp"
#include "awapd/simulator.hpp"

namespace awapd {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kPipelineSchemaVersion = 1;

struct PipelineConfig {
  std::string output_dir = "awapd_run";
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
  int waveforms_per_class = 20;
  bool keep_waveforms = false;  // raw waveforms are ~20 MB each as CSV
  SimulatorConfig simulator = default_config();
  DetectionConfig detection;
  RenderConfig render = [] {
    RenderConfig r;
    r.image_width = r.image_height = 128;
    return r;
  }();
  AugmentSpec augment = [] {
    AugmentSpec a;
    a.multiplier = 3;
    return a;
  }();
  SplitRatios split_ratios;
  ForestConfig forest;

  void validate() const {
    if (waveforms_per_class < 1) throw InvalidArgument("pipeline: waveforms_per_class must be >= 1");
    simulator.validate();
    augment.validate();
    if (render.image_width < 64 || render.image_height < 64) {
      throw InvalidArgument("pipeline: render image dims must be >= 64");
    }
    forest.validate(kFeatureLength);
  }
};

// Stage seeds are derived from master_seed; seed fields inside the stage
// sections are overwritten.
struct StageSeeds {
  std::uint64_t simulator, dataset, forest;
};

inline StageSeeds stage_seeds(std::uint64_t master) {
  return {hash_words({master, 0x51ULL}), hash_words({master, 0xDAULL}), hash_words({master, 0xF0ULL})};
}

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  nlohmann::json render = c.render;
  for (const char* k : {"amplitude_range", "area_range", "width_range"}) render.erase(k);  // set from data
  j = {{"schema_version", kPipelineSchemaVersion},
       {"output_dir", c.output_dir},
       {"master_seed", c.master_seed},
       {"threads", c.threads},
       {"waveforms_per_class", c.waveforms_per_class},
       {"keep_waveforms", c.keep_waveforms},
       {"simulator", c.simulator},
       {"detection", c.detection},
       {"render", render},
       {"augment", c.augment},
       {"split_ratios", c.split_ratios},
       {"forest", c.forest}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c = PipelineConfig{};
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != kPipelineSchemaVersion) {
    throw InvalidArgument("pipeline config: unsupported schema_version " + j.at("schema_version").dump());
  }
  static const std::vector<std::string> known = {"schema_version", "output_dir", "master_seed",  "threads",
                                                 "waveforms_per_class", "keep_waveforms", "simulator", "detection",
                                                 "render", "augment", "split_ratios", "forest"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw InvalidArgument("pipeline config: unknown key '" + k + "'");
    }
  }
  if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
  if (j.contains("master_seed")) j.at("master_seed").get_to(c.master_seed);
  if (j.contains("threads")) j.at("threads").get_to(c.threads);
  if (j.contains("waveforms_per_class")) j.at("waveforms_per_class").get_to(c.waveforms_per_class);
  if (j.contains("keep_waveforms")) j.at("keep_waveforms").get_to(c.keep_waveforms);
  // Stage sections are merge patches over the defaults, so a document only
  // needs the keys it changes.
  auto section = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    nlohmann::json base = target;
    base.merge_patch(j.at(key));
    using T = std::remove_reference_t<decltype(target)>;
    target = base.get<T>();
  };
  section("simulator", c.simulator);
  section("detection", c.detection);
  section("render", c.render);
  section("augment", c.augment);
  if (j.contains("split_ratios")) j.at("split_ratios").get_to(c.split_ratios);
  section("forest", c.forest);
}

inline PipelineConfig parse_pipeline_config(std::string_view text, const std::string& what = "config") {
  try {
    return nlohmann::json::parse(text).get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(what + ": " + e.what());
  }
}

inline PipelineConfig read_pipeline_config(const std::filesystem::path& path) {
  return parse_pipeline_config(detail::read_file(path), path.string());
}

namespace detail {

inline nlohmann::json schema_of(const nlohmann::json& v) {
  nlohmann::json s;
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      s["type"] = "object";
      nlohmann::json props = nlohmann::json::object();
      for (const auto& [k, x] : v.items()) props[k] = schema_of(x);
      s["properties"] = props;
      break;
    }
    case nlohmann::json::value_t::array:
      s["type"] = "array";
      if (!v.empty()) s["items"] = schema_of(v.front());
      break;
    case nlohmann::json::value_t::string: s["type"] = "string"; break;
    case nlohmann::json::value_t::boolean: s["type"] = "boolean"; break;
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned: s["type"] = "integer"; break;
    case nlohmann::json::value_t::number_float: s["type"] = "number"; break;
    case nlohmann::json::value_t::null: s["type"] = {"number", "null"}; break;
    default: break;
  }
  if (!v.is_object()) s["default"] = v;
  return s;
}

}  // namespace detail

// JSON-schema style description of the pipeline config, derived from the
// defaults.
inline nlohmann::json pipeline_schema() {
  nlohmann::json s = detail::schema_of(nlohmann::json(PipelineConfig{}));
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["title"] = "awapd pipeline config";
  s["version"] = kPipelineSchemaVersion;
  s["additionalProperties"] = false;
  return s;
}

// Rethrows a domain error with the failing stage prepended, preserving type.
template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  const std::string p = "[" + stage + "] ";
  try {
    return fn();
  } catch (const MalformedInput& e) {
    throw MalformedInput(p + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(p + e.what());
  } catch (const IoError& e) {
    throw IoError(p + e.what());
  } catch (const ModelFormatError& e) {
    throw ModelFormatError(p + e.what());
  } catch (const Error& e) {
    throw Error(p + e.what());
  }
}

inline TrainingSet training_set(std::span<const FeatureRow> rows, std::optional<Subset> only) {
  TrainingSet t;
  for (const auto& r : rows) {
    if (only && r.subset != *only) continue;
    t.rows.push_back(r.values);
    t.labels.push_back(int(index_of(r.cls)));
  }
  return t;
}

inline nlohmann::json forest_descriptor(const ForestModel& m) {
  return {{"kind", "random_forest"}, {"config", m.config}, {"n_features", m.feature_names.size()}};
}

// simulate+detect -> dataset -> verify -> features -> train -> eval, writing
// every intermediate under output_dir. Same config, same bytes (the report's
// timing field aside).
inline EvalReport run_pipeline(PipelineConfig cfg) {
  namespace fs = std::filesystem;
  run_stage("config", [&] { cfg.validate(); });
  const fs::path out = cfg.output_dir;
  const StageSeeds seeds = stage_seeds(cfg.master_seed);
  cfg.simulator.master_seed = seeds.simulator;
  cfg.forest.seed = seeds.forest;

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("[setup] cannot create '" + out.string() + "': " + ec.message());
  const fs::path marker = out / ".partial";
  detail::write_file(marker, "incomplete run\n");
  detail::write_file(out / "config.json", nlohmann::json(cfg).dump(2) + "\n");

  // Split ratios are checked before any simulation work is spent.
  run_stage("dataset", [&] { cfg.split_ratios.validate(); });

  std::vector<PulseSource> sources(std::size_t(kNumClasses) * cfg.waveforms_per_class);
  run_stage("simulate", [&] {
    fs::create_directories(out / "pulses");
    if (cfg.keep_waveforms) fs::create_directories(out / "waveforms");
    parallel_for(sources.size(), cfg.threads, [&](std::size_t i) {
      const PdClass cls = class_from_index(i / cfg.waveforms_per_class);
      const auto run = std::uint64_t(i % cfg.waveforms_per_class);
      const Waveform w = simulate(cls, cfg.simulator, run);
      const auto peaks = detect_pulses(w, cfg.detection);
      detail::write_file(out / "pulses" / (w.source_id() + ".csv"), format_pulse_csv(peaks));
      if (cfg.keep_waveforms) write_waveform_csv(w, out / "waveforms" / (w.source_id() + ".csv"));
      sources[i] = {cls, w.source_id(), extract_features(peaks)};
    });
  });

  const fs::path data_dir = out / "dataset";
  const DatasetManifest manifest = run_stage("dataset", [&] {
    BuildOptions opt;
    opt.render = cfg.render;
    opt.augment = cfg.augment;
    opt.ratios = cfg.split_ratios;
    opt.seed = seeds.dataset;
    opt.threads = cfg.threads;
    return build_dataset(sources, opt, data_dir);
  });

  run_stage("verify", [&] {
    const IntegrityReport rep = verify_integrity(manifest, data_dir);
    detail::write_file(out / "integrity.json", nlohmann::json(rep).dump(2) + "\n");
    if (!rep.clean()) throw Error("dataset failed integrity verification, see integrity.json");
  });

  const auto rows = run_stage("features", [&] {
    auto r = extract_dataset_features(manifest, data_dir, std::nullopt, cfg.threads);
    detail::write_file(out / "features.csv", format_features_csv(r));
    return r;
  });

  const ForestModel model = run_stage("train", [&] {
    auto m = train_forest(training_set(rows, Subset::train), canonical_class_names(), feature_names(), cfg.forest,
                          cfg.threads);
    save_model(m, out / "model.json");
    return m;
  });

  EvalReport report = run_stage("eval", [&] {
    const TrainingSet test = training_set(rows, Subset::test);
    auto r = evaluate([&](std::span<const double> x) { return predict(model, x).label; }, test.rows, test.labels,
                      canonical_class_names(), cfg.threads, forest_descriptor(model));
    detail::write_file(out / "report.json", nlohmann::json(r).dump(2) + "\n");
    write_png(render_confusion(r), out / "confusion.png");
    return r;
  });

  fs::remove(marker, ec);
  return report;
}

}  // namespace awapd
