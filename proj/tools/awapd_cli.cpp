// awapd: partial-discharge AWA pattern toolkit.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "awapd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  if (with_out) cmd->add_option("--out", c.out, "Output path");
}

json load_json(const std::string& path) {
  try {
    return json::parse(awapd::detail::read_file(path));
  } catch (const json::exception& e) {
    throw awapd::MalformedInput(path + ": " + e.what());
  }
}

template <typename T>
T load_config(const std::string& path, T fallback) {
  if (path.empty()) return fallback;
  try {
    return load_json(path).get<T>();
  } catch (const json::exception& e) {
    throw awapd::MalformedInput(path + ": " + e.what());
  }
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw awapd::IoError("cannot create '" + p.string() + "': " + ec.message());
}

std::vector<awapd::PdClass> classes_from(const std::string& s) {
  if (s == "all") return {awapd::kAllClasses.begin(), awapd::kAllClasses.end()};
  return {awapd::parse_class(s)};
}

// Pulse files are named <class>_<anything>.csv.
awapd::PdClass class_of_file(const fs::path& p) {
  const std::string stem = p.stem().string();
  const auto cut = stem.find('_');
  if (const auto c = awapd::try_parse_class(stem.substr(0, cut))) return *c;
  throw awapd::InvalidArgument("cannot infer class from file name '" + p.filename().string() +
                               "'; expected <class>_<id>.csv");
}

std::vector<fs::path> csv_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw awapd::IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".csv" && !name.ends_with("_truth.csv")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

awapd::TrainingSet to_training(const std::vector<awapd::FeatureRow>& rows, std::optional<awapd::Subset> only) {
  awapd::TrainingSet t = awapd::training_set(rows, only);
  if (t.rows.empty()) throw awapd::InvalidArgument("no feature rows selected");
  return t;
}

std::optional<awapd::Subset> subset_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  return awapd::parse_subset(s);
}

int write_report(const awapd::EvalReport& r, const fs::path& out_dir, double min_accuracy) {
  ensure_dir(out_dir);
  awapd::detail::write_file(out_dir / "report.json", json(r).dump(2) + "\n");
  awapd::write_png(awapd::render_confusion(r), out_dir / "confusion.png");
  std::printf("accuracy %.2f%% on %lld samples; wrote %s\n", r.overall_accuracy, static_cast<long long>(r.n_test),
              (out_dir / "report.json").string().c_str());
  if (r.overall_accuracy < min_accuracy) {
    std::fprintf(stderr, "awapd: accuracy %.2f%% is below the --min-accuracy gate %.2f%%\n", r.overall_accuracy,
                 min_accuracy);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"awapd: partial-discharge AWA pattern toolkit"};
  app.set_version_flag("--version", awapd::kToolVersion);
  app.require_subcommand(1);

  // simulate
  Common sim;
  std::string sim_class = "all";
  std::uint64_t sim_first = 0;
  int sim_runs = 1;
  bool sim_excitation = false;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic PD waveforms with ground truth");
  add_common(simulate, sim);
  simulate->add_option("--class", sim_class, "Class name or 'all'");
  simulate->add_option("--first-run", sim_first, "First run id");
  simulate->add_option("--runs", sim_runs, "Runs per class")->check(CLI::PositiveNumber);
  simulate->add_flag("--excitation", sim_excitation, "Also write the excitation waveform");

  // detect
  Common det;
  std::vector<std::string> det_inputs;
  std::optional<double> det_min_height, det_min_prom;
  bool det_no_abs = false;
  auto* detect = app.add_subcommand("detect", "Detect pulses in waveform CSVs");
  add_common(detect, det);
  detect->add_option("inputs", det_inputs, "Waveform CSV files or directories")->required();
  detect->add_option("--min-height", det_min_height, "Absolute height threshold (V)");
  detect->add_option("--min-prominence", det_min_prom, "Absolute prominence threshold (V)");
  detect->add_flag("--no-abs", det_no_abs, "Detect on the raw signal instead of |x|");

  // render
  Common ren;
  std::string ren_input;
  int ren_size = 0;
  auto* render = app.add_subcommand("render", "Render a pulse list as an AWA image");
  add_common(render, ren);
  render->add_option("input", ren_input, "Pulse CSV")->required();
  render->add_option("--size", ren_size, "Square image size in pixels");

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Build or verify an AWA image dataset");
  dataset->require_subcommand(1);
  Common dsb;
  std::string dsb_pulses;
  auto* ds_build = dataset->add_subcommand("build", "Render, split and augment pulse lists into a dataset");
  add_common(ds_build, dsb);
  ds_build->add_option("--pulses", dsb_pulses, "Directory of <class>_<id>.csv pulse lists")->required();
  std::string dsv_dir;
  auto* ds_verify = dataset->add_subcommand("verify", "Check a dataset for leakage and manifest drift");
  ds_verify->add_option("dir", dsv_dir, "Dataset directory")->required();

  // features
  Common fea;
  std::string fea_dataset, fea_subset = "all";
  auto* features = app.add_subcommand("features", "Extract handcrafted features from a dataset");
  add_common(features, fea);
  features->add_option("--dataset", fea_dataset, "Dataset directory")->required();
  features->add_option("--subset", fea_subset, "train, val, test or all");

  // train-rf
  Common trn;
  std::string trn_features, trn_subset = "train";
  auto* train = app.add_subcommand("train-rf", "Train a random forest on a features CSV");
  add_common(train, trn);
  train->add_option("--features", trn_features, "Features CSV")->required();
  train->add_option("--subset", trn_subset, "Rows to train on: train, val, test or all");

  // predict-rf
  Common prd;
  std::string prd_model, prd_features, prd_subset = "all";
  auto* predict = app.add_subcommand("predict-rf", "Predict classes for a features CSV");
  add_common(predict, prd);
  predict->add_option("--model", prd_model, "Model JSON")->required();
  predict->add_option("--features", prd_features, "Features CSV")->required();
  predict->add_option("--subset", prd_subset, "train, val, test or all");

  // eval
  Common evl;
  std::string evl_model, evl_features, evl_report, evl_subset = "test";
  double evl_min_acc = 0.0;
  auto* eval = app.add_subcommand("eval", "Evaluate a model, or re-render an existing report");
  add_common(eval, evl);
  eval->add_option("--model", evl_model, "Model JSON");
  eval->add_option("--features", evl_features, "Features CSV");
  eval->add_option("--subset", evl_subset, "Rows to evaluate");
  eval->add_option("--report", evl_report, "Existing report JSON to render (any producer)");
  eval->add_option("--min-accuracy", evl_min_acc, "Fail with exit 1 below this accuracy (%)");

  // all
  Common all;
  auto* run_all = app.add_subcommand("all", "Run the full synthetic experiment");
  add_common(run_all, all);

  // info
  bool info_schema = false;
  auto* info = app.add_subcommand("info", "Print version and configuration information");
  info->add_flag("--schema", info_schema, "Dump the pipeline config JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      auto cfg = load_config(sim.config, awapd::default_config());
      if (sim.seed) cfg.master_seed = *sim.seed;
      cfg.validate();
      const fs::path out = sim.out.empty() ? "." : sim.out;
      ensure_dir(out);
      const auto classes = classes_from(sim_class);
      std::vector<std::pair<awapd::PdClass, std::uint64_t>> jobs;
      for (auto c : classes)
        for (int r = 0; r < sim_runs; ++r) jobs.push_back({c, sim_first + std::uint64_t(r)});
      awapd::parallel_for(jobs.size(), sim.threads, [&](std::size_t i) {
        const auto [c, run] = jobs[i];
        const auto truth = awapd::ground_truth(c, cfg, run);
        const awapd::Waveform w = awapd::simulate(c, cfg, run);
        awapd::write_waveform_csv(w, out / (w.source_id() + ".csv"));
        awapd::detail::write_file(out / (w.source_id() + "_truth.csv"), awapd::format_ground_truth_csv(truth));
      });
      if (sim_excitation) awapd::write_waveform_csv(awapd::excitation_waveform(cfg), out / "excitation.csv");
      std::printf("wrote %zu waveforms to %s\n", jobs.size(), out.string().c_str());
      return 0;
    }

    if (*detect) {
      auto cfg = load_config(det.config, awapd::DetectionConfig{});
      if (det_min_height) cfg.min_height = det_min_height;
      if (det_min_prom) cfg.min_prominence = det_min_prom;
      if (det_no_abs) cfg.absolute_value = false;
      std::vector<fs::path> files;
      for (const auto& in : det_inputs) {
        if (fs::is_directory(in)) {
          for (auto& f : csv_files(in)) files.push_back(f);
        } else {
          files.emplace_back(in);
        }
      }
      if (det.out.empty()) {
        if (files.size() != 1) throw awapd::InvalidArgument("detect: --out is required for multiple inputs");
        const auto peaks = awapd::detect_pulses(awapd::read_waveform_csv(files[0]), cfg);
        std::cout << awapd::format_pulse_csv(peaks);
        return 0;
      }
      ensure_dir(det.out);
      awapd::parallel_for(files.size(), det.threads, [&](std::size_t i) {
        const auto peaks = awapd::detect_pulses(awapd::read_waveform_csv(files[i]), cfg);
        awapd::detail::write_file(fs::path(det.out) / files[i].filename(), awapd::format_pulse_csv(peaks));
      });
      std::printf("wrote %zu pulse lists to %s\n", files.size(), det.out.c_str());
      return 0;
    }

    if (*render) {
      if (ren.out.empty()) throw awapd::InvalidArgument("render: --out is required");
      const auto pulses = awapd::read_pulse_csv(ren_input);
      awapd::RenderConfig cfg;
      if (!ren.config.empty()) {
        const json j = load_json(ren.config);
        json base = cfg;
        base.update(j);
        cfg = base.get<awapd::RenderConfig>();
        if (!j.contains("amplitude_range")) {
          cfg.set_ranges(awapd::auto_ranges(std::vector<std::vector<awapd::PulseFeatures>>{pulses}));
        }
      } else {
        cfg.set_ranges(awapd::auto_ranges(std::vector<std::vector<awapd::PulseFeatures>>{pulses}));
      }
      if (ren_size > 0) cfg.image_width = cfg.image_height = ren_size;
      cfg.validate();
      const auto img = awapd::render_awa(pulses, cfg);
      awapd::write_png(img.image, ren.out);
      std::printf("rendered %zu pulses to %s\n", img.n_pulses, ren.out.c_str());
      return 0;
    }

    if (*ds_build) {
      if (dsb.out.empty()) throw awapd::InvalidArgument("dataset build: --out is required");
      awapd::BuildOptions opt;
      if (!dsb.config.empty()) {
        const json j = load_json(dsb.config);
        if (j.contains("render")) {
          json base = opt.render;
          base.update(j.at("render"));
          opt.render = base.get<awapd::RenderConfig>();
        }
        if (j.contains("augment")) opt.augment = j.at("augment").get<awapd::AugmentSpec>();
        if (j.contains("split_ratios")) opt.ratios = j.at("split_ratios").get<awapd::SplitRatios>();
        if (j.contains("seed")) opt.seed = j.at("seed").get<std::uint64_t>();
      }
      if (dsb.seed) opt.seed = *dsb.seed;
      opt.threads = dsb.threads;
      std::vector<awapd::PulseSource> sources;
      for (const auto& f : csv_files(dsb_pulses)) {
        sources.push_back({class_of_file(f), f.stem().string(), awapd::read_pulse_csv(f)});
      }
      const auto m = awapd::build_dataset(sources, opt, dsb.out);
      std::printf("built %zu images from %zu sources in %s\n", m.records.size(), sources.size(), dsb.out.c_str());
      return 0;
    }

    if (*ds_verify) {
      const auto m = awapd::read_manifest(awapd::manifest_path(dsv_dir));
      const auto rep = awapd::verify_integrity(m, dsv_dir);
      std::cout << json(rep).dump(2) << "\n";
      return rep.clean() ? 0 : 1;
    }

    if (*features) {
      if (fea.out.empty()) throw awapd::InvalidArgument("features: --out is required");
      const auto m = awapd::read_manifest(awapd::manifest_path(fea_dataset));
      const auto rows = awapd::extract_dataset_features(m, fea_dataset, subset_filter(fea_subset), fea.threads);
      awapd::detail::write_file(fea.out, awapd::format_features_csv(rows));
      std::printf("wrote %zu feature rows to %s\n", rows.size(), fea.out.c_str());
      return 0;
    }

    if (*train) {
      if (trn.out.empty()) throw awapd::InvalidArgument("train-rf: --out is required");
      auto cfg = load_config(trn.config, awapd::ForestConfig{});
      if (trn.seed) cfg.seed = *trn.seed;
      const auto rows = awapd::read_features_csv(trn_features);
      const auto model = awapd::train_forest(to_training(rows, subset_filter(trn_subset)),
                                             awapd::canonical_class_names(), awapd::feature_names(), cfg, trn.threads);
      awapd::save_model(model, trn.out);
      std::printf("trained %zu trees; wrote %s\n", model.trees.size(), trn.out.c_str());
      return 0;
    }

    if (*predict) {
      const auto model = awapd::load_model(prd_model);
      const auto rows = awapd::read_features_csv(prd_features);
      const auto only = subset_filter(prd_subset);
      std::string out = "image_id,true_class,predicted_class\n";
      for (const auto& r : rows) {
        if (only && r.subset != *only) continue;
        const int y = awapd::predict(model, r.values).label;
        out += r.image_id + "," + std::string(awapd::name_of(r.cls)) + "," + model.classes.at(y) + "\n";
      }
      if (prd.out.empty()) std::cout << out;
      else awapd::detail::write_file(prd.out, out);
      return 0;
    }

    if (*eval) {
      const fs::path out = evl.out.empty() ? "." : evl.out;
      if (!evl_report.empty()) {
        const auto r = load_json(evl_report).get<awapd::EvalReport>();
        const fs::path png = out.extension() == ".png" ? out : out / "confusion.png";
        if (png.has_parent_path()) ensure_dir(png.parent_path());
        awapd::write_png(awapd::render_confusion(r), png);
        std::printf("rendered %s\n", png.string().c_str());
        return r.overall_accuracy < evl_min_acc ? 1 : 0;
      }
      if (evl_model.empty() || evl_features.empty()) {
        throw awapd::InvalidArgument("eval: pass --model and --features, or --report");
      }
      const auto model = awapd::load_model(evl_model);
      const auto test = to_training(awapd::read_features_csv(evl_features), subset_filter(evl_subset));
      const auto r = awapd::evaluate([&](std::span<const double> x) { return awapd::predict(model, x).label; },
                                     test.rows, test.labels, model.classes, evl.threads,
                                     awapd::forest_descriptor(model));
      return write_report(r, out, evl_min_acc);
    }

    if (*run_all) {
      awapd::PipelineConfig cfg;
      if (!all.config.empty()) cfg = awapd::read_pipeline_config(all.config);
      if (all.seed) cfg.master_seed = *all.seed;
      if (run_all->count("--threads") > 0) cfg.threads = all.threads;
      if (!all.out.empty()) cfg.output_dir = all.out;
      const auto r = awapd::run_pipeline(cfg);
      std::printf("accuracy %.2f%% on %lld test images; outputs in %s\n", r.overall_accuracy,
                  static_cast<long long>(r.n_test), cfg.output_dir.c_str());
      return 0;
    }

    if (*info) {
      if (info_schema) {
        std::cout << awapd::pipeline_schema().dump(2) << "\n";
        return 0;
      }
      std::cout << "awapd " << awapd::kToolVersion << "\n"
                << "pipeline config schema version " << awapd::kPipelineSchemaVersion << "\n"
                << "model format version " << awapd::kForestFormatVersion << "\n"
                << "eval report schema " << awapd::kEvalReportSchema << " v" << awapd::kEvalReportVersion << "\n"
                << "determinism: all randomness derives from the master seed through counter-based hashing;\n"
                << "outputs are identical for any --threads value (report timing excepted)\n";
      return 0;
    }
  } catch (const awapd::Error& e) {
    std::fprintf(stderr, "awapd: error: %s\n", e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "awapd: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
