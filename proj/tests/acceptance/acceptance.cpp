// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "../oracles/brute_gini.hpp"
#include "../oracles/brute_peaks.hpp"
#include "awapd.hpp"

using namespace awapd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

// Every pulse-feature record produced anywhere in this run is checked here.
std::size_t area_checks = 0, area_violations = 0;

void check_areas(std::span<const PulseFeatures> pulses) {
  for (const auto& p : pulses) {
    ++area_checks;
    if (p.area != p.amplitude * p.width) ++area_violations;
  }
}

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s: %s (%s; %.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("awapd_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---- peak detection oracle ----------------------------------------------------

Outcome peak_oracle() {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t peaks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + int(rng() % 512);
    std::vector<double> x(n), t(n);
    const double f = 0.005 + 0.3 * u(rng), ph = 6.3 * u(rng), noise = u(rng);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = std::sin(f * i + ph) + noise * g(rng);
      if (u(rng) < 0.02) x[i] += 4.0 * u(rng);
      t[i] = (acc += 0.2 + u(rng));
    }
    if (trial % 3 == 0) {
      for (auto& v : x) v = std::round(v * 3.0) / 3.0;  // plateaus
    }
    DetectionConfig cfg;
    cfg.absolute_value = false;
    cfg.min_height = 1.5 * u(rng);  // thresholds must be non-negative
    cfg.min_prominence = 1e-3 + u(rng);
    const auto fast = detect_pulses(t, x, cfg);
    const auto slow = oracle::brute_detect(t, x, *cfg.min_height, *cfg.min_prominence);
    if (fast.size() != slow.size()) return {false, fmt("trial %d: %zu vs %zu peaks", trial, fast.size(), slow.size())};
    for (std::size_t k = 0; k < fast.size(); ++k) {
      const auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(b), 1e-300); };
      if (fast[k].index != slow[k].index || !rel(fast[k].prominence, slow[k].prominence) ||
          !rel(fast[k].width, slow[k].width)) {
        return {false, fmt("trial %d peak %zu differs", trial, k)};
      }
    }
    peaks += fast.size();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {secs < 10.0, fmt("1000 signals, %zu peaks identical, %.2f s", peaks, secs)};
}

// ---- width geometry --------------------------------------------------------------

Outcome width_geometry() {
  // Triangles with arbitrary rise/fall on a non-uniform grid whose vertices
  // are samples: the half level always falls on a linear segment.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  double worst_tri = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double base = u(rng) - 0.5, h = 1.0 + u(rng), rise = u(rng) * 1e-6, fall = u(rng) * 1e-6;
    const double t0 = u(rng) * 1e-6;
    std::vector<double> t{0.0, t0, t0 + rise, t0 + rise + fall, t0 + rise + fall + u(rng) * 1e-6};
    std::vector<double> x{base, base, base + h, base, base};
    // Extra samples along the flanks.
    const double a = u(rng) * 0.3, b = 0.7 + u(rng) * 0.3;
    t.insert(t.begin() + 2, t0 + a * rise);
    x.insert(x.begin() + 2, base + a * h);
    t.insert(t.begin() + 4, t0 + rise + b * fall);
    x.insert(x.begin() + 4, base + h - b * h);
    DetectionConfig cfg;
    cfg.absolute_value = false;
    cfg.min_height = base + 0.5 * h;
    cfg.min_prominence = 0.5;
    const auto p = detect_pulses(t, x, cfg);
    if (p.size() != 1) return {false, "triangle: expected one peak"};
    const double expected = 0.5 * (rise + fall);
    worst_tri = std::max(worst_tri, std::abs(p[0].width - expected));
  }
  if (worst_tri > 1e-9 * 1e-6) return {false, fmt("triangle width error %.3g s", worst_tri)};

  // Damped sinusoids sampled at 50 MS/s against the continuous-time geometry.
  SimulatorConfig sim = default_config();
  sim.noise_sigma = 0.0;
  const ShapeGeometry geo = solve_shape(sim.pulse_shape);
  double worst_rel = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double width = 1.5e-7 + 1.2e-6 * (k / 199.0);
    const double onset = 1e-6 + (k % 17) * 3.1e-9;
    InjectedPulse ip;
    ip.time = onset;
    ip.amplitude = 0.5;
    ip.width = width;
    ip.polarity = k % 2 ? -1 : 1;
    const double scale = width / geo.half_width;
    const double dt = 1.0 / 50e6;
    std::vector<double> t, x;
    for (double s = 0.0; s < onset + 20 * width; s += dt) {
      t.push_back(s);
      const double uu = (s - onset) / scale;
      x.push_back(uu < 0 ? 0.0 : ip.polarity * ip.amplitude / geo.peak_value * std::exp(-sim.pulse_shape.decay_constant * uu) *
                                    std::sin(2 * 3.141592653589793 * sim.pulse_shape.carrier_frequency * uu));
    }
    const auto p = detect_pulses(t, x, {});
    if (p.empty()) return {false, "damped sinusoid: no peak"};
    const auto& main = *std::max_element(p.begin(), p.end(), [](auto& a, auto& b) { return a.height < b.height; });
    worst_rel = std::max(worst_rel, std::abs(main.width - width) / width);
  }
  return {worst_rel <= 0.05,
          fmt("triangles exact to %.2g s; damped sinusoids worst width error %.2f%%", worst_tri, 100 * worst_rel)};
}

// ---- dataset arithmetic ------------------------------------------------------------

std::vector<PulseSource> simulated_sources(int per_class, std::uint64_t seed) {
  SimulatorConfig cfg = default_config();
  cfg.master_seed = seed;
  std::vector<PulseSource> out;
  for (PdClass c : kAllClasses) {
    for (int r = 0; r < per_class; ++r) {
      PulseSource s{c, run_source_id(c, r), {}};
      for (const auto& p : ground_truth(c, cfg, r)) s.pulses.push_back(make_pulse(p.amplitude, p.width, p.peak_time));
      check_areas(s.pulses);
      out.push_back(std::move(s));
    }
  }
  return out;
}

Outcome dataset_arithmetic() {
  const fs::path dir = scratch("dataset");
  BuildOptions opt;
  opt.augment.multiplier = 5;
  opt.seed = 2024;
  opt.threads = 8;
  const auto m = build_dataset(simulated_sources(250, 11), opt, dir);
  for (PdClass c : kAllClasses) {
    std::size_t originals[3] = {0, 0, 0};
    for (const auto& r : m.records)
      if (r.cls == c && !r.parent_id) ++originals[int(r.subset)];
    if (originals[0] != 150 || originals[1] != 50 || originals[2] != 50) return {false, "original split counts wrong"};
    if (m.count(c, Subset::train) != 750 || m.count(c, Subset::val) != 250 || m.count(c, Subset::test) != 250) {
      return {false, fmt("final counts wrong for %s", std::string(name_of(c)).c_str())};
    }
  }
  if (m.records.size() != 7500) return {false, fmt("%zu images", m.records.size())};
  const auto clean = verify_integrity(m, dir);
  if (!clean.clean()) return {false, "fresh dataset not clean"};

  // Planted faults: a copied file and a corrupted file.
  const ImageRecord* test_img = nullptr;
  for (const auto& r : m.records)
    if (r.subset == Subset::test) {
      test_img = &r;
      break;
    }
  fs::copy_file(dir / test_img->relative_path(), dir / "train" / "S" / "planted_copy.png");
  auto rep = verify_integrity(m, dir);
  const bool copy_found = rep.cross_subset_collisions.size() == 1 && rep.cross_subset_collisions[0].digest == test_img->digest;
  fs::remove(dir / "train" / "S" / "planted_copy.png");
  const fs::path victim = dir / m.records[1234].relative_path();
  std::string bytes = detail::read_file(victim);
  bytes[bytes.size() - 20] ^= 0x01;
  detail::write_file(victim, bytes);
  rep = verify_integrity(m, dir);
  const bool corrupt_found = rep.mismatches.size() == 1 && rep.cross_subset_collisions.empty();
  fs::remove_all(dir);
  return {copy_found && corrupt_found,
          fmt("7500 images, 750/250/250 per class, clean verify; copy %s, corruption %s",
              copy_found ? "detected" : "MISSED", corrupt_found ? "detected" : "MISSED")};
}

// ---- rendering determinism ---------------------------------------------------------

Outcome rendering_determinism() {
  const auto sources = simulated_sources(40, 12);
  RenderConfig rc;
  std::vector<std::vector<PulseFeatures>> sets;
  for (const auto& s : sources) sets.push_back(s.pulses);
  rc.set_ranges(auto_ranges(sets));
  for (const auto& s : sources) {
    if (encode_png(render_awa(s.pulses, rc).image) != encode_png(render_awa(s.pulses, rc).image)) {
      return {false, "render bytes differ between runs"};
    }
  }
  BuildOptions opt;
  opt.seed = 77;
  opt.threads = 1;
  const fs::path a = scratch("det1"), b = scratch("det8");
  const auto ma = build_dataset(sources, opt, a);
  opt.threads = 8;
  const auto mb = build_dataset(sources, opt, b);
  bool same = ma == mb && detail::read_file(manifest_path(a)) == detail::read_file(manifest_path(b));
  for (const auto& r : ma.records) same = same && detail::read_file(a / r.relative_path()) == detail::read_file(b / r.relative_path());
  fs::remove_all(a);
  fs::remove_all(b);
  return {same, fmt("%zu renders byte-identical; %zu-image datasets identical for 1 and 8 threads", sources.size(),
                    ma.records.size())};
}

// ---- simulator recovery ------------------------------------------------------------

Outcome simulator_recovery() {
  SimulatorConfig cfg = default_config();
  cfg.noise_sigma = 0.0;
  cfg.master_seed = 31;
  const double dt = 1.0 / cfg.excitation.sample_rate;
  std::size_t total = 0, isolated = 0, recovered = 0, outside = 0, detected = 0;
  double worst_amp = 0.0, worst_width = 0.0;
  for (PdClass cls : kAllClasses) {
    for (std::uint64_t run = 0; run < 8; ++run) {
      const auto truth = ground_truth(cls, cfg, run);
      const Waveform w = simulate(cls, cfg, run);
      const auto peaks = detect_pulses(w);
      const auto feats = extract_features(peaks);
      check_areas(feats);
      detected += peaks.size();
      double jitter = 0.0;
      for (PdClass p : constituents(cls)) jitter = std::max(jitter, cfg.model(p).edge_jitter);
      for (const auto& p : peaks) {
        bool inside = false;
        for (int e = 0; e < cfg.excitation.n_edges() && !inside; ++e) {
          const double s = edge_start(cfg.excitation, cfg.capture, e);
          inside = p.time >= s && p.time <= s + jitter;
        }
        outside += !inside;
      }
      for (std::size_t i = 0; i < truth.size(); ++i) {
        ++total;
        bool alone = true;
        for (std::size_t j = 0; j < truth.size() && alone; ++j) {
          if (j != i && std::abs(truth[i].peak_time - truth[j].peak_time) < 4.0 * (truth[i].width + truth[j].width)) {
            alone = false;
          }
        }
        if (!alone) continue;
        ++isolated;
        const Peak* best = nullptr;
        for (const auto& p : peaks) {
          if (std::abs(p.time - truth[i].peak_time) <= std::max(2 * dt, 0.5 * truth[i].width) &&
              (!best || p.height > best->height)) {
            best = &p;
          }
        }
        if (!best) continue;
        const double ea = std::abs(best->height - truth[i].amplitude) / truth[i].amplitude;
        const double ew = std::abs(best->width - truth[i].width) / truth[i].width;
        worst_amp = std::max(worst_amp, ea);
        worst_width = std::max(worst_width, ew);
        if (ea <= 0.02 && ew <= 0.05) ++recovered;
      }
    }
  }
  const double rate = double(recovered) / double(isolated);
  return {rate >= 0.99 && outside == 0,
          fmt("%zu/%zu isolated pulses recovered (%.2f%%; %.1f%% of %zu are isolated); worst amplitude error %.2f%%, "
              "worst width error %.2f%%; %zu of %zu detections outside edge windows",
              recovered, isolated, 100 * rate, 100.0 * double(isolated) / double(total), total, 100 * worst_amp,
              100 * worst_width, outside, detected)};
}

// ---- end-to-end classification -------------------------------------------------------

Outcome end_to_end() {
  PipelineConfig cfg;
  cfg.output_dir = scratch("e2e").string();
  cfg.waveforms_per_class = 60;
  cfg.render.image_width = cfg.render.image_height = 128;
  cfg.augment.multiplier = 3;
  cfg.master_seed = 7;
  const auto t0 = std::chrono::steady_clock::now();
  const EvalReport r = run_pipeline(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& f : fs::directory_iterator(fs::path(cfg.output_dir) / "pulses")) check_areas(read_pulse_csv(f.path()));
  double worst_row = 0.0;
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    if (r.flagged_rows[i]) return {false, "empty test row"};
    double s = 0;
    for (double v : r.confusion[i]) s += v;
    worst_row = std::max(worst_row, std::abs(s - 100.0));
  }
  fs::remove_all(cfg.output_dir);
  return {r.overall_accuracy >= 85.0 && worst_row <= 0.1 && secs < 300.0,
          fmt("RF test accuracy %.2f%% on %lld images, max row-sum deviation %.2g, %.0f s", r.overall_accuracy,
              static_cast<long long>(r.n_test), worst_row, secs)};
}

// ---- random forest properties ----------------------------------------------------------

Outcome forest_properties() {
  std::mt19937_64 rng(500);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + int(rng() % 11), nf = 1 + int(rng() % 6), k = 2 + int(rng() % 5);
    TrainingSet t;
    for (int i = 0; i < n; ++i) {
      std::vector<double> x(nf);
      for (auto& v : x) v = double(rng() % 5) + (rng() % 2 ? 0.25 : 0.0);
      t.rows.push_back(x);
      t.labels.push_back(int(rng() % k));
    }
    std::vector<int> feats(nf);
    for (int f = 0; f < nf; ++f) feats[f] = f;
    std::vector<std::size_t> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = i;
    const auto fast = best_split(t, rows, feats, k, 1);
    const auto slow = oracle::brute_best_split(t.rows, t.labels, feats, k, 1);
    if (fast.found != slow.found || (fast.found && (fast.feature != slow.feature || fast.threshold != slow.threshold))) {
      return {false, fmt("Gini split mismatch in case %d", trial)};
    }
  }

  std::normal_distribution<double> g(0.0, 1.0);
  auto make = [&](int per_class) {
    TrainingSet t;
    for (int c = 0; c < 6; ++c)
      for (int i = 0; i < per_class; ++i) {
        std::vector<double> x(10);
        for (int f = 0; f < 10; ++f) x[f] = g(rng) + (f % 6 == c ? 2.0 : 0.0);
        t.rows.push_back(x);
        t.labels.push_back(c);
      }
    return t;
  };
  const TrainingSet train = make(30), test = make(20);
  std::vector<std::string> names;
  for (int f = 0; f < 10; ++f) names.push_back("f" + std::to_string(f));
  ForestConfig fc;
  fc.n_trees = 60;
  fc.features_per_split = 3;
  fc.seed = 5;
  const auto base = train_forest(train, canonical_class_names(), names, fc);
  TrainingSet st = train, ss = test;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  std::vector<double> k(10);
  for (auto& v : k) v = scale(rng);
  for (auto& r : st.rows)
    for (int f = 0; f < 10; ++f) r[f] *= k[f];
  for (auto& r : ss.rows)
    for (int f = 0; f < 10; ++f) r[f] *= k[f];
  const auto scaled = train_forest(st, canonical_class_names(), names, fc);
  for (std::size_t i = 0; i < test.rows.size(); ++i) {
    if (predict(base, test.rows[i]).label != predict(scaled, ss.rows[i]).label) return {false, "rescaling changed a prediction"};
  }

  const fs::path dir = scratch("model");
  save_model(base, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  fs::remove_all(dir);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(10);
    for (auto& v : x) v = 3.0 * g(rng);
    const auto a = predict(base, x), b = predict(back, x);
    if (a.label != b.label || a.vote_fractions != b.vote_fractions) return {false, "save/load changed a prediction"};
  }
  return {true, "500 Gini cases match brute force; per-feature rescaling and save/load leave predictions unchanged"};
}

// ---- feature invariants ------------------------------------------------------------------

Outcome feature_invariants() {
  const auto sources = simulated_sources(25, 13);
  std::vector<std::vector<PulseFeatures>> sets;
  for (const auto& s : sources) sets.push_back(s.pulses);
  RenderConfig rc;
  rc.image_width = rc.image_height = kFeatureImageSize;
  rc.set_ranges(auto_ranges(sets));
  double worst_grid = 0.0;
  for (const auto& s : sources) {
    const RgbImage img = render_awa(s.pulses, rc).image;
    const FeatureVector a = extract(img), b = extract(flip_horizontal(img));
    if (a.to_array().size() != kFeatureLength || b.to_array().size() != kFeatureLength) return {false, "length"};
    double sum = 0;
    for (double v : a.grid_occupancy) sum += v;
    worst_grid = std::max(worst_grid, std::abs(sum / 64.0 - a.fg_fraction));
    if (a.kurtosis != b.kurtosis || a.fg_count != b.fg_count || a.fg_fraction != b.fg_fraction ||
        a.bbox_width != b.bbox_width || a.bbox_height != b.bbox_height || a.aspect_ratio != b.aspect_ratio ||
        a.rgb_stats != b.rgb_stats) {
      return {false, "flip changed a non-grid feature"};
    }
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c)
        if (a.grid_occupancy[r * 8 + c] != b.grid_occupancy[r * 8 + 7 - c]) return {false, "flip did not mirror grid"};
  }
  return {worst_grid <= 1e-9, fmt("%zu images: 74-length, grid mean within %.1g of fg_fraction, flip covariant",
                                  sources.size(), worst_grid)};
}

}  // namespace

int main() {
  report("peak-detection oracle equivalence", peak_oracle);
  report("width geometry", width_geometry);
  report("dataset arithmetic and integrity", dataset_arithmetic);
  report("rendering determinism", rendering_determinism);
  report("simulator recovery", simulator_recovery);
  report("end-to-end synthetic classification", end_to_end);
  report("random-forest properties", forest_properties);
  report("feature-extraction invariants", feature_invariants);
  // Last, so it covers pulses produced by every check above.
  report("area identity", [] {
    return Outcome{area_checks > 0 && area_violations == 0,
                   fmt("%zu pulses checked, %zu violations", area_checks, area_violations)};
  });
  return failures == 0 ? 0 : 1;
}
