#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "awapd/io.hpp"
#include "awapd/peaks.hpp"
#include "awapd/simulator.hpp"

using namespace awapd;

namespace {

SimulatorConfig small_config() {
  SimulatorConfig c = default_config();
  c.excitation.n_cycles = 4;
  return c;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double cv(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size())) / m;
}

}  // namespace

TEST(Excitation, MeasurementSetupDefaults) {
  const SimulatorConfig c = default_config();
  EXPECT_EQ(c.excitation.frequency, 60.0);
  EXPECT_EQ(c.excitation.n_cycles, 20);
  EXPECT_EQ(c.excitation.edge_time, 18e-6);
  EXPECT_EQ(c.excitation.n_edges(), 40);
}

TEST(Excitation, WaveformIsTrapezoid) {
  const SimulatorConfig c = small_config();
  const Waveform w = excitation_waveform(c);
  const auto v = w.values();
  EXPECT_EQ(*std::max_element(v.begin(), v.end()), c.excitation.peak_voltage);
  EXPECT_EQ(*std::min_element(v.begin(), v.end()), 0.0);
  // Time spent at the high level matches the duty cycle, edges split evenly.
  const auto t = w.times();
  double high = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    high += (t[i] - t[i - 1]) * 0.5 * (v[i] + v[i - 1]) / c.excitation.peak_voltage;
  }
  EXPECT_NEAR(high, c.excitation.duty * c.excitation.duration(), 1e-9);
}

TEST(Simulator, DeterministicPerRun) {
  const SimulatorConfig c = small_config();
  EXPECT_EQ(simulate(PdClass::CS, c, 5), simulate(PdClass::CS, c, 5));
  EXPECT_NE(simulate(PdClass::CS, c, 5).values()[0], simulate(PdClass::CS, c, 6).values()[0]);
  EXPECT_EQ(format_waveform_csv(simulate(PdClass::I, c, 1)), format_waveform_csv(simulate(PdClass::I, c, 1)));
}

TEST(Simulator, NoPulsesWhenRateVanishes) {
  SimulatorConfig c = small_config();
  for (auto& [cls, m] : c.class_models) m.pulses_per_edge = 1e-9;
  for (PdClass cls : kAllClasses) {
    EXPECT_TRUE(ground_truth(cls, c, 0).empty());
    EXPECT_TRUE(detect_pulses(simulate(cls, c, 0)).empty()) << name_of(cls);
  }
}

TEST(Simulator, GroundTruthIsExactlyWhatIsInjected) {
  SimulatorConfig c = small_config();
  c.noise_sigma = 0.0;
  for (PdClass cls : kAllClasses) {
    const auto truth = ground_truth(cls, c, 2);
    EXPECT_EQ(synthesize(c, cls, truth, 0).values().size(), simulate(cls, c, 2).values().size());
    const Waveform rebuilt = synthesize(c, cls, truth, 0);
    const Waveform sim = simulate(cls, c, 2);
    EXPECT_TRUE(std::equal(rebuilt.values().begin(), rebuilt.values().end(), sim.values().begin())) << name_of(cls);
  }
}

TEST(Simulator, EdgeClustering) {
  const SimulatorConfig c = default_config();
  for (PdClass cls : kAllClasses) {
    for (const auto& p : ground_truth(cls, c, 1)) {
      const double start = edge_start(c.excitation, c.capture, p.edge_index);
      const double jitter = c.model(constituents(cls)[p.population]).edge_jitter;
      EXPECT_GE(p.time, start);
      EXPECT_LE(p.time, start + jitter);
      EXPECT_LE(p.peak_time, start + jitter);
      EXPECT_EQ(p.polarity, p.edge_index % 2 == 0 ? 1 : -1);
    }
  }
}

TEST(Simulator, UnionProperty) {
  const SimulatorConfig c = default_config();
  for (PdClass mixed : {PdClass::CI, PdClass::CS, PdClass::SI}) {
    const auto parts = constituents(mixed);
    const auto truth = ground_truth(mixed, c, 4);
    std::vector<InjectedPulse> expected;
    for (int i = 0; i < 2; ++i) {
      auto pop = draw_population(c.model(parts[i]), c.excitation, c.capture, c.pulse_shape,
                                 population_key(c, mixed, parts[i], 4), i);
      expected.insert(expected.end(), pop.begin(), pop.end());
    }
    auto key = [](const InjectedPulse& p) { return std::tuple(p.time, p.amplitude, p.width, p.edge_index); };
    std::vector<std::tuple<double, double, double, int>> a, b;
    for (const auto& p : truth) a.push_back(key(p));
    for (const auto& p : expected) b.push_back(key(p));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b) << name_of(mixed);
  }
}

TEST(Simulator, MorphologyOrderings) {
  const SimulatorConfig c = default_config();
  std::map<PdClass, std::vector<double>> counts, amps, widths;
  for (PdClass cls : {PdClass::C, PdClass::I, PdClass::S}) {
    for (std::uint64_t run = 0; run < 100; ++run) {
      const auto truth = ground_truth(cls, c, run);
      counts[cls].push_back(double(truth.size()));
      for (const auto& p : truth) {
        amps[cls].push_back(p.amplitude);
        widths[cls].push_back(p.width);
      }
    }
  }
  EXPECT_LT(mean(counts[PdClass::C]), mean(counts[PdClass::I]));
  EXPECT_LT(mean(counts[PdClass::C]), mean(counts[PdClass::S]));
  EXPECT_GT(cv(amps[PdClass::S]), cv(amps[PdClass::I]));
  EXPECT_GT(cv(widths[PdClass::I]), cv(widths[PdClass::S]));
}

TEST(Simulator, ValidationErrors) {
  SimulatorConfig c = default_config();
  c.class_models[PdClass::CI] = ClassPulseModel{};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = default_config();
  c.class_models.erase(PdClass::S);
  EXPECT_THROW(ground_truth(PdClass::CS, c, 0), InvalidArgument);
  c = default_config();
  c.class_models[PdClass::C].edge_jitter = 0.01;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = default_config();
  c.class_models[PdClass::C].correlation = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = default_config();
  c.noise_sigma = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Simulator, ContinuousCaptureCoversWholeRecord) {
  SimulatorConfig c = small_config();
  c.capture.mode = CaptureMode::continuous;
  c.excitation.sample_rate = 1e6;
  const Waveform w = simulate(PdClass::C, c, 0);
  EXPECT_NEAR(w.times().back(), c.excitation.duration() + 2 * c.capture.pre_trigger, 2e-6);
}

TEST(Simulator, SegmentedTimestampsOnSampleGrid) {
  const SimulatorConfig c = small_config();
  const Waveform w = simulate(PdClass::I, c, 0);
  for (std::size_t i = 0; i < w.size(); i += 997) {
    const double k = w.times()[i] * c.excitation.sample_rate;
    EXPECT_NEAR(k, std::round(k), 1e-6);
  }
}

TEST(SimulatorConfigJson, RoundTripAndShippedDefaults) {
  const SimulatorConfig c = default_config();
  EXPECT_EQ(nlohmann::json(c).get<SimulatorConfig>(), c);
  std::ifstream in(AWAPD_SOURCE_DIR "/config/sim_default.json");
  ASSERT_TRUE(in.good());
  EXPECT_EQ(nlohmann::json::parse(in).get<SimulatorConfig>(), c);
}

TEST(GroundTruthCsv, Format) {
  const auto truth = ground_truth(PdClass::C, small_config(), 0);
  const std::string csv = format_ground_truth_csv(truth);
  EXPECT_TRUE(csv.starts_with("time_s,amplitude_v,width_s\n"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), std::ptrdiff_t(truth.size() + 1));
}
