#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "awapd/awa.hpp"
#include "awapd/error.hpp"
#include "awapd/pd_class.hpp"
#include "awapd/random.hpp"
#include "awapd/waveform.hpp"

namespace awapd {

// Trapezoidal switching excitation. Only its edge timing drives the PD
// channel; the voltage itself is emitted for plotting.
struct ExcitationConfig {
  double frequency = 60.0;
  double duty = 0.5;
  double edge_time = 18e-6;
  double peak_voltage = 9.0e3;
  int n_cycles = 20;
  double sample_rate = 50e6;

  void validate() const {
    if (!(frequency > 0.0)) throw InvalidArgument("excitation: frequency must be > 0");
    if (!(duty > 0.0 && duty < 1.0)) throw InvalidArgument("excitation: duty must be in (0, 1)");
    if (!(edge_time > 0.0 && edge_time < duty / frequency)) {
      throw InvalidArgument("excitation: edge_time must be in (0, duty/frequency)");
    }
    if (n_cycles < 1) throw InvalidArgument("excitation: n_cycles must be >= 1");
    if (!(sample_rate * edge_time >= 10.0)) {
      throw InvalidArgument("excitation: sample_rate * edge_time must be >= 10");
    }
  }

  double period() const { return 1.0 / frequency; }
  double duration() const { return n_cycles / frequency; }
  int n_edges() const { return 2 * n_cycles; }

  bool operator==(const ExcitationConfig&) const = default;
};

// Pulse population of one single-source discharge mechanism.
// Amplitude and width are log-normal; `correlation` couples them through a
// shared standard-normal factor. With probability outlier_probability a
// pulse's amplitude is multiplied by outlier_scale.
struct ClassPulseModel {
  double pulses_per_edge = 1.0;  // Poisson mean
  double edge_jitter = 500e-6;   // placement window after each edge start
  double amplitude_mu = 0.0;     // ln volts
  double amplitude_sigma = 0.1;
  double width_mu = -15.0;  // ln seconds
  double width_sigma = 0.1;
  double correlation = 0.0;
  double outlier_probability = 0.0;
  double outlier_scale = 1.0;

  void validate() const {
    if (!(pulses_per_edge > 0.0)) throw InvalidArgument("class model: pulses_per_edge must be > 0");
    if (!(edge_jitter > 0.0)) throw InvalidArgument("class model: edge_jitter must be > 0");
    if (!(amplitude_sigma >= 0.0) || !(width_sigma >= 0.0)) {
      throw InvalidArgument("class model: sigmas must be >= 0");
    }
    if (!(std::abs(correlation) <= 1.0)) throw InvalidArgument("class model: |correlation| must be <= 1");
    if (!(outlier_probability >= 0.0 && outlier_probability <= 1.0)) {
      throw InvalidArgument("class model: outlier_probability must be in [0, 1]");
    }
    if (!(outlier_scale > 0.0)) throw InvalidArgument("class model: outlier_scale must be > 0");
  }

  bool operator==(const ClassPulseModel&) const = default;
};

// exp(-decay * u) * sin(2 pi carrier * u) for u >= 0. Each injected pulse uses
// this shape stretched in time to hit its drawn width.
struct PulseShape {
  double carrier_frequency = 2e6;
  double decay_constant = 2.76e7;

  void validate() const {
    if (!(carrier_frequency > 0.0) || !(decay_constant > 0.0)) {
      throw InvalidArgument("pulse shape: carrier_frequency and decay_constant must be > 0");
    }
  }
  bool operator==(const PulseShape&) const = default;
};

enum class CaptureMode { continuous, edge_windows };

// Edge-window capture keeps only [edge - pre_trigger, edge + jitter + post_trigger]
// around every switching edge, like segmented oscilloscope memory.
struct CaptureConfig {
  CaptureMode mode = CaptureMode::edge_windows;
  double pre_trigger = 2e-6;
  double post_trigger = 20e-6;
  bool operator==(const CaptureConfig&) const = default;
};

struct SimulatorConfig {
  ExcitationConfig excitation;
  std::map<PdClass, ClassPulseModel> class_models;  // single sources C, I, S only
  double noise_sigma = 2e-3;
  PulseShape pulse_shape;
  CaptureConfig capture;
  std::uint64_t master_seed = 0;

  const ClassPulseModel& model(PdClass single) const {
    auto it = class_models.find(single);
    if (it == class_models.end()) {
      throw InvalidArgument("simulator: no pulse model for class " + std::string(name_of(single)));
    }
    return it->second;
  }

  void validate() const {
    excitation.validate();
    pulse_shape.validate();
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("simulator: noise_sigma must be >= 0");
    if (capture.pre_trigger < 0.0 || capture.post_trigger < 0.0) {
      throw InvalidArgument("simulator: capture margins must be >= 0");
    }
    for (const auto& [cls, m] : class_models) {
      if (is_mixed(cls)) {
        throw InvalidArgument("simulator: mixed class " + std::string(name_of(cls)) +
                              " is defined by its constituents and takes no model");
      }
      m.validate();
      if (m.edge_jitter >= excitation.duty / excitation.frequency ||
          m.edge_jitter >= (1.0 - excitation.duty) / excitation.frequency) {
        throw InvalidArgument("simulator: edge_jitter must fit inside a half period");
      }
    }
  }

  bool operator==(const SimulatorConfig&) const = default;
};

// One pulse as injected. `time` is the onset; the rectified peak occurs at
// peak_time with magnitude `amplitude`.
struct InjectedPulse {
  double time = 0.0;
  double peak_time = 0.0;
  double amplitude = 0.0;
  double width = 0.0;
  int polarity = 1;
  int edge_index = 0;
  int population = 0;  // constituent index within a mixed class

  bool operator==(const InjectedPulse&) const = default;
};

// Geometry of the unit pulse shape, solved once per PulseShape.
struct ShapeGeometry {
  double peak_offset = 0.0;  // onset to peak, canonical seconds
  double peak_value = 0.0;
  double half_width = 0.0;   // half-prominence width, canonical seconds
  double half_period = 0.0;
};

namespace detail {

inline double unit_shape(const PulseShape& s, double u) {
  if (u < 0.0) return 0.0;
  return std::exp(-s.decay_constant * u) * std::sin(2.0 * std::numbers::pi * s.carrier_frequency * u);
}

inline double bisect(auto f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// The first lobe peaks where tan(omega u) = omega / decay; its half-height
// crossings are found by bisection on either side of the peak. Later lobes
// are smaller by exp(-decay * half_period) each, so the rectified first lobe
// has prominence equal to its height.
inline ShapeGeometry solve_shape(const PulseShape& s) {
  s.validate();
  const double omega = 2.0 * std::numbers::pi * s.carrier_frequency;
  ShapeGeometry g;
  g.half_period = std::numbers::pi / omega;
  g.peak_offset = std::atan(omega / s.decay_constant) / omega;
  g.peak_value = detail::unit_shape(s, g.peak_offset);
  const double level = 0.5 * g.peak_value;
  auto f = [&](double u) { return detail::unit_shape(s, u) - level; };
  const double left = detail::bisect(f, 0.0, g.peak_offset);
  const double right = detail::bisect(f, g.peak_offset, g.half_period);
  g.half_width = right - left;
  return g;
}

// Envelope multiple of the half-prominence width after which a pulse
// contributes less than 1e-9 of its peak; synthesis stops there.
inline double pulse_extent(const PulseShape& s, const ShapeGeometry& g, double width) {
  const double scale = width / g.half_width;
  return scale * std::log(1e9) / s.decay_constant;
}

inline std::uint64_t population_key(const SimulatorConfig& cfg, PdClass cls, PdClass constituent,
                                    std::uint64_t run_id) {
  return hash_words({cfg.master_seed, index_of(cls), index_of(constituent), run_id});
}

inline double edge_start(const ExcitationConfig& ex, const CaptureConfig& cap, int edge_index) {
  const int cycle = edge_index / 2;
  const double offset = cap.pre_trigger;
  return offset + cycle * ex.period() + ((edge_index % 2) ? ex.duty * ex.period() : 0.0);
}

// Draws the pulses of one single-source population. Rising edges yield
// positive pulses, falling edges negative ones. Every random quantity comes
// from a stream keyed by (population key, edge, pulse), so the draws do not
// depend on evaluation order.
inline std::vector<InjectedPulse> draw_population(const ClassPulseModel& m, const ExcitationConfig& ex,
                                                  const CaptureConfig& cap, const PulseShape& shape,
                                                  std::uint64_t key, int population = 0) {
  m.validate();
  const ShapeGeometry geo = solve_shape(shape);
  const double dt = 1.0 / ex.sample_rate;
  std::vector<InjectedPulse> out;
  for (int e = 0; e < ex.n_edges(); ++e) {
    CounterRng count_rng(hash_words({key, std::uint64_t(e), 0xC0C0ULL}));
    std::poisson_distribution<int> count_dist(m.pulses_per_edge);
    const int k = count_dist(count_rng);
    const double start = edge_start(ex, cap, e);
    for (int p = 0; p < k; ++p) {
      CounterRng rng(hash_words({key, std::uint64_t(e), std::uint64_t(p) + 1}));
      std::normal_distribution<double> normal(0.0, 1.0);
      const double z_shared = normal(rng);
      const double z_own = normal(rng);
      const double placement = rng.uniform();
      const double outlier_draw = rng.uniform();
      double amplitude = std::exp(m.amplitude_mu + m.amplitude_sigma * z_shared);
      if (outlier_draw < m.outlier_probability) amplitude *= m.outlier_scale;
      const double rho = m.correlation;
      const double width =
          std::exp(m.width_mu + m.width_sigma * (rho * z_shared + std::sqrt(1.0 - rho * rho) * z_own));
      // Onset and the sampled peak both stay inside the edge window.
      const double to_peak = width / geo.half_width * geo.peak_offset;
      const double room = std::max(0.0, m.edge_jitter - to_peak - dt);
      InjectedPulse pulse;
      pulse.time = start + placement * room;
      pulse.peak_time = pulse.time + to_peak;
      pulse.amplitude = amplitude;
      pulse.width = width;
      pulse.polarity = (e % 2 == 0) ? 1 : -1;
      pulse.edge_index = e;
      pulse.population = population;
      out.push_back(pulse);
    }
  }
  return out;
}

inline bool pulse_time_less(const InjectedPulse& a, const InjectedPulse& b) {
  if (a.time != b.time) return a.time < b.time;
  return a.population < b.population;
}

// Exact injected pulses of simulate(cls, cfg, run_id), ordered by onset.
// Mixed classes are the union of their two constituent populations.
inline std::vector<InjectedPulse> ground_truth(PdClass cls, const SimulatorConfig& cfg, std::uint64_t run_id) {
  cfg.validate();
  std::vector<InjectedPulse> all;
  const auto parts = constituents(cls);
  const int n_parts = is_mixed(cls) ? 2 : 1;
  for (int i = 0; i < n_parts; ++i) {
    auto pop = draw_population(cfg.model(parts[i]), cfg.excitation, cfg.capture, cfg.pulse_shape,
                               population_key(cfg, cls, parts[i], run_id), i);
    all.insert(all.end(), pop.begin(), pop.end());
  }
  std::stable_sort(all.begin(), all.end(), pulse_time_less);
  return all;
}

namespace detail {

struct Segment {
  std::int64_t begin;  // global sample index, inclusive
  std::int64_t end;    // exclusive
};

inline std::vector<Segment> capture_segments(const SimulatorConfig& cfg, PdClass cls) {
  const auto& ex = cfg.excitation;
  const double rate = ex.sample_rate;
  const auto total = static_cast<std::int64_t>(std::floor((ex.duration() + 2.0 * cfg.capture.pre_trigger) * rate));
  if (cfg.capture.mode == CaptureMode::continuous) return {{0, total}};
  double jitter = 0.0;
  const auto parts = constituents(cls);
  for (PdClass p : parts) jitter = std::max(jitter, cfg.model(p).edge_jitter);
  std::vector<Segment> segs;
  for (int e = 0; e < ex.n_edges(); ++e) {
    const double s = edge_start(ex, cfg.capture, e);
    auto b = static_cast<std::int64_t>(std::ceil((s - cfg.capture.pre_trigger) * rate));
    auto en = static_cast<std::int64_t>(std::floor((s + jitter + cfg.capture.post_trigger) * rate)) + 1;
    b = std::clamp<std::int64_t>(b, 0, total);
    en = std::clamp<std::int64_t>(en, 0, total);
    if (!segs.empty() && b <= segs.back().end) {
      segs.back().end = std::max(segs.back().end, en);
    } else if (en > b) {
      segs.push_back({b, en});
    }
  }
  return segs;
}

}  // namespace detail

// Renders a list of pulses (plus optional white noise) onto the capture grid
// of `cfg`. Samples sit at t = i / sample_rate for global index i.
inline Waveform synthesize(const SimulatorConfig& cfg, PdClass cls, const std::vector<InjectedPulse>& pulses,
                           std::uint64_t noise_key, std::string source_id = {}) {
  const auto segs = detail::capture_segments(cfg, cls);
  const double rate = cfg.excitation.sample_rate;
  std::vector<std::int64_t> seg_offset;
  std::size_t n = 0;
  for (const auto& s : segs) {
    seg_offset.push_back(static_cast<std::int64_t>(n));
    n += static_cast<std::size_t>(s.end - s.begin);
  }
  std::vector<double> times(n), values(n, 0.0);
  for (std::size_t k = 0; k < segs.size(); ++k) {
    for (std::int64_t i = segs[k].begin; i < segs[k].end; ++i) {
      times[static_cast<std::size_t>(seg_offset[k] + i - segs[k].begin)] = static_cast<double>(i) / rate;
    }
  }

  const ShapeGeometry geo = solve_shape(cfg.pulse_shape);
  for (const InjectedPulse& p : pulses) {
    const double scale = p.width / geo.half_width;
    const double gain = p.polarity * p.amplitude / geo.peak_value;
    const auto i0 = static_cast<std::int64_t>(std::ceil(p.time * rate));
    const auto i1 = static_cast<std::int64_t>(std::floor((p.time + pulse_extent(cfg.pulse_shape, geo, p.width)) * rate));
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const std::int64_t lo = std::max(i0, segs[k].begin);
      const std::int64_t hi = std::min(i1 + 1, segs[k].end);
      for (std::int64_t i = lo; i < hi; ++i) {
        const double u = (static_cast<double>(i) / rate - p.time) / scale;
        values[static_cast<std::size_t>(seg_offset[k] + i - segs[k].begin)] += gain * detail::unit_shape(cfg.pulse_shape, u);
      }
    }
  }

  if (cfg.noise_sigma > 0.0) {
    CounterRng rng(noise_key);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (double& v : values) v += noise(rng);
  }
  return Waveform(std::move(times), std::move(values), cls, std::move(source_id));
}

inline std::string run_source_id(PdClass cls, std::uint64_t run_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_run%05llu", std::string(name_of(cls)).c_str(),
                static_cast<unsigned long long>(run_id));
  return buf;
}

// PD channel waveform for one (class, run). Fully determined by its arguments.
inline Waveform simulate(PdClass cls, const SimulatorConfig& cfg, std::uint64_t run_id) {
  const auto pulses = ground_truth(cls, cfg, run_id);
  return synthesize(cfg, cls, pulses, hash_words({cfg.master_seed, index_of(cls), run_id, 0x4E015EULL}),
                    run_source_id(cls, run_id));
}

// Corner points of the trapezoidal excitation over the simulated span.
inline Waveform excitation_waveform(const SimulatorConfig& cfg) {
  const auto& ex = cfg.excitation;
  std::vector<double> t, v;
  t.push_back(0.0);
  v.push_back(0.0);
  for (int e = 0; e < ex.n_edges(); ++e) {
    const double s = edge_start(ex, cfg.capture, e);
    const bool rising = e % 2 == 0;
    if (s > t.back()) {
      t.push_back(s);
      v.push_back(rising ? 0.0 : ex.peak_voltage);
    }
    t.push_back(s + ex.edge_time);
    v.push_back(rising ? ex.peak_voltage : 0.0);
  }
  const double end = ex.duration() + 2.0 * cfg.capture.pre_trigger;
  if (end > t.back()) {
    t.push_back(end);
    v.push_back(v.back());
  }
  return Waveform(std::move(t), std::move(v), std::nullopt, "excitation");
}

// Engineering defaults: excitation from the measurement setup (60 Hz, 50 %
// duty, 18 us edges, 20 cycles); class models are tuned stand-ins that
// reproduce the qualitative pattern shapes, not measured statistics.
//   C: few pulses, tight amplitude/width cluster, occasional high outliers.
//   I: narrow amplitude spread, broad width spread (vertical in area).
//   S: broad amplitude spread strongly correlated with width (fan).
inline SimulatorConfig default_config() {
  SimulatorConfig cfg;
  ClassPulseModel c;
  c.pulses_per_edge = 0.3;
  c.amplitude_mu = std::log(0.6);
  c.amplitude_sigma = 0.08;
  c.width_mu = std::log(250e-9);
  c.width_sigma = 0.1;
  c.correlation = 0.0;
  c.outlier_probability = 0.08;
  c.outlier_scale = 3.0;

  ClassPulseModel i;
  i.pulses_per_edge = 1.2;
  i.amplitude_mu = std::log(0.3);
  i.amplitude_sigma = 0.15;
  i.width_mu = std::log(700e-9);
  i.width_sigma = 0.5;
  i.correlation = 0.0;

  ClassPulseModel s;
  s.pulses_per_edge = 1.5;
  s.amplitude_mu = std::log(0.35);
  s.amplitude_sigma = 0.6;
  s.width_mu = std::log(400e-9);
  s.width_sigma = 0.2;
  s.correlation = 0.8;

  cfg.class_models = {{PdClass::C, c}, {PdClass::I, i}, {PdClass::S, s}};
  return cfg;
}

// ---- JSON ------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ExcitationConfig& e) {
  j = {{"frequency", e.frequency}, {"duty", e.duty}, {"edge_time", e.edge_time},
       {"peak_voltage", e.peak_voltage}, {"n_cycles", e.n_cycles}, {"sample_rate", e.sample_rate}};
}
inline void from_json(const nlohmann::json& j, ExcitationConfig& e) {
  e = ExcitationConfig{};
  if (j.contains("frequency")) j.at("frequency").get_to(e.frequency);
  if (j.contains("duty")) j.at("duty").get_to(e.duty);
  if (j.contains("edge_time")) j.at("edge_time").get_to(e.edge_time);
  if (j.contains("peak_voltage")) j.at("peak_voltage").get_to(e.peak_voltage);
  if (j.contains("n_cycles")) j.at("n_cycles").get_to(e.n_cycles);
  if (j.contains("sample_rate")) j.at("sample_rate").get_to(e.sample_rate);
}

inline void to_json(nlohmann::json& j, const ClassPulseModel& m) {
  j = {{"pulses_per_edge", m.pulses_per_edge}, {"edge_jitter", m.edge_jitter},
       {"amplitude_mu", m.amplitude_mu}, {"amplitude_sigma", m.amplitude_sigma},
       {"width_mu", m.width_mu}, {"width_sigma", m.width_sigma},
       {"correlation", m.correlation}, {"outlier_probability", m.outlier_probability},
       {"outlier_scale", m.outlier_scale}};
}
inline void from_json(const nlohmann::json& j, ClassPulseModel& m) {
  m = ClassPulseModel{};
  j.at("pulses_per_edge").get_to(m.pulses_per_edge);
  if (j.contains("edge_jitter")) j.at("edge_jitter").get_to(m.edge_jitter);
  j.at("amplitude_mu").get_to(m.amplitude_mu);
  j.at("amplitude_sigma").get_to(m.amplitude_sigma);
  j.at("width_mu").get_to(m.width_mu);
  j.at("width_sigma").get_to(m.width_sigma);
  if (j.contains("correlation")) j.at("correlation").get_to(m.correlation);
  if (j.contains("outlier_probability")) j.at("outlier_probability").get_to(m.outlier_probability);
  if (j.contains("outlier_scale")) j.at("outlier_scale").get_to(m.outlier_scale);
}

inline void to_json(nlohmann::json& j, const PulseShape& s) {
  j = {{"carrier_frequency", s.carrier_frequency}, {"decay_constant", s.decay_constant}};
}
inline void from_json(const nlohmann::json& j, PulseShape& s) {
  j.at("carrier_frequency").get_to(s.carrier_frequency);
  j.at("decay_constant").get_to(s.decay_constant);
}

inline void to_json(nlohmann::json& j, const CaptureConfig& c) {
  j = {{"mode", c.mode == CaptureMode::continuous ? "continuous" : "edge_windows"},
       {"pre_trigger", c.pre_trigger}, {"post_trigger", c.post_trigger}};
}
inline void from_json(const nlohmann::json& j, CaptureConfig& c) {
  c = CaptureConfig{};
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "continuous") c.mode = CaptureMode::continuous;
    else if (mode == "edge_windows") c.mode = CaptureMode::edge_windows;
    else throw InvalidArgument("capture mode must be 'continuous' or 'edge_windows'");
  }
  if (j.contains("pre_trigger")) j.at("pre_trigger").get_to(c.pre_trigger);
  if (j.contains("post_trigger")) j.at("post_trigger").get_to(c.post_trigger);
}

inline void to_json(nlohmann::json& j, const SimulatorConfig& c) {
  nlohmann::json models = nlohmann::json::object();
  for (const auto& [cls, m] : c.class_models) models[std::string(name_of(cls))] = m;
  j = {{"excitation", c.excitation}, {"class_models", models}, {"noise_sigma", c.noise_sigma},
       {"pulse_shape", c.pulse_shape}, {"capture", c.capture}, {"master_seed", c.master_seed}};
}
inline void from_json(const nlohmann::json& j, SimulatorConfig& c) {
  c = SimulatorConfig{};
  if (j.contains("excitation")) j.at("excitation").get_to(c.excitation);
  for (const auto& [name, m] : j.at("class_models").items()) {
    c.class_models[parse_class(name)] = m.get<ClassPulseModel>();
  }
  if (j.contains("noise_sigma")) j.at("noise_sigma").get_to(c.noise_sigma);
  if (j.contains("pulse_shape")) j.at("pulse_shape").get_to(c.pulse_shape);
  if (j.contains("capture")) j.at("capture").get_to(c.capture);
  if (j.contains("master_seed")) j.at("master_seed").get_to(c.master_seed);
  c.validate();
}

// Ground-truth CSV: time_s, amplitude_v, width_s (onset time, rectified peak, half-prominence width).
inline std::string format_ground_truth_csv(const std::vector<InjectedPulse>& pulses) {
  std::string out = "time_s,amplitude_v,width_s\n";
  for (const auto& p : pulses) {
    out += detail::format_double(p.time) + ',' + detail::format_double(p.amplitude) + ',' +
           detail::format_double(p.width) + '\n';
  }
  return out;
}

}  // namespace awapd
