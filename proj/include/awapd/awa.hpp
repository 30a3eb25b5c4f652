#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "awapd/error.hpp"
#include "awapd/image.hpp"
#include "awapd/peaks.hpp"

namespace awapd {

// Amplitude-width-area description of one discharge pulse.
struct PulseFeatures {
  double amplitude = 0.0;  // volts
  double width = 0.0;      // seconds, half-prominence
  double area = 0.0;       // volt-seconds, amplitude * width
  double time = 0.0;       // seconds

  bool operator==(const PulseFeatures&) const = default;
};

inline PulseFeatures make_pulse(double amplitude, double width, double time = 0.0) {
  return {amplitude, width, amplitude * width, time};
}

inline std::vector<PulseFeatures> extract_features(std::span<const Peak> peaks) {
  std::vector<PulseFeatures> out;
  out.reserve(peaks.size());
  for (const Peak& p : peaks) out.push_back(make_pulse(p.height, p.width, p.time));
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Range&) const = default;
};

struct AxisRanges {
  Range amplitude;
  Range area;
  Range width;
  bool operator==(const AxisRanges&) const = default;
};

struct RenderConfig {
  int image_width = 256;
  int image_height = 256;
  Range amplitude_range{0.0, 1.0};
  Range area_range{0.0, 1.0};
  Range width_range{0.0, 1.0};
  int point_radius = 2;
  int margin = 8;
  Rgb background = kWhite;

  void set_ranges(const AxisRanges& r) {
    amplitude_range = r.amplitude;
    area_range = r.area;
    width_range = r.width;
  }

  void validate() const {
    auto ok = [](Range r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.hi > r.lo; };
    if (!ok(amplitude_range) || !ok(area_range) || !ok(width_range)) {
      throw InvalidArgument("render config: ranges must satisfy hi > lo");
    }
    if (image_width < 64 || image_height < 64) throw InvalidArgument("render config: image dims must be >= 64");
    if (point_radius < 1) throw InvalidArgument("render config: point_radius must be >= 1");
    if (margin < 0 || 2 * margin >= std::min(image_width, image_height)) {
      throw InvalidArgument("render config: margin out of range");
    }
  }

  bool operator==(const RenderConfig&) const = default;
};

struct AwaImage {
  RgbImage image;
  RenderConfig config;
  std::size_t n_pulses = 0;
};

namespace detail {

struct ColorAnchor {
  double t;
  std::array<double, 3> rgb;
};

inline constexpr std::array<ColorAnchor, 3> kWidthColormap = {{
    {0.0, {68.0, 1.0, 84.0}},
    {0.5, {33.0, 145.0, 140.0}},
    {1.0, {253.0, 231.0, 37.0}},
}};

}  // namespace detail

// Normalized color parameter for a width; monotone non-decreasing in width.
inline double width_parameter(double width, const RenderConfig& cfg) {
  const double t = (width - cfg.width_range.lo) / (cfg.width_range.hi - cfg.width_range.lo);
  return std::clamp(t, 0.0, 1.0);
}

inline Rgb width_to_color(double width, const RenderConfig& cfg) {
  const double t = width_parameter(width, cfg);
  const auto& a = detail::kWidthColormap;
  const std::size_t seg = t < a[1].t ? 0 : 1;
  const double u = (t - a[seg].t) / (a[seg + 1].t - a[seg].t);
  std::array<std::uint8_t, 3> c{};
  for (int ch = 0; ch < 3; ++ch) {
    c[ch] = to_byte(a[seg].rgb[ch] + (a[seg + 1].rgb[ch] - a[seg].rgb[ch]) * u);
  }
  return {c[0], c[1], c[2]};
}

// Continuous plot coordinates, clamped to the plot rectangle; y grows upward.
inline double amplitude_to_x(double amplitude, const RenderConfig& cfg) {
  const double span = cfg.image_width - 2.0 * cfg.margin;
  const double f = (amplitude - cfg.amplitude_range.lo) / (cfg.amplitude_range.hi - cfg.amplitude_range.lo);
  return cfg.margin + std::clamp(f, 0.0, 1.0) * span;
}

inline double area_to_y(double area, const RenderConfig& cfg) {
  const double span = cfg.image_height - 2.0 * cfg.margin;
  const double f = (area - cfg.area_range.lo) / (cfg.area_range.hi - cfg.area_range.lo);
  return cfg.image_height - cfg.margin - std::clamp(f, 0.0, 1.0) * span;
}

inline bool in_plot_range(const PulseFeatures& p, const RenderConfig& cfg) {
  return p.amplitude >= cfg.amplitude_range.lo && p.amplitude <= cfg.amplitude_range.hi &&
         p.area >= cfg.area_range.lo && p.area <= cfg.area_range.hi;
}

inline int disc_pixel_count(int radius) {
  int n = 0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) ++n;
  return n;
}

// Pulses are drawn in increasing time order; later discs overwrite earlier ones.
inline AwaImage render_awa(std::span<const PulseFeatures> pulses, const RenderConfig& cfg) {
  cfg.validate();
  AwaImage out{RgbImage(cfg.image_width, cfg.image_height, cfg.background), cfg, pulses.size()};
  std::vector<std::size_t> order(pulses.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pulses[a].time < pulses[b].time; });
  const int r = cfg.point_radius;
  for (std::size_t k : order) {
    const PulseFeatures& p = pulses[k];
    const int cx = static_cast<int>(std::lround(amplitude_to_x(p.amplitude, cfg)));
    const int cy = static_cast<int>(std::lround(area_to_y(p.area, cfg)));
    const Rgb color = width_to_color(p.width, cfg);
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (dx * dx + dy * dy > r * r) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= cfg.image_width || y >= cfg.image_height) continue;
        out.image.set(x, y, color);
      }
    }
  }
  return out;
}

// Shared axes for a whole dataset: [0, 1.05 * global max] per quantity.
inline AxisRanges auto_ranges(std::span<const std::vector<PulseFeatures>> pulse_sets) {
  double amp = 0.0, area = 0.0, width = 0.0;
  bool any = false;
  for (const auto& set : pulse_sets) {
    for (const auto& p : set) {
      any = true;
      amp = std::max(amp, p.amplitude);
      area = std::max(area, p.area);
      width = std::max(width, p.width);
    }
  }
  if (!any) throw InvalidArgument("auto_ranges: no pulses in any set");
  if (!(amp > 0.0) || !(area > 0.0) || !(width > 0.0)) {
    throw InvalidArgument("auto_ranges: maxima must be positive");
  }
  return {{0.0, 1.05 * amp}, {0.0, 1.05 * area}, {0.0, 1.05 * width}};
}

// JSON mirrors of the render types.

inline void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }
inline void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("range must be a [lo, hi] pair");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
}

inline void to_json(nlohmann::json& j, const AxisRanges& r) {
  j = {{"amplitude_range", r.amplitude}, {"area_range", r.area}, {"width_range", r.width}};
}
inline void from_json(const nlohmann::json& j, AxisRanges& r) {
  j.at("amplitude_range").get_to(r.amplitude);
  j.at("area_range").get_to(r.area);
  j.at("width_range").get_to(r.width);
}

inline void to_json(nlohmann::json& j, const Rgb& c) { j = nlohmann::json::array({c.r, c.g, c.b}); }
inline void from_json(const nlohmann::json& j, Rgb& c) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument("color must be an [r, g, b] triple");
  c = {j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

inline void to_json(nlohmann::json& j, const RenderConfig& c) {
  j = {{"image_width", c.image_width}, {"image_height", c.image_height},
       {"amplitude_range", c.amplitude_range}, {"area_range", c.area_range},
       {"width_range", c.width_range}, {"point_radius", c.point_radius},
       {"margin", c.margin}, {"background", c.background}};
}
inline void from_json(const nlohmann::json& j, RenderConfig& c) {
  c = RenderConfig{};
  if (j.contains("image_width")) j.at("image_width").get_to(c.image_width);
  if (j.contains("image_height")) j.at("image_height").get_to(c.image_height);
  if (j.contains("amplitude_range")) j.at("amplitude_range").get_to(c.amplitude_range);
  if (j.contains("area_range")) j.at("area_range").get_to(c.area_range);
  if (j.contains("width_range")) j.at("width_range").get_to(c.width_range);
  if (j.contains("point_radius")) j.at("point_radius").get_to(c.point_radius);
  if (j.contains("margin")) j.at("margin").get_to(c.margin);
  if (j.contains("background")) j.at("background").get_to(c.background);
}

}  // namespace awapd
