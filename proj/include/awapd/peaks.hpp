#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "awapd/error.hpp"
#include "awapd/waveform.hpp"

namespace awapd {

// One accepted local maximum with its prominence and half-prominence width.
struct Peak {
  std::size_t index = 0;
  double time = 0.0;
  double height = 0.0;
  double prominence = 0.0;
  double width = 0.0;
  double left_cross = 0.0;
  double right_cross = 0.0;

  bool operator==(const Peak&) const = default;
};

// Unset thresholds are derived from the signal's noise floor, see
// resolve_thresholds().
struct DetectionConfig {
  std::optional<double> min_height;
  std::optional<double> min_prominence;
  bool absolute_value = true;
};

// The interval a peak's prominence was measured over: inclusive sample range
// bounded by the nearest strictly higher samples (or the signal ends).
struct ProminenceInfo {
  double prominence = 0.0;
  std::size_t left_bound = 0;
  std::size_t right_bound = 0;
};

struct WidthInfo {
  double width = 0.0;
  double left_cross = 0.0;
  double right_cross = 0.0;
};

struct Thresholds {
  double min_height = 0.0;
  double min_prominence = 0.0;
};

// Indices of strict local maxima. Plateaus report their leftmost sample; the
// first and last samples are never peaks.
inline std::vector<std::size_t> find_local_maxima(std::span<const double> x) {
  std::vector<std::size_t> peaks;
  const std::size_t n = x.size();
  if (n < 3) return peaks;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i] > x[i - 1]) {
      std::size_t ahead = i + 1;
      while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back(i);
        i = ahead;
        continue;
      }
    }
    ++i;
  }
  return peaks;
}

inline std::vector<std::size_t> find_local_maxima(const Waveform& w) {
  return find_local_maxima(w.values());
}

namespace detail {

inline bool is_local_maximum(std::span<const double> x, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) return false;
  if (!(x[i] > x[i - 1])) return false;
  std::size_t ahead = i + 1;
  while (ahead + 1 < x.size() && x[ahead] == x[i]) ++ahead;
  return x[ahead] < x[i];
}

// Per-index scan state for the linear-time prominence pass: for every sample
// the minimum over the open stretch back to the previous strictly higher
// sample, and where that stretch ends.
struct SideScan {
  std::vector<double> min_value;
  std::vector<std::size_t> bound;
};

// Monotonic stack sweep. `forward` scans left to right (left side of every
// sample); otherwise right to left.
inline SideScan scan_side(std::span<const double> x, bool forward) {
  const std::size_t n = x.size();
  SideScan out{std::vector<double>(n), std::vector<std::size_t>(n)};
  struct Entry {
    std::size_t index;
    double stretch_min;  // min over samples between the entry below and this one
  };
  std::vector<Entry> stack;
  stack.reserve(64);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = forward ? step : n - 1 - step;
    double acc = std::numeric_limits<double>::infinity();
    while (!stack.empty() && x[stack.back().index] <= x[i]) {
      acc = std::min({acc, stack.back().stretch_min, x[stack.back().index]});
      stack.pop_back();
    }
    out.min_value[i] = acc;
    if (stack.empty()) {
      out.bound[i] = forward ? 0 : n - 1;
    } else {
      out.bound[i] = forward ? stack.back().index + 1 : stack.back().index - 1;
    }
    stack.push_back({i, acc});
  }
  return out;
}

inline double interpolate_time(std::span<const double> t, std::span<const double> x, std::size_t a,
                               std::size_t b, double level) {
  // a and b are adjacent samples straddling level
  const double frac = (level - x[a]) / (x[b] - x[a]);
  return t[a] + frac * (t[b] - t[a]);
}

}  // namespace detail

// Prominence of a single local maximum by direct interval extension.
inline ProminenceInfo prominence_info(std::span<const double> x, std::size_t peak) {
  if (peak >= x.size() || !detail::is_local_maximum(x, peak)) {
    throw InvalidArgument("prominence: index " + std::to_string(peak) + " is not a local maximum");
  }
  const double h = x[peak];
  double left_min = h;
  std::size_t i = peak;
  while (i > 0 && x[i - 1] <= h) {
    --i;
    left_min = std::min(left_min, x[i]);
  }
  const std::size_t left_bound = i;
  double right_min = h;
  std::size_t j = peak;
  while (j + 1 < x.size() && x[j + 1] <= h) {
    ++j;
    right_min = std::min(right_min, x[j]);
  }
  return {h - std::max(left_min, right_min), left_bound, j};
}

inline double prominence(std::span<const double> x, std::size_t peak) {
  return prominence_info(x, peak).prominence;
}

inline double prominence(const Waveform& w, std::size_t peak) { return prominence(w.values(), peak); }

// Width at height - prominence/2 with linearly interpolated crossings,
// clamped to the prominence interval when the level is never reached.
inline WidthInfo width_at_half_prominence(std::span<const double> t, std::span<const double> x,
                                          std::size_t peak, const ProminenceInfo& prom) {
  const double level = x[peak] - prom.prominence / 2.0;
  std::size_t i = peak;
  while (i > prom.left_bound && x[i] > level) --i;
  double left = (x[i] <= level) ? detail::interpolate_time(t, x, i, i + 1, level) : t[prom.left_bound];
  std::size_t j = peak;
  while (j < prom.right_bound && x[j] > level) ++j;
  double right = (x[j] <= level) ? detail::interpolate_time(t, x, j, j - 1, level) : t[prom.right_bound];
  return {right - left, left, right};
}

// Noise-referenced defaults: the larger of 5x the median absolute value and
// the universal threshold sigma*(sqrt(2 ln n) + 1) with sigma = MAD/0.6745.
// A noise-free record (zero median) falls back to 1% of its peak magnitude.
inline Thresholds resolve_thresholds(std::span<const double> x, const DetectionConfig& cfg) {
  auto derived = [&] {
    std::vector<double> mags(x.size());
    std::transform(x.begin(), x.end(), mags.begin(), [](double v) { return std::abs(v); });
    const double peak_mag = mags.empty() ? 0.0 : *std::max_element(mags.begin(), mags.end());
    auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    double median = mags.empty() ? 0.0 : *mid;
    if (mags.size() % 2 == 0 && !mags.empty()) {
      median = 0.5 * (median + *std::max_element(mags.begin(), mid));
    }
    const double sigma = median / 0.6745;
    const double n = static_cast<double>(std::max<std::size_t>(x.size(), 2));
    double h = std::max(5.0 * median, sigma * (std::sqrt(2.0 * std::log(n)) + 1.0));
    if (h <= 0.0) h = 0.01 * peak_mag;
    if (h <= 0.0) h = std::numeric_limits<double>::min();
    return h;
  };
  Thresholds th;
  std::optional<double> noise;
  auto noise_level = [&] {
    if (!noise) noise = derived();
    return *noise;
  };
  th.min_height = cfg.min_height ? *cfg.min_height : noise_level();
  if (cfg.min_prominence) {
    th.min_prominence = *cfg.min_prominence;
  } else {
    th.min_prominence = th.min_height > 0.0 ? th.min_height : noise_level();
  }
  if (th.min_height < 0.0) throw InvalidArgument("min_height must be >= 0");
  if (!(th.min_prominence > 0.0)) throw InvalidArgument("min_prominence must be > 0");
  return th;
}

// All local maxima with height >= min_height and prominence >= min_prominence,
// in time order, with widths populated.
inline std::vector<Peak> detect_pulses(std::span<const double> t, std::span<const double> raw,
                                       const DetectionConfig& cfg) {
  std::vector<double> rectified;
  std::span<const double> x = raw;
  if (cfg.absolute_value) {
    rectified.resize(raw.size());
    std::transform(raw.begin(), raw.end(), rectified.begin(), [](double v) { return std::abs(v); });
    x = rectified;
  }
  const Thresholds th = resolve_thresholds(x, cfg);

  std::vector<Peak> out;
  const auto maxima = find_local_maxima(x);
  std::vector<std::size_t> candidates;
  for (std::size_t i : maxima) {
    if (x[i] >= th.min_height) candidates.push_back(i);
  }
  if (candidates.empty()) return out;

  const auto left = detail::scan_side(x, true);
  const auto right = detail::scan_side(x, false);
  for (std::size_t i : candidates) {
    ProminenceInfo prom;
    prom.prominence = x[i] - std::max(left.min_value[i], right.min_value[i]);
    prom.left_bound = left.bound[i];
    prom.right_bound = right.bound[i];
    if (prom.prominence < th.min_prominence) continue;
    const WidthInfo wi = width_at_half_prominence(t, x, i, prom);
    out.push_back({i, t[i], x[i], prom.prominence, wi.width, wi.left_cross, wi.right_cross});
  }
  return out;
}

inline std::vector<Peak> detect_pulses(const Waveform& w, const DetectionConfig& cfg = {}) {
  return detect_pulses(w.times(), w.values(), cfg);
}

}  // namespace awapd
