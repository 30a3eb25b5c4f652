#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "awapd/image.hpp"

namespace awapd {

inline constexpr int kFeatureImageSize = 128;
inline constexpr int kGridCells = 8;
inline constexpr int kForegroundThreshold = 20;  // max(255 - channel) above this is foreground
inline constexpr std::size_t kFeatureLength = 74;

// Binary foreground mask, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const { return bits[std::size_t(y) * width + x] != 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
};

inline bool is_foreground(Rgb c) {
  const int darkest = std::max({255 - int(c.r), 255 - int(c.g), 255 - int(c.b)});
  return darkest > kForegroundThreshold;
}

inline Mask segment_foreground(const RgbImage& image, int resize_to = kFeatureImageSize) {
  const RgbImage img = resize_bilinear(image, resize_to, resize_to);
  Mask m{resize_to, resize_to, std::vector<std::uint8_t>(std::size_t(resize_to) * resize_to)};
  for (int y = 0; y < resize_to; ++y)
    for (int x = 0; x < resize_to; ++x) m.bits[std::size_t(y) * resize_to + x] = is_foreground(img.at(x, y)) ? 1 : 0;
  return m;
}

// Handcrafted description of an AWA image on a 128x128 raster. Every moment is
// accumulated in integer arithmetic, so values do not depend on pixel order.
struct FeatureVector {
  double kurtosis = 0.0;  // Pearson (non-excess) of (R+G+B)/3; 0 for a flat image
  double fg_count = 0.0;
  double fg_fraction = 0.0;
  double bbox_width = 0.0;
  double bbox_height = 0.0;
  double aspect_ratio = 0.0;          // bbox_width / bbox_height, 0 when empty
  std::array<double, 6> rgb_stats{};  // R mean, R std, G mean, G std, B mean, B std over foreground
  std::array<double, 64> grid_occupancy{};  // row-major 8x8, row 0 at the top

  // Model input. fg_count (a fixed multiple of fg_fraction) and aspect_ratio
  // (bbox_width / bbox_height) are left out, giving 74 values.
  std::vector<double> to_array() const {
    std::vector<double> v;
    v.reserve(kFeatureLength);
    v.push_back(kurtosis);
    v.push_back(fg_fraction);
    v.push_back(bbox_width);
    v.push_back(bbox_height);
    v.insert(v.end(), rgb_stats.begin(), rgb_stats.end());
    v.insert(v.end(), grid_occupancy.begin(), grid_occupancy.end());
    return v;
  }

  bool operator==(const FeatureVector&) const = default;
};

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {"kurtosis", "fg_fraction", "bbox_width", "bbox_height",
                                  "r_mean",   "r_std",       "g_mean",     "g_std",
                                  "b_mean",   "b_std"};
    for (int r = 0; r < kGridCells; ++r)
      for (int c = 0; c < kGridCells; ++c) n.push_back("grid_r" + std::to_string(r) + "_c" + std::to_string(c));
    return n;
  }();
  return names;
}

inline FeatureVector extract(const RgbImage& image) {
  const int size = kFeatureImageSize;
  const RgbImage img = resize_bilinear(image, size, size);
  const Mask mask = segment_foreground(img, size);
  FeatureVector f;
  const auto n_pixels = static_cast<std::int64_t>(size) * size;

  // Grayscale moments on s = R+G+B (gray = s/3); kurtosis is scale free.
  __int128 s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  std::array<std::int64_t, 3> c1{}, c2{};
  std::int64_t fg = 0;
  int min_x = size, max_x = -1, min_y = size, max_y = -1;
  std::array<std::int64_t, kGridCells * kGridCells> cell_counts{};
  const int cell = size / kGridCells;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Rgb c = img.at(x, y);
      const __int128 s = int(c.r) + int(c.g) + int(c.b);
      s1 += s;
      s2 += s * s;
      s3 += s * s * s;
      s4 += s * s * s * s;
      if (!mask.at(x, y)) continue;
      ++fg;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
      const std::array<int, 3> ch = {c.r, c.g, c.b};
      for (int k = 0; k < 3; ++k) {
        c1[k] += ch[k];
        c2[k] += std::int64_t(ch[k]) * ch[k];
      }
      ++cell_counts[(y / cell) * kGridCells + (x / cell)];
    }
  }

  const __int128 n = n_pixels;
  // n^2 * variance and n^4 * fourth central moment, exactly.
  const __int128 m2n = n * s2 - s1 * s1;
  const __int128 m4n = n * n * n * s4 - 4 * n * n * s3 * s1 + 6 * n * s2 * s1 * s1 - 3 * s1 * s1 * s1 * s1;
  const double gray_variance = static_cast<double>(m2n) / (double(n_pixels) * double(n_pixels)) / 9.0;
  if (gray_variance >= 1e-12) {
    const long double m2 = static_cast<long double>(m2n);
    f.kurtosis = static_cast<double>(static_cast<long double>(m4n) / (m2 * m2));
  }

  f.fg_count = double(fg);
  f.fg_fraction = double(fg) / double(n_pixels);
  if (fg > 0) {
    f.bbox_width = double(max_x - min_x + 1);
    f.bbox_height = double(max_y - min_y + 1);
    f.aspect_ratio = f.bbox_width / f.bbox_height;
    for (int k = 0; k < 3; ++k) {
      const double mean = double(c1[k]) / double(fg);
      const __int128 var_n2 = __int128(fg) * c2[k] - __int128(c1[k]) * c1[k];
      f.rgb_stats[2 * k] = mean;
      f.rgb_stats[2 * k + 1] = std::sqrt(static_cast<double>(var_n2)) / double(fg);
    }
  }
  for (std::size_t i = 0; i < cell_counts.size(); ++i) f.grid_occupancy[i] = double(cell_counts[i]) / double(cell * cell);
  return f;
}

}  // namespace awapd
