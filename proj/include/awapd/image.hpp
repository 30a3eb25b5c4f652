#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "awapd/error.hpp"

namespace awapd {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

// Row-major 8-bit RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = kWhite) : width(w), height(h), pixels(std::size_t(w) * h * 3) {
    if (w <= 0 || h <= 0) throw InvalidArgument("image dimensions must be positive");
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
      pixels[i] = fill.r;
      pixels[i + 1] = fill.g;
      pixels[i + 2] = fill.b;
    }
  }

  std::size_t offset(int x, int y) const { return (std::size_t(y) * width + x) * 3; }
  Rgb at(int x, int y) const {
    const auto o = offset(x, y);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto o = offset(x, y);
    pixels[o] = c.r;
    pixels[o + 1] = c.g;
    pixels[o + 2] = c.b;
  }

  bool operator==(const RgbImage&) const = default;
};

// Round half away from zero, then clamp to a byte.
inline std::uint8_t to_byte(double v) {
  const double r = std::round(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

// Bilinear sample at continuous pixel coordinates (pixel centers at integers).
// Samples whose support falls outside the image take `fill` for the missing
// neighbours; returns false when the point is entirely outside.
inline bool sample_bilinear(const RgbImage& img, double x, double y, Rgb fill, std::array<double, 3>& out) {
  if (x <= -1.0 || y <= -1.0 || x >= img.width || y >= img.height) return false;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  out = {0.0, 0.0, 0.0};
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      if (wgt == 0.0) continue;
      const int px = x0 + dx, py = y0 + dy;
      Rgb c = fill;
      if (px >= 0 && py >= 0 && px < img.width && py < img.height) c = img.at(px, py);
      out[0] += wgt * c.r;
      out[1] += wgt * c.g;
      out[2] += wgt * c.b;
    }
  }
  return true;
}

// Bilinear resize with pixel-center alignment and edge clamping. Same-size
// resizes return an exact copy.
inline RgbImage resize_bilinear(const RgbImage& src, int w, int h) {
  if (src.width == w && src.height == h) return src;
  RgbImage dst(w, h);
  const double sx = double(src.width) / w, sy = double(src.height) / h;
  for (int y = 0; y < h; ++y) {
    const double fyc = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(src.height - 1));
    const int y0 = static_cast<int>(fyc);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = fyc - y0;
    for (int x = 0; x < w; ++x) {
      const double fxc = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(src.width - 1));
      const int x0 = static_cast<int>(fxc);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = fxc - x0;
      const auto a = src.offset(x0, y0), b = src.offset(x1, y0), c = src.offset(x0, y1), d = src.offset(x1, y1);
      const auto o = dst.offset(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = src.pixels[a + ch] * (1.0 - fx) + src.pixels[b + ch] * fx;
        const double bot = src.pixels[c + ch] * (1.0 - fx) + src.pixels[d + ch] * fx;
        dst.pixels[o + ch] = to_byte(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return dst;
}

inline RgbImage flip_horizontal(const RgbImage& src) {
  RgbImage dst = src;
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) dst.set(src.width - 1 - x, y, src.at(x, y));
  }
  return dst;
}

}  // namespace awapd
