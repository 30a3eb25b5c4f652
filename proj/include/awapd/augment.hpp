#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "awapd/error.hpp"
#include "awapd/image.hpp"
#include "awapd/random.hpp"

namespace awapd {

enum class AugmentKind { identity, scale, gaussian_blur, brightness, contrast, shear, rotation, horizontal_flip };

inline constexpr std::array<AugmentKind, 7> kAugmentKinds = {
    AugmentKind::scale,    AugmentKind::gaussian_blur, AugmentKind::brightness,     AugmentKind::contrast,
    AugmentKind::shear,    AugmentKind::rotation,      AugmentKind::horizontal_flip};

inline std::string_view name_of(AugmentKind k) {
  switch (k) {
    case AugmentKind::identity: return "identity";
    case AugmentKind::scale: return "scale";
    case AugmentKind::gaussian_blur: return "gaussian_blur";
    case AugmentKind::brightness: return "brightness";
    case AugmentKind::contrast: return "contrast";
    case AugmentKind::shear: return "shear";
    case AugmentKind::rotation: return "rotation";
    case AugmentKind::horizontal_flip: return "horizontal_flip";
  }
  return "?";
}

inline AugmentKind parse_augment_kind(std::string_view s) {
  if (s == "identity") return AugmentKind::identity;
  for (AugmentKind k : kAugmentKinds) {
    if (name_of(k) == s) return k;
  }
  throw InvalidArgument("unknown augmentation '" + std::string(s) + "'");
}

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const ParamRange&) const = default;
};

// Each variant applies exactly one transform; the kind is drawn uniformly
// from `kinds` and its parameter uniformly from the matching range.
struct AugmentSpec {
  int multiplier = 5;  // images per original, original included
  std::vector<AugmentKind> kinds{kAugmentKinds.begin(), kAugmentKinds.end()};
  ParamRange scale{0.9, 1.1};
  ParamRange blur_sigma{0.5, 1.5};   // pixels
  ParamRange brightness{-0.1, 0.1};  // fraction of full scale
  ParamRange contrast{0.9, 1.1};
  ParamRange shear_deg{-10.0, 10.0};
  ParamRange rotation_deg{-15.0, 15.0};
  Rgb fill = kWhite;

  void validate() const {
    if (multiplier < 1) throw InvalidArgument("augment: multiplier must be >= 1");
    if (multiplier > 1 && kinds.empty()) throw InvalidArgument("augment: no transform kinds enabled");
    for (const auto* r : {&scale, &blur_sigma, &brightness, &contrast, &shear_deg, &rotation_deg}) {
      if (!(r->hi >= r->lo)) throw InvalidArgument("augment: parameter range with hi < lo");
    }
    if (!(scale.lo > 0.0) || !(blur_sigma.lo > 0.0) || !(contrast.lo > 0.0)) {
      throw InvalidArgument("augment: scale, blur sigma and contrast must be positive");
    }
  }

  ParamRange range_for(AugmentKind k) const {
    switch (k) {
      case AugmentKind::scale: return scale;
      case AugmentKind::gaussian_blur: return blur_sigma;
      case AugmentKind::brightness: return brightness;
      case AugmentKind::contrast: return contrast;
      case AugmentKind::shear: return shear_deg;
      case AugmentKind::rotation: return rotation_deg;
      default: return {0.0, 0.0};
    }
  }

  bool operator==(const AugmentSpec&) const = default;
};

struct Transform {
  AugmentKind kind = AugmentKind::identity;
  double parameter = 0.0;
  bool operator==(const Transform&) const = default;
};

struct AugmentedImage {
  RgbImage image;
  Transform transform;
};

namespace detail {

// Inverse-mapped geometric warp: dst(x, y) = src(map(x, y)), exposed regions
// take the fill color.
template <typename Map>
RgbImage warp(const RgbImage& src, Rgb fill, Map&& map) {
  RgbImage dst(src.width, src.height, fill);
  std::array<double, 3> acc{};
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      auto [sx, sy] = map(double(x), double(y));
      if (!sample_bilinear(src, sx, sy, fill, acc)) continue;
      dst.set(x, y, {to_byte(acc[0]), to_byte(acc[1]), to_byte(acc[2])});
    }
  }
  return dst;
}

inline RgbImage gaussian_blur(const RgbImage& src, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;
  const int w = src.width, h = src.height;
  std::vector<double> tmp(std::size_t(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + radius] * src.pixels[src.offset(xx, y) + ch];
        }
        tmp[src.offset(x, y) + ch] = acc;
      }
    }
  }
  RgbImage dst(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + radius] * tmp[src.offset(x, yy) + ch];
        }
        dst.pixels[dst.offset(x, y) + ch] = to_byte(acc);
      }
    }
  }
  return dst;
}

template <typename Fn>
RgbImage map_channels(const RgbImage& src, Fn&& fn) {
  RgbImage dst = src;
  for (auto& v : dst.pixels) v = to_byte(fn(double(v)));
  return dst;
}

}  // namespace detail

inline RgbImage apply_transform(const RgbImage& src, const Transform& t, Rgb fill = kWhite) {
  const double cx = (src.width - 1) / 2.0, cy = (src.height - 1) / 2.0;
  switch (t.kind) {
    case AugmentKind::identity:
      return src;
    case AugmentKind::scale:
      return detail::warp(src, fill, [&](double x, double y) {
        return std::pair{cx + (x - cx) / t.parameter, cy + (y - cy) / t.parameter};
      });
    case AugmentKind::gaussian_blur:
      return detail::gaussian_blur(src, t.parameter);
    case AugmentKind::brightness:
      return detail::map_channels(src, [&](double v) { return v + t.parameter * 255.0; });
    case AugmentKind::contrast:
      return detail::map_channels(src, [&](double v) { return (v - 127.5) * t.parameter + 127.5; });
    case AugmentKind::shear: {
      const double k = std::tan(t.parameter * std::numbers::pi / 180.0);
      return detail::warp(src, fill, [&](double x, double y) { return std::pair{x - k * (y - cy), y}; });
    }
    case AugmentKind::rotation: {
      const double a = t.parameter * std::numbers::pi / 180.0;
      const double c = std::cos(a), s = std::sin(a);
      return detail::warp(src, fill, [&](double x, double y) {
        const double dx = x - cx, dy = y - cy;
        return std::pair{cx + c * dx + s * dy, cy - s * dx + c * dy};
      });
    }
    case AugmentKind::horizontal_flip:
      return flip_horizontal(src);
  }
  return src;
}

// The original followed by multiplier - 1 single-transform variants. A draw
// that reproduces an earlier output pixel-for-pixel is redrawn, so every
// returned image is distinct unless the source is featureless.
inline std::vector<AugmentedImage> augment(const RgbImage& image, const AugmentSpec& spec, std::uint64_t item_seed) {
  spec.validate();
  std::vector<AugmentedImage> out;
  out.reserve(spec.multiplier);
  out.push_back({image, {}});
  for (int v = 1; v < spec.multiplier; ++v) {
    AugmentedImage candidate;
    for (std::uint64_t attempt = 0; attempt < 32; ++attempt) {
      CounterRng rng(hash_words({item_seed, std::uint64_t(v), attempt}));
      const auto kind = spec.kinds[static_cast<std::size_t>(rng.uniform() * spec.kinds.size())];
      const ParamRange r = spec.range_for(kind);
      const Transform t{kind, r.lo + (r.hi - r.lo) * rng.uniform()};
      candidate = {apply_transform(image, t, spec.fill), t};
      bool duplicate = false;
      for (const auto& prev : out) duplicate = duplicate || prev.image == candidate.image;
      if (!duplicate) break;
    }
    out.push_back(std::move(candidate));
  }
  return out;
}

inline void to_json(nlohmann::json& j, const ParamRange& r) { j = nlohmann::json::array({r.lo, r.hi}); }
inline void from_json(const nlohmann::json& j, ParamRange& r) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("parameter range must be a [lo, hi] pair");
  r = {j[0].get<double>(), j[1].get<double>()};
}

inline void to_json(nlohmann::json& j, const Transform& t) {
  j = {{"kind", name_of(t.kind)}, {"parameter", t.parameter}};
}
inline void from_json(const nlohmann::json& j, Transform& t) {
  t.kind = parse_augment_kind(j.at("kind").get<std::string>());
  t.parameter = j.at("parameter").get<double>();
}

inline void to_json(nlohmann::json& j, const AugmentSpec& s) {
  std::vector<std::string> kinds;
  for (auto k : s.kinds) kinds.emplace_back(name_of(k));
  j = {{"multiplier", s.multiplier}, {"kinds", kinds}, {"scale", s.scale}, {"blur_sigma", s.blur_sigma},
       {"brightness", s.brightness}, {"contrast", s.contrast}, {"shear_deg", s.shear_deg},
       {"rotation_deg", s.rotation_deg}, {"fill", nlohmann::json::array({s.fill.r, s.fill.g, s.fill.b})}};
}
inline void from_json(const nlohmann::json& j, AugmentSpec& s) {
  s = AugmentSpec{};
  if (j.contains("multiplier")) j.at("multiplier").get_to(s.multiplier);
  if (j.contains("kinds")) {
    s.kinds.clear();
    for (const auto& k : j.at("kinds")) s.kinds.push_back(parse_augment_kind(k.get<std::string>()));
  }
  if (j.contains("scale")) j.at("scale").get_to(s.scale);
  if (j.contains("blur_sigma")) j.at("blur_sigma").get_to(s.blur_sigma);
  if (j.contains("brightness")) j.at("brightness").get_to(s.brightness);
  if (j.contains("contrast")) j.at("contrast").get_to(s.contrast);
  if (j.contains("shear_deg")) j.at("shear_deg").get_to(s.shear_deg);
  if (j.contains("rotation_deg")) j.at("rotation_deg").get_to(s.rotation_deg);
  if (j.contains("fill")) {
    const auto& f = j.at("fill");
    s.fill = {f.at(0).get<std::uint8_t>(), f.at(1).get<std::uint8_t>(), f.at(2).get<std::uint8_t>()};
  }
  s.validate();
}

}  // namespace awapd
