#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "awapd/awa.hpp"
#include "awapd/dataset.hpp"
#include "awapd/error.hpp"
#include "awapd/features.hpp"
#include "awapd/peaks.hpp"
#include "awapd/waveform.hpp"

namespace awapd {

// ---- DetectionConfig --------------------------------------------------------

inline void to_json(nlohmann::json& j, const DetectionConfig& c) {
  j = {{"min_height", c.min_height ? nlohmann::json(*c.min_height) : nlohmann::json(nullptr)},
       {"min_prominence", c.min_prominence ? nlohmann::json(*c.min_prominence) : nlohmann::json(nullptr)},
       {"absolute_value", c.absolute_value}};
}
inline void from_json(const nlohmann::json& j, DetectionConfig& c) {
  c = DetectionConfig{};
  if (j.contains("min_height") && !j.at("min_height").is_null()) c.min_height = j.at("min_height").get<double>();
  if (j.contains("min_prominence") && !j.at("min_prominence").is_null()) {
    c.min_prominence = j.at("min_prominence").get<double>();
  }
  if (j.contains("absolute_value")) j.at("absolute_value").get_to(c.absolute_value);
}

// ---- pulse lists --------------------------------------------------------------

inline constexpr const char* kPulseCsvHeader = "time_s,height_v,prominence_v,width_s";

inline std::string format_pulse_csv(std::span<const Peak> peaks) {
  std::string out = std::string(kPulseCsvHeader) + "\n";
  for (const Peak& p : peaks) {
    out += detail::format_double(p.time) + "," + detail::format_double(p.height) + "," +
           detail::format_double(p.prominence) + "," + detail::format_double(p.width) + "\n";
  }
  return out;
}

// Reads a pulse list back as AWA features (amplitude = height). The header
// line is required so a waveform CSV cannot be mistaken for a pulse list.
inline std::vector<PulseFeatures> parse_pulse_csv(std::string_view text, const std::string& what = "pulse list") {
  std::vector<PulseFeatures> out;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  if (text.starts_with("\xEF\xBB\xBF")) pos = 3;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kPulseCsvHeader) {
        throw MalformedInput(what + ": expected header '" + kPulseCsvHeader + "' on line " + std::to_string(line_no));
      }
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != 4) throw MalformedInput(what + ": line " + std::to_string(line_no) + " needs 4 fields");
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const auto d = detail::parse_double(detail::trim(fields[k]));
      if (!d) throw MalformedInput(what + ": non-numeric field on line " + std::to_string(line_no));
      v[k] = *d;
    }
    if (!(v[1] > 0.0) || !(v[3] > 0.0)) {
      throw MalformedInput(what + ": height and width must be positive on line " + std::to_string(line_no));
    }
    out.push_back(make_pulse(v[1], v[3], v[0]));
  }
  if (!header_seen) throw MalformedInput(what + ": empty file");
  return out;
}

inline std::vector<PulseFeatures> read_pulse_csv(const std::filesystem::path& path) {
  return parse_pulse_csv(detail::read_file(path), path.string());
}

// ---- feature tables ------------------------------------------------------------

struct FeatureRow {
  std::string image_id;
  PdClass cls = PdClass::C;
  Subset subset = Subset::train;
  std::vector<double> values;
  bool operator==(const FeatureRow&) const = default;
};

inline std::string format_features_csv(std::span<const FeatureRow> rows) {
  std::string out = "image_id,class,subset";
  for (const auto& n : feature_names()) out += "," + n;
  out += "\n";
  for (const auto& r : rows) {
    out += r.image_id + "," + std::string(name_of(r.cls)) + "," + std::string(name_of(r.subset));
    for (double v : r.values) out += "," + detail::format_double(v);
    out += "\n";
  }
  return out;
}

inline std::vector<FeatureRow> parse_features_csv(std::string_view text, const std::string& what = "features") {
  std::vector<FeatureRow> out;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  const std::size_t n_fields = 3 + kFeatureLength;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != n_fields) {
      throw MalformedInput(what + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(n_fields));
    }
    if (!header_seen) {
      if (detail::trim(fields[0]) != "image_id") throw MalformedInput(what + ": missing header");
      header_seen = true;
      continue;
    }
    FeatureRow r;
    r.image_id = std::string(detail::trim(fields[0]));
    try {
      r.cls = parse_class(detail::trim(fields[1]));
      r.subset = parse_subset(detail::trim(fields[2]));
    } catch (const Error& e) {
      throw MalformedInput(what + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    for (std::size_t k = 3; k < n_fields; ++k) {
      const auto d = detail::parse_double(detail::trim(fields[k]));
      if (!d) throw MalformedInput(what + ": non-numeric feature on line " + std::to_string(line_no));
      r.values.push_back(*d);
    }
    out.push_back(std::move(r));
  }
  if (!header_seen) throw MalformedInput(what + ": empty file");
  return out;
}

inline std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path) {
  return parse_features_csv(detail::read_file(path), path.string());
}

// Extracts features for every manifest record (optionally one subset only),
// in manifest order.
inline std::vector<FeatureRow> extract_dataset_features(const DatasetManifest& m, const std::filesystem::path& dir,
                                                        std::optional<Subset> only = std::nullopt,
                                                        unsigned threads = 1) {
  std::vector<const ImageRecord*> recs;
  for (const auto& r : m.records) {
    if (!only || r.subset == *only) recs.push_back(&r);
  }
  std::vector<FeatureRow> rows(recs.size());
  parallel_for(recs.size(), threads, [&](std::size_t i) {
    const ImageRecord& r = *recs[i];
    rows[i] = {r.image_id, r.cls, r.subset, extract(read_png(dir / r.relative_path())).to_array()};
  });
  return rows;
}

}  // namespace awapd
