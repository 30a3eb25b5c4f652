#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "awapd/augment.hpp"
#include "awapd/awa.hpp"
#include "awapd/digest.hpp"
#include "awapd/error.hpp"
#include "awapd/parallel.hpp"
#include "awapd/pd_class.hpp"
#include "awapd/png.hpp"
#include "awapd/random.hpp"

namespace awapd {

enum class Subset { train = 0, val = 1, test = 2 };

inline constexpr std::array<Subset, 3> kAllSubsets = {Subset::train, Subset::val, Subset::test};

inline std::string_view name_of(Subset s) {
  switch (s) {
    case Subset::train: return "train";
    case Subset::val: return "val";
    case Subset::test: return "test";
  }
  return "?";
}

inline Subset parse_subset(std::string_view s) {
  for (Subset x : kAllSubsets) {
    if (name_of(x) == s) return x;
  }
  throw InvalidArgument("unknown subset '" + std::string(s) + "'");
}

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const {
    if (train < 0.0 || val < 0.0 || test < 0.0) throw InvalidArgument("split ratios must be non-negative");
    if (std::abs(train + val + test - 1.0) > 1e-9) {
      throw InvalidArgument("split ratios must sum to 1 (got " + std::to_string(train + val + test) + ")");
    }
  }
  bool operator==(const SplitRatios&) const = default;
};

struct SubsetCounts {
  std::size_t train = 0, val = 0, test = 0;
  bool operator==(const SubsetCounts&) const = default;
};

// Floor of ratio * n per subset; what is left over goes to train.
inline SubsetCounts split_counts(std::size_t n, const SplitRatios& r) {
  r.validate();
  auto fl = [n](double ratio) { return static_cast<std::size_t>(std::floor(ratio * double(n) + 1e-9)); };
  SubsetCounts c{fl(r.train), fl(r.val), fl(r.test)};
  c.train += n - (c.train + c.val + c.test);
  return c;
}

// Seeded Fisher-Yates shuffle of one class's ids, then a contiguous
// train/val/test partition. Returns the subset of each input position.
inline std::vector<Subset> split(std::size_t n_images, PdClass cls, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  if (n_images < 5) throw InvalidArgument("split: each class needs at least 5 images");
  std::vector<std::size_t> order(n_images);
  for (std::size_t i = 0; i < n_images; ++i) order[i] = i;
  CounterRng rng(hash_words({seed, index_of(cls), 0x5B117ULL}));
  for (std::size_t i = n_images - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * double(i + 1));
    std::swap(order[i], order[j]);
  }
  const SubsetCounts c = split_counts(n_images, ratios);
  std::vector<Subset> out(n_images);
  for (std::size_t k = 0; k < n_images; ++k) {
    out[order[k]] = k < c.train ? Subset::train : (k < c.train + c.val ? Subset::val : Subset::test);
  }
  return out;
}

struct ImageRecord {
  std::string image_id;
  PdClass cls = PdClass::C;
  Subset subset = Subset::train;
  std::optional<std::string> parent_id;
  Transform transform;
  std::string digest;
  std::string source_id;

  std::string relative_path() const {
    return std::string(name_of(subset)) + "/" + std::string(name_of(cls)) + "/" + image_id + ".png";
  }
  bool operator==(const ImageRecord&) const = default;
};

struct DatasetManifest {
  int schema_version = 1;
  SplitRatios split_ratios;
  AxisRanges axis_ranges;
  RenderConfig render_config;
  AugmentSpec augment_spec;
  std::uint64_t master_seed = 0;
  std::vector<ImageRecord> records;

  const ImageRecord* find(const std::string& id) const {
    for (const auto& r : records) {
      if (r.image_id == id) return &r;
    }
    return nullptr;
  }

  std::size_t count(PdClass c, Subset s) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [&](const ImageRecord& r) { return r.cls == c && r.subset == s; }));
  }

  bool operator==(const DatasetManifest&) const = default;
};

// One original AWA image's worth of pulses.
struct PulseSource {
  PdClass cls = PdClass::C;
  std::string source_id;
  std::vector<PulseFeatures> pulses;
};

struct BuildOptions {
  RenderConfig render;  // axis ranges are replaced by auto_ranges
  AugmentSpec augment;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

inline std::filesystem::path manifest_path(const std::filesystem::path& dir) { return dir / "manifest.json"; }

// ---- manifest JSON ----------------------------------------------------------

inline void to_json(nlohmann::json& j, const ImageRecord& r) {
  j = {{"image_id", r.image_id},
       {"class", name_of(r.cls)},
       {"subset", name_of(r.subset)},
       {"parent_id", r.parent_id ? nlohmann::json(*r.parent_id) : nlohmann::json(nullptr)},
       {"transform", r.transform},
       {"digest", r.digest},
       {"source_id", r.source_id},
       {"path", r.relative_path()}};
}
inline void from_json(const nlohmann::json& j, ImageRecord& r) {
  r.image_id = j.at("image_id").get<std::string>();
  r.cls = parse_class(j.at("class").get<std::string>());
  r.subset = parse_subset(j.at("subset").get<std::string>());
  if (j.at("parent_id").is_null()) r.parent_id.reset();
  else r.parent_id = j.at("parent_id").get<std::string>();
  r.transform = j.at("transform").get<Transform>();
  r.digest = j.at("digest").get<std::string>();
  r.source_id = j.value("source_id", "");
}

inline void to_json(nlohmann::json& j, const SplitRatios& r) {
  j = nlohmann::json::array({r.train, r.val, r.test});
}
inline void from_json(const nlohmann::json& j, SplitRatios& r) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument("split_ratios must be [train, val, test]");
  r = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
  std::vector<std::string> classes;
  for (PdClass c : kAllClasses) classes.emplace_back(name_of(c));
  j = {{"schema_version", m.schema_version}, {"classes", classes},
       {"split_ratios", m.split_ratios},     {"axis_ranges", m.axis_ranges},
       {"render_config", m.render_config},   {"augment_spec", m.augment_spec},
       {"master_seed", m.master_seed},       {"records", m.records}};
}
inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != 1) throw MalformedInput("manifest: unsupported schema_version");
  j.at("split_ratios").get_to(m.split_ratios);
  j.at("axis_ranges").get_to(m.axis_ranges);
  j.at("render_config").get_to(m.render_config);
  j.at("augment_spec").get_to(m.augment_spec);
  j.at("master_seed").get_to(m.master_seed);
  j.at("records").get_to(m.records);
}

inline std::string format_manifest(const DatasetManifest& m) { return nlohmann::json(m).dump(2) + "\n"; }

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(detail::read_file(path)).get<DatasetManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput("manifest '" + path.string() + "': " + e.what());
  }
}

// ---- build -----------------------------------------------------------------

inline std::string original_id(PdClass c, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05zu", std::string(name_of(c)).c_str(), k);
  return buf;
}

// Renders every source on shared axes, splits each class, augments within
// subsets, and writes <out>/<subset>/<class>/<image_id>.png plus
// manifest.json. Output bytes do not depend on the thread count.
inline DatasetManifest build_dataset(const std::vector<PulseSource>& sources, const BuildOptions& opt,
                                     const std::filesystem::path& out_dir) {
  opt.ratios.validate();
  opt.augment.validate();
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < sources.size(); ++i) by_class[index_of(sources[i].cls)].push_back(i);
  for (PdClass c : kAllClasses) {
    if (by_class[index_of(c)].empty()) {
      throw InvalidArgument("build_dataset: no sources for class " + std::string(name_of(c)));
    }
  }

  std::vector<std::vector<PulseFeatures>> sets;
  sets.reserve(sources.size());
  for (const auto& s : sources) sets.push_back(s.pulses);
  DatasetManifest manifest;
  manifest.split_ratios = opt.ratios;
  manifest.axis_ranges = auto_ranges(sets);
  manifest.render_config = opt.render;
  manifest.render_config.set_ranges(manifest.axis_ranges);
  manifest.render_config.validate();
  manifest.augment_spec = opt.augment;
  manifest.master_seed = opt.seed;

  struct Item {
    std::size_t source;
    PdClass cls;
    std::size_t ordinal;  // position within its class
    Subset subset;
  };
  std::vector<Item> items;
  for (PdClass c : kAllClasses) {
    const auto& idx = by_class[index_of(c)];
    const auto subsets = split(idx.size(), c, opt.ratios, opt.seed);
    for (std::size_t k = 0; k < idx.size(); ++k) items.push_back({idx[k], c, k, subsets[k]});
  }

  std::error_code ec;
  for (Subset s : kAllSubsets) {
    for (PdClass c : kAllClasses) {
      std::filesystem::create_directories(out_dir / std::string(name_of(s)) / std::string(name_of(c)), ec);
      if (ec) throw IoError("cannot create dataset directory under '" + out_dir.string() + "': " + ec.message());
    }
  }

  std::vector<std::vector<ImageRecord>> per_item(items.size());
  parallel_for(items.size(), opt.threads, [&](std::size_t i) {
    const Item& it = items[i];
    const auto& src = sources[it.source];
    const AwaImage original = render_awa(src.pulses, manifest.render_config);
    const auto variants = augment(original.image, opt.augment, hash_words({opt.seed, index_of(it.cls), it.ordinal}));
    const std::string base = original_id(it.cls, it.ordinal);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      ImageRecord rec;
      rec.image_id = v == 0 ? base : base + "_aug" + std::to_string(v);
      rec.cls = it.cls;
      rec.subset = it.subset;
      if (v > 0) rec.parent_id = base;
      rec.transform = variants[v].transform;
      rec.source_id = src.source_id;
      const std::string png = encode_png(variants[v].image);
      rec.digest = sha256_hex(png);
      detail::write_file(out_dir / rec.relative_path(), png);
      per_item[i].push_back(std::move(rec));
    }
  });

  for (auto& recs : per_item) {
    for (auto& r : recs) manifest.records.push_back(std::move(r));
  }
  std::sort(manifest.records.begin(), manifest.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });

  std::map<std::string, std::string> seen;
  for (const auto& r : manifest.records) {
    auto [pos, inserted] = seen.emplace(r.digest, r.image_id);
    if (!inserted) {
      throw InvalidArgument("build_dataset: images " + pos->second + " and " + r.image_id +
                            " are byte-identical; sources must render to distinct images");
    }
  }
  detail::write_file(manifest_path(out_dir), format_manifest(manifest));
  return manifest;
}

// ---- verification ----------------------------------------------------------

struct DigestCollision {
  std::string digest;
  std::vector<std::string> paths;  // relative, sorted
};

struct IntegrityReport {
  std::vector<DigestCollision> cross_subset_collisions;
  std::vector<std::string> parent_violations;  // image ids
  std::vector<std::string> mismatches;         // human-readable manifest/disk disagreements

  bool clean() const { return cross_subset_collisions.empty() && parent_violations.empty() && mismatches.empty(); }
};

inline void to_json(nlohmann::json& j, const IntegrityReport& r) {
  nlohmann::json coll = nlohmann::json::array();
  for (const auto& c : r.cross_subset_collisions) coll.push_back({{"digest", c.digest}, {"paths", c.paths}});
  j = {{"clean", r.clean()},
       {"cross_subset_collisions", coll},
       {"parent_violations", r.parent_violations},
       {"mismatches", r.mismatches}};
}

// Recomputes every digest on disk. Problems are reported, never thrown.
inline IntegrityReport verify_integrity(const DatasetManifest& manifest, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  IntegrityReport report;

  std::map<std::string, std::string> disk;  // relative path -> digest
  for (Subset s : kAllSubsets) {
    const fs::path sub = dir / std::string(name_of(s));
    std::error_code ec;
    if (!fs::is_directory(sub, ec)) continue;
    for (const auto& entry : fs::recursive_directory_iterator(sub, ec)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
      const std::string rel = fs::relative(entry.path(), dir).generic_string();
      try {
        disk[rel] = sha256_hex(detail::read_file(entry.path()));
      } catch (const Error& e) {
        report.mismatches.push_back(rel + ": unreadable (" + e.what() + ")");
      }
    }
  }

  std::map<std::string, std::set<std::string>> subsets_of_digest;
  std::map<std::string, std::vector<std::string>> paths_of_digest;
  for (const auto& [rel, digest] : disk) {
    subsets_of_digest[digest].insert(rel.substr(0, rel.find('/')));
    paths_of_digest[digest].push_back(rel);
  }
  for (const auto& [digest, subs] : subsets_of_digest) {
    if (subs.size() > 1) report.cross_subset_collisions.push_back({digest, paths_of_digest[digest]});
  }

  std::map<std::string, const ImageRecord*> by_id;
  for (const auto& r : manifest.records) by_id[r.image_id] = &r;
  std::set<std::string> listed;
  for (const auto& r : manifest.records) {
    const std::string rel = r.relative_path();
    listed.insert(rel);
    auto it = disk.find(rel);
    if (it == disk.end()) {
      report.mismatches.push_back(rel + ": listed in manifest but missing on disk");
    } else if (it->second != r.digest) {
      report.mismatches.push_back(rel + ": digest mismatch");
    }
    if (r.parent_id) {
      auto pit = by_id.find(*r.parent_id);
      const ImageRecord* parent = pit == by_id.end() ? nullptr : pit->second;
      if (!parent) {
        report.parent_violations.push_back(r.image_id + ": parent " + *r.parent_id + " not in manifest");
      } else if (parent->subset != r.subset) {
        report.parent_violations.push_back(r.image_id);
      }
    }
  }
  for (const auto& [rel, digest] : disk) {
    if (!listed.count(rel)) report.mismatches.push_back(rel + ": on disk but not in manifest");
  }
  return report;
}

}  // namespace awapd
