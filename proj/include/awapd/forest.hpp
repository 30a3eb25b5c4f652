#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "awapd/error.hpp"
#include "awapd/parallel.hpp"
#include "awapd/random.hpp"
#include "awapd/waveform.hpp"

namespace awapd {

inline constexpr int kForestFormatVersion = 1;

struct ForestConfig {
  int n_trees = 200;
  std::optional<int> max_depth;  // unlimited when empty
  int min_samples_leaf = 1;
  int features_per_split = 8;  // floor(sqrt(74))
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate(std::size_t n_features) const {
    if (n_trees < 1) throw InvalidArgument("forest: n_trees must be >= 1");
    if (features_per_split < 1 || std::size_t(features_per_split) > n_features) {
      throw InvalidArgument("forest: features_per_split must be in [1, n_features]");
    }
    if (min_samples_leaf < 1) throw InvalidArgument("forest: min_samples_leaf must be >= 1");
    if (max_depth && *max_depth < 0) throw InvalidArgument("forest: max_depth must be >= 0");
  }
  bool operator==(const ForestConfig&) const = default;
};

// Internal nodes have feature >= 0 and route x[feature] <= threshold left.
// Leaves have feature == -1 and carry the (bootstrap-weighted) class counts.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::uint32_t> counts;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  bool operator==(const Tree&) const = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<std::string> feature_names;
  std::vector<std::string> classes;  // canonical order; label k is classes[k]
  ForestConfig config;
  bool operator==(const ForestModel&) const = default;
};

// Row-major training matrix with integer labels in [0, n_classes).
struct TrainingSet {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

struct Prediction {
  int label = 0;
  std::vector<double> vote_fractions;
};

// Split quality as an exact fraction. Minimizing weighted Gini impurity is
// equivalent to maximizing sum_k L_k^2 / n_L + sum_k R_k^2 / n_R; that value
// is num / den with num = SL * n_R + SR * n_L and den = n_L * n_R.
struct SplitScore {
  __int128 num = 0;
  __int128 den = 1;
};

inline bool better(const SplitScore& a, const SplitScore& b) { return a.num * b.den > b.num * a.den; }

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  SplitScore score;
};

inline SplitScore split_score(std::span<const std::int64_t> left, std::span<const std::int64_t> right) {
  __int128 sl = 0, sr = 0, nl = 0, nr = 0;
  for (auto c : left) {
    sl += __int128(c) * c;
    nl += c;
  }
  for (auto c : right) {
    sr += __int128(c) * c;
    nr += c;
  }
  return {sl * nr + sr * nl, nl * nr};
}

// Best threshold over `features`, examined in ascending index order with
// ascending thresholds; only a strictly better score replaces the incumbent,
// so ties go to the lowest feature index and then the lowest threshold.
// `rows` may contain repeats (bootstrap multiplicity).
inline SplitChoice best_split(const TrainingSet& data, std::span<const std::size_t> rows,
                              std::span<const int> features, int n_classes, int min_samples_leaf) {
  std::vector<int> ordered(features.begin(), features.end());
  std::sort(ordered.begin(), ordered.end());
  SplitChoice best;
  std::vector<std::pair<double, int>> column(rows.size());
  std::vector<std::int64_t> total(n_classes, 0), left(n_classes), right(n_classes);
  for (std::size_t r : rows) ++total[data.labels[r]];
  const auto n = static_cast<std::int64_t>(rows.size());
  for (int f : ordered) {
    for (std::size_t k = 0; k < rows.size(); ++k) column[k] = {data.rows[rows[k]][f], data.labels[rows[k]]};
    std::sort(column.begin(), column.end());
    std::fill(left.begin(), left.end(), 0);
    for (std::size_t k = 0; k + 1 < column.size(); ++k) {
      ++left[column[k].second];
      if (column[k].first == column[k + 1].first) continue;
      const auto nl = static_cast<std::int64_t>(k + 1);
      if (nl < min_samples_leaf || n - nl < min_samples_leaf) continue;
      for (int c = 0; c < n_classes; ++c) right[c] = total[c] - left[c];
      const SplitScore s = split_score(left, right);
      if (!best.found || better(s, best.score)) {
        best.found = true;
        best.feature = f;
        best.threshold = column[k].first + (column[k + 1].first - column[k].first) / 2.0;
        best.score = s;
      }
    }
  }
  return best;
}

namespace detail {

inline bool constant_feature(const TrainingSet& data, std::span<const std::size_t> rows, int f) {
  const double v0 = data.rows[rows[0]][f];
  for (std::size_t r : rows) {
    if (data.rows[r][f] != v0) return false;
  }
  return true;
}

inline Tree grow_tree(const TrainingSet& data, int n_classes, const ForestConfig& cfg, std::uint64_t tree_seed) {
  CounterRng rng(tree_seed);
  const std::size_t n = data.rows.size();
  const int n_features = static_cast<int>(data.rows.front().size());
  std::vector<std::size_t> root_rows(n);
  if (cfg.bootstrap) {
    for (auto& r : root_rows) r = static_cast<std::size_t>(rng.uniform() * double(n));
  } else {
    for (std::size_t i = 0; i < n; ++i) root_rows[i] = i;
  }

  Tree tree;
  struct Work {
    int node;
    int depth;
    std::vector<std::size_t> rows;
  };
  std::vector<Work> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, std::move(root_rows)});
  std::vector<int> feature_pool(n_features);
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    std::vector<std::uint32_t> counts(n_classes, 0);
    for (std::size_t r : w.rows) ++counts[data.labels[r]];
    const int present = static_cast<int>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));

    SplitChoice choice;
    const bool can_split = present > 1 && (!cfg.max_depth || w.depth < *cfg.max_depth) &&
                           w.rows.size() >= 2 * std::size_t(cfg.min_samples_leaf);
    if (can_split) {
      // Draw features without replacement until features_per_split
      // non-constant ones are collected (or the pool runs out).
      for (int f = 0; f < n_features; ++f) feature_pool[f] = f;
      std::vector<int> chosen;
      for (int k = 0; k < n_features && int(chosen.size()) < cfg.features_per_split; ++k) {
        const int j = k + static_cast<int>(rng.uniform() * double(n_features - k));
        std::swap(feature_pool[k], feature_pool[j]);
        if (!constant_feature(data, w.rows, feature_pool[k])) chosen.push_back(feature_pool[k]);
      }
      if (!chosen.empty()) choice = best_split(data, w.rows, chosen, n_classes, cfg.min_samples_leaf);
    }

    if (!choice.found) {
      tree.nodes[w.node].counts = std::move(counts);
      continue;
    }
    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : w.rows) (data.rows[r][choice.feature] <= choice.threshold ? lrows : rrows).push_back(r);
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[w.node];
    node.feature = choice.feature;
    node.threshold = choice.threshold;
    node.left = l;
    node.right = l + 1;
    // Right pushed first so the left subtree is grown (and draws) first.
    stack.push_back({l + 1, w.depth + 1, std::move(rrows)});
    stack.push_back({l, w.depth + 1, std::move(lrows)});
  }
  return tree;
}

inline int argmax_lowest(std::span<const std::uint32_t> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

// Trains one tree per seed hash(seed, tree_index); single-class input yields
// single-leaf trees.
inline ForestModel train_forest(const TrainingSet& data, std::vector<std::string> classes,
                                std::vector<std::string> feature_names, const ForestConfig& cfg,
                                unsigned threads = 1) {
  if (data.rows.size() < 2 || data.rows.size() != data.labels.size()) {
    throw InvalidArgument("forest: need at least 2 labelled samples");
  }
  const std::size_t n_features = data.rows.front().size();
  for (const auto& r : data.rows) {
    if (r.size() != n_features) throw InvalidArgument("forest: ragged feature matrix");
  }
  if (feature_names.size() != n_features) throw InvalidArgument("forest: feature name count mismatch");
  cfg.validate(n_features);
  const int n_classes = static_cast<int>(classes.size());
  for (int y : data.labels) {
    if (y < 0 || y >= n_classes) throw InvalidArgument("forest: label out of range");
  }

  ForestModel model;
  model.classes = std::move(classes);
  model.feature_names = std::move(feature_names);
  model.config = cfg;
  model.trees.resize(cfg.n_trees);
  parallel_for(model.trees.size(), threads, [&](std::size_t t) {
    model.trees[t] = detail::grow_tree(data, n_classes, cfg, hash_words({cfg.seed, t}));
  });
  return model;
}

inline const TreeNode& leaf_for(const Tree& tree, std::span<const double> x) {
  const TreeNode* node = &tree.nodes[0];
  while (!node->is_leaf()) node = &tree.nodes[x[node->feature] <= node->threshold ? node->left : node->right];
  return *node;
}

// Each tree votes its leaf's majority class; the forest takes the majority of
// votes. Ties resolve to the lowest class index.
inline Prediction predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.feature_names.size()) {
    throw InvalidArgument("predict: expected " + std::to_string(model.feature_names.size()) + " features, got " +
                          std::to_string(x.size()));
  }
  std::vector<std::uint32_t> votes(model.classes.size(), 0);
  for (const Tree& t : model.trees) ++votes[detail::argmax_lowest(leaf_for(t, x).counts)];
  Prediction p;
  p.label = detail::argmax_lowest(votes);
  p.vote_fractions.resize(votes.size());
  for (std::size_t k = 0; k < votes.size(); ++k) p.vote_fractions[k] = double(votes[k]) / double(model.trees.size());
  return p;
}

// ---- serialization ---------------------------------------------------------

inline void to_json(nlohmann::json& j, const ForestConfig& c) {
  j = {{"n_trees", c.n_trees},
       {"max_depth", c.max_depth ? nlohmann::json(*c.max_depth) : nlohmann::json(nullptr)},
       {"min_samples_leaf", c.min_samples_leaf},
       {"features_per_split", c.features_per_split},
       {"bootstrap", c.bootstrap},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, ForestConfig& c) {
  c = ForestConfig{};
  if (j.contains("n_trees")) j.at("n_trees").get_to(c.n_trees);
  if (j.contains("max_depth") && !j.at("max_depth").is_null()) c.max_depth = j.at("max_depth").get<int>();
  if (j.contains("min_samples_leaf")) j.at("min_samples_leaf").get_to(c.min_samples_leaf);
  if (j.contains("features_per_split")) j.at("features_per_split").get_to(c.features_per_split);
  if (j.contains("bootstrap")) j.at("bootstrap").get_to(c.bootstrap);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
}

inline nlohmann::json model_to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) nodes.push_back({{"counts", n.counts}});
      else nodes.push_back({{"feat", n.feature}, {"thr", n.threshold}, {"l", n.left}, {"r", n.right}});
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"version", kForestFormatVersion}, {"classes", m.classes}, {"feature_names", m.feature_names},
          {"config", m.config}, {"trees", std::move(trees)}};
}

inline ForestModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("version")) throw ModelFormatError("model: missing version field");
    if (j.at("version").get<int>() != kForestFormatVersion) {
      throw ModelFormatError("model: unsupported version " + j.at("version").dump());
    }
    ForestModel m;
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.config = j.at("config").get<ForestConfig>();
    const int n_features = static_cast<int>(m.feature_names.size());
    for (const auto& jt : j.at("trees")) {
      Tree t;
      const auto& nodes = jt.at("nodes");
      const int n_nodes = static_cast<int>(nodes.size());
      for (const auto& jn : nodes) {
        TreeNode n;
        if (jn.contains("counts")) {
          n.counts = jn.at("counts").get<std::vector<std::uint32_t>>();
          if (n.counts.size() != m.classes.size()) throw ModelFormatError("model: leaf histogram size mismatch");
        } else {
          n.feature = jn.at("feat").get<int>();
          n.threshold = jn.at("thr").get<double>();
          n.left = jn.at("l").get<int>();
          n.right = jn.at("r").get<int>();
          if (n.feature < 0 || n.feature >= n_features) throw ModelFormatError("model: feature index out of range");
          if (n.left <= 0 || n.right <= 0 || n.left >= n_nodes || n.right >= n_nodes) {
            throw ModelFormatError("model: child index out of range");
          }
        }
        t.nodes.push_back(std::move(n));
      }
      if (t.nodes.empty()) throw ModelFormatError("model: empty tree");
      m.trees.push_back(std::move(t));
    }
    if (m.trees.empty()) throw ModelFormatError("model: no trees");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model: ") + e.what());
  }
}

inline void save_model(const ForestModel& m, const std::filesystem::path& path) {
  detail::write_file(path, model_to_json(m).dump() + "\n");
}

inline ForestModel load_model(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError("model '" + path.string() + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace awapd
