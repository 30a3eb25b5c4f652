#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "awapd/error.hpp"
#include "awapd/image.hpp"
#include "awapd/parallel.hpp"
#include "awapd/pd_class.hpp"

namespace awapd {

inline constexpr const char* kEvalReportSchema = "awapd.eval_report";
inline constexpr int kEvalReportVersion = 1;

// Row-normalized confusion report. `counts` is authoritative when present;
// `confusion` holds the derived percentages (confusion[i][j] = 100 *
// counts[i][j] / row_total[i]).
struct EvalReport {
  std::vector<std::string> classes;
  std::vector<std::vector<std::int64_t>> counts;  // may be empty for foreign reports
  std::vector<std::vector<double>> confusion;
  std::vector<double> per_class_accuracy;
  std::vector<bool> flagged_rows;  // true when the class has no test samples
  double overall_accuracy = 0.0;
  std::int64_t n_test = 0;
  double mean_test_time_per_image_ms = 0.0;
  nlohmann::json model = nlohmann::json::object();

  std::size_t size() const { return classes.size(); }
};

inline std::vector<std::string> canonical_class_names() {
  std::vector<std::string> out;
  for (PdClass c : kAllClasses) out.emplace_back(name_of(c));
  return out;
}

// Builds the report from an exact count matrix. Percentages of populated rows
// sum to 100 up to a few ulps.
inline EvalReport report_from_counts(std::vector<std::string> classes, std::vector<std::vector<std::int64_t>> counts) {
  const std::size_t k = classes.size();
  if (counts.size() != k) throw InvalidArgument("evaluation: count matrix size mismatch");
  EvalReport r;
  r.classes = std::move(classes);
  r.confusion.assign(k, std::vector<double>(k, 0.0));
  r.per_class_accuracy.assign(k, 0.0);
  r.flagged_rows.assign(k, false);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (counts[i].size() != k) throw InvalidArgument("evaluation: count matrix is not square");
    std::int64_t row = 0;
    for (auto c : counts[i]) {
      if (c < 0) throw InvalidArgument("evaluation: negative count");
      row += c;
    }
    r.n_test += row;
    correct += counts[i][i];
    if (row == 0) {
      r.flagged_rows[i] = true;
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) r.confusion[i][j] = 100.0 * double(counts[i][j]) / double(row);
    r.per_class_accuracy[i] = r.confusion[i][i];
  }
  if (r.n_test == 0) throw InvalidArgument("evaluation: empty test set");
  r.overall_accuracy = 100.0 * double(correct) / double(r.n_test);
  r.counts = std::move(counts);
  return r;
}

// Runs `predict` over every row and tallies the confusion matrix. Only the
// prediction loop is timed.
inline EvalReport evaluate(const std::function<int(std::span<const double>)>& predict,
                           std::span<const std::vector<double>> rows, std::span<const int> labels,
                           std::vector<std::string> classes = canonical_class_names(), unsigned threads = 1,
                           nlohmann::json model = nlohmann::json::object()) {
  if (rows.empty()) throw InvalidArgument("evaluation: empty test set");
  if (rows.size() != labels.size()) throw InvalidArgument("evaluation: rows and labels differ in length");
  const int k = static_cast<int>(classes.size());
  for (int y : labels) {
    if (y < 0 || y >= k) throw InvalidArgument("evaluation: label out of range");
  }
  std::vector<int> predicted(rows.size());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(rows.size(), threads, [&](std::size_t i) { predicted[i] = predict(rows[i]); });
  const auto stop = std::chrono::steady_clock::now();

  std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(k, 0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] >= k) throw InvalidArgument("evaluation: prediction out of range");
    ++counts[labels[i]][predicted[i]];
  }
  EvalReport r = report_from_counts(std::move(classes), std::move(counts));
  r.mean_test_time_per_image_ms =
      std::chrono::duration<double, std::milli>(stop - start).count() / double(rows.size());
  r.model = std::move(model);
  r.model["timing"] = "predict-only wall clock / n_test";
  r.model["threads"] = threads == 0 ? 1u : threads;
  return r;
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"schema", kEvalReportSchema},
       {"version", kEvalReportVersion},
       {"classes", r.classes},
       {"overall_accuracy", r.overall_accuracy},
       {"confusion", r.confusion},
       {"per_class_accuracy", r.per_class_accuracy},
       {"flagged_rows", r.flagged_rows},
       {"n_test", r.n_test},
       {"mean_test_time_per_image_ms", r.mean_test_time_per_image_ms},
       {"model", r.model}};
  if (!r.counts.empty()) j["counts"] = r.counts;
}

// Accepts reports from any producer that follows the schema. Derived fields
// missing from the document are recomputed from `confusion`.
inline void from_json(const nlohmann::json& j, EvalReport& r) {
  try {
    r = EvalReport{};
    if (j.contains("schema") && j.at("schema").get<std::string>() != kEvalReportSchema) {
      throw MalformedInput("report: unexpected schema '" + j.at("schema").get<std::string>() + "'");
    }
    if (j.contains("version") && j.at("version").get<int>() != kEvalReportVersion) {
      throw MalformedInput("report: unsupported version " + j.at("version").dump());
    }
    r.classes = j.at("classes").get<std::vector<std::string>>();
    const std::size_t k = r.classes.size();
    if (k == 0) throw MalformedInput("report: no classes");
    if (j.contains("counts")) r.counts = j.at("counts").get<std::vector<std::vector<std::int64_t>>>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<double>>>();
    if (r.confusion.size() != k) throw MalformedInput("report: confusion row count mismatch");
    for (const auto& row : r.confusion) {
      if (row.size() != k) throw MalformedInput("report: confusion matrix is not square");
    }
    if (j.contains("per_class_accuracy")) {
      r.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<double>>();
    } else {
      for (std::size_t i = 0; i < k; ++i) r.per_class_accuracy.push_back(r.confusion[i][i]);
    }
    if (r.per_class_accuracy.size() != k) throw MalformedInput("report: per_class_accuracy size mismatch");
    if (j.contains("flagged_rows")) {
      r.flagged_rows = j.at("flagged_rows").get<std::vector<bool>>();
    } else {
      for (const auto& row : r.confusion) {
        r.flagged_rows.push_back(std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; }));
      }
    }
    if (r.flagged_rows.size() != k) throw MalformedInput("report: flagged_rows size mismatch");
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    if (j.contains("n_test")) r.n_test = j.at("n_test").get<std::int64_t>();
    if (j.contains("mean_test_time_per_image_ms")) {
      r.mean_test_time_per_image_ms = j.at("mean_test_time_per_image_ms").get<double>();
    }
    if (j.contains("model")) r.model = j.at("model");
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("report: ") + e.what());
  }
}

// ---- confusion heatmap ------------------------------------------------------

namespace detail {

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
struct Glyph {
  char ch;
  std::array<std::uint8_t, 7> rows;
};

inline constexpr std::array<Glyph, 14> kFont = {{
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
}};

inline constexpr int kGlyphW = 5, kGlyphH = 7, kTextScale = 2, kAdvance = (kGlyphW + 1) * kTextScale;

inline const Glyph* find_glyph(char c) {
  for (const auto& g : kFont) {
    if (g.ch == c) return &g;
  }
  return nullptr;  // drawn as blank
}

inline int text_width(const std::string& s) { return s.empty() ? 0 : int(s.size()) * kAdvance - kTextScale; }

inline void draw_text(RgbImage& img, const std::string& s, int cx, int cy, Rgb color) {
  int x0 = cx - text_width(s) / 2;
  const int y0 = cy - kGlyphH * kTextScale / 2;
  for (char ch : s) {
    if (const Glyph* g = find_glyph(ch)) {
      for (int r = 0; r < kGlyphH; ++r)
        for (int c = 0; c < kGlyphW; ++c) {
          if (!(g->rows[r] & (0x10 >> c))) continue;
          for (int dy = 0; dy < kTextScale; ++dy)
            for (int dx = 0; dx < kTextScale; ++dx) {
              const int x = x0 + c * kTextScale + dx, y = y0 + r * kTextScale + dy;
              if (x >= 0 && y >= 0 && x < img.width && y < img.height) img.set(x, y, color);
            }
        }
    }
    x0 += kAdvance;
  }
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// White at 0 %, deep blue at 100 %.
inline Rgb heat_color(double percent) {
  const double t = std::clamp(percent / 100.0, 0.0, 1.0);
  return {to_byte(255.0 + t * (8.0 - 255.0)), to_byte(255.0 + t * (48.0 - 255.0)), to_byte(255.0 + t * (107.0 - 255.0))};
}

}  // namespace detail

inline constexpr int kConfusionCell = 64;
inline constexpr int kConfusionMargin = 48;

// Rows are true classes, columns predicted. Flagged rows are drawn as gray
// diagonal hatching without annotations.
inline RgbImage render_confusion(const EvalReport& r) {
  using namespace detail;
  const int k = static_cast<int>(r.size());
  const int side = kConfusionMargin + k * kConfusionCell + 1;
  RgbImage img(side, side, kWhite);
  const Rgb black{0, 0, 0}, grid{160, 160, 160}, hatch{150, 150, 150}, neutral{225, 225, 225};
  for (int i = 0; i < k; ++i) {
    const bool flagged = i < int(r.flagged_rows.size()) && r.flagged_rows[i];
    for (int j = 0; j < k; ++j) {
      const int x0 = kConfusionMargin + j * kConfusionCell, y0 = kConfusionMargin + i * kConfusionCell;
      const double v = r.confusion[i][j];
      const Rgb fill = flagged ? neutral : heat_color(v);
      for (int y = y0; y <= y0 + kConfusionCell; ++y)
        for (int x = x0; x <= x0 + kConfusionCell; ++x) {
          const bool border = y == y0 || x == x0 || y == y0 + kConfusionCell || x == x0 + kConfusionCell;
          Rgb c = fill;
          if (flagged && (x + y) % 8 < 2) c = hatch;
          img.set(x, y, border ? grid : c);
        }
      if (!flagged) {
        draw_text(img, format_percent(v), x0 + kConfusionCell / 2, y0 + kConfusionCell / 2, v > 55.0 ? kWhite : black);
      }
    }
    const int center = kConfusionMargin + i * kConfusionCell + kConfusionCell / 2;
    draw_text(img, r.classes[i], kConfusionMargin / 2, center, black);
    draw_text(img, r.classes[i], center, kConfusionMargin / 2, black);
  }
  return img;
}

}  // namespace awapd
