#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "awapd/evaluation.hpp"
#include "awapd/png.hpp"

using namespace awapd;

namespace {

struct Balanced {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

Balanced balanced(int per_class) {
  Balanced b;
  for (int c = 0; c < 6; ++c)
    for (int i = 0; i < per_class; ++i) {
      b.rows.push_back({double(c), double(i)});
      b.labels.push_back(c);
    }
  return b;
}

}  // namespace

TEST(Evaluate, PerfectPredictor) {
  const Balanced b = balanced(10);
  const auto r = evaluate([](std::span<const double> x) { return int(x[0]); }, b.rows, b.labels);
  EXPECT_EQ(r.overall_accuracy, 100.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_EQ(r.confusion[i][j], i == j ? 100.0 : 0.0);
  EXPECT_EQ(r.n_test, 60);
}

TEST(Evaluate, ConstantPredictor) {
  const Balanced b = balanced(7);
  const auto r = evaluate([](std::span<const double>) { return 0; }, b.rows, b.labels);
  EXPECT_NEAR(r.overall_accuracy, 16.67, 0.005);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(r.confusion[i][0], 100.0);
    EXPECT_EQ(r.per_class_accuracy[i], i == 0 ? 100.0 : 0.0);
  }
}

TEST(Evaluate, RowStochasticAndDiagonal) {
  std::mt19937_64 rng(1);
  const Balanced b = balanced(37);
  const auto r = evaluate([&](std::span<const double> x) { return int(x[1] * 7 + x[0]) % 6; }, b.rows, b.labels);
  for (int i = 0; i < 6; ++i) {
    double s = 0;
    for (double v : r.confusion[i]) s += v;
    EXPECT_NEAR(s, 100.0, 1e-9);
    EXPECT_EQ(r.per_class_accuracy[i], r.confusion[i][i]);
  }
  // Balanced set: accuracy is the mean of per-class accuracies.
  double m = 0;
  for (double v : r.per_class_accuracy) m += v / 6.0;
  EXPECT_NEAR(r.overall_accuracy, m, 1e-9);
}

TEST(Evaluate, PermutationInvariant) {
  Balanced b = balanced(9);
  auto pred = [](std::span<const double> x) { return int(x[0] + x[1]) % 6; };
  const auto a = evaluate(pred, b.rows, b.labels);
  std::vector<std::size_t> idx(b.rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(4));
  Balanced p;
  for (auto i : idx) {
    p.rows.push_back(b.rows[i]);
    p.labels.push_back(b.labels[i]);
  }
  const auto c = evaluate(pred, p.rows, p.labels, canonical_class_names(), 3);
  EXPECT_EQ(a.counts, c.counts);
  EXPECT_EQ(a.confusion, c.confusion);
  EXPECT_EQ(a.overall_accuracy, c.overall_accuracy);
}

TEST(Evaluate, EmptyRowsFlagged) {
  std::vector<std::vector<double>> rows{{0}, {1}, {1}};
  std::vector<int> labels{0, 1, 1};
  const auto r = evaluate([](std::span<const double> x) { return int(x[0]); }, rows, labels);
  EXPECT_FALSE(r.flagged_rows[0]);
  EXPECT_TRUE(r.flagged_rows[2]);
  for (double v : r.confusion[2]) EXPECT_EQ(v, 0.0);
}

TEST(Evaluate, Errors) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  EXPECT_THROW(evaluate([](std::span<const double>) { return 0; }, rows, labels), InvalidArgument);
  rows = {{0}};
  labels = {6};
  EXPECT_THROW(evaluate([](std::span<const double>) { return 0; }, rows, labels), InvalidArgument);
  labels = {0};
  EXPECT_THROW(evaluate([](std::span<const double>) { return 9; }, rows, labels), InvalidArgument);
}

TEST(Evaluate, RecordsTimingConvention) {
  const Balanced b = balanced(3);
  const auto r = evaluate([](std::span<const double>) { return 1; }, b.rows, b.labels, canonical_class_names(), 2);
  EXPECT_GE(r.mean_test_time_per_image_ms, 0.0);
  EXPECT_EQ(r.model.at("threads"), 2);
  EXPECT_TRUE(r.model.contains("timing"));
}

TEST(ReportJson, RoundTripAndForeignProducer) {
  const Balanced b = balanced(5);
  const auto r = evaluate([](std::span<const double> x) { return int(x[1]) % 6; }, b.rows, b.labels);
  const auto back = nlohmann::json(r).get<EvalReport>();
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.counts, r.counts);
  EXPECT_EQ(back.flagged_rows, r.flagged_rows);

  // A report written by another tool with only the required fields.
  const auto foreign = nlohmann::json::parse(R"({
    "schema": "awapd.eval_report", "version": 1,
    "classes": ["C","I","S","CI","CS","SI"], "overall_accuracy": 96.47,
    "confusion": [[100,0,0,0,0,0],[0,90,10,0,0,0],[0,0,100,0,0,0],[0,0,0,100,0,0],[0,0,0,0,100,0],[0,0,0,0,0,0]]
  })");
  const auto f = foreign.get<EvalReport>();
  EXPECT_EQ(f.per_class_accuracy[1], 90.0);
  EXPECT_TRUE(f.flagged_rows[5]);
  EXPECT_NO_THROW(render_confusion(f));
}

TEST(ReportJson, RejectsMalformed) {
  EXPECT_THROW(nlohmann::json::parse(R"({"classes":["C"],"confusion":[[1,2]],"overall_accuracy":1})").get<EvalReport>(),
               MalformedInput);
  EXPECT_THROW(nlohmann::json::parse(R"({"schema":"other","classes":["C"],"confusion":[[1]],"overall_accuracy":1})")
                   .get<EvalReport>(),
               MalformedInput);
  EXPECT_THROW(nlohmann::json::parse(R"({"classes":["C"]})").get<EvalReport>(), MalformedInput);
}

TEST(ConfusionPng, IdentitySaturatesDiagonal) {
  const Balanced b = balanced(4);
  const auto r = evaluate([](std::span<const double> x) { return int(x[0]); }, b.rows, b.labels);
  const RgbImage img = render_confusion(r);
  auto cell_corner = [&](int i, int j) {
    return img.at(kConfusionMargin + j * kConfusionCell + 3, kConfusionMargin + i * kConfusionCell + 3);
  };
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_EQ(cell_corner(i, j), i == j ? detail::heat_color(100) : kWhite);
}

TEST(ConfusionPng, ByteIdenticalAcrossCalls) {
  const Balanced b = balanced(4);
  const auto r = evaluate([](std::span<const double> x) { return int(x[1]) % 6; }, b.rows, b.labels);
  EXPECT_EQ(encode_png(render_confusion(r)), encode_png(render_confusion(r)));
}

TEST(ConfusionPng, FlaggedRowDistinct) {
  auto r = report_from_counts(canonical_class_names(), {{5, 0, 0, 0, 0, 0},
                                                        {0, 5, 0, 0, 0, 0},
                                                        {0, 0, 5, 0, 0, 0},
                                                        {0, 0, 0, 5, 0, 0},
                                                        {0, 0, 0, 0, 5, 0},
                                                        {0, 0, 0, 0, 0, 0}});
  ASSERT_TRUE(r.flagged_rows[5]);
  const RgbImage img = render_confusion(r);
  std::set<std::array<int, 3>> flagged_colors, normal_colors;
  const int y5 = kConfusionMargin + 5 * kConfusionCell, y4 = kConfusionMargin + 4 * kConfusionCell;
  for (int dy = 1; dy < kConfusionCell; ++dy)
    for (int dx = 1; dx < kConfusionCell; ++dx) {
      const Rgb a = img.at(kConfusionMargin + dx, y5 + dy), b = img.at(kConfusionMargin + dx, y4 + dy);
      flagged_colors.insert({a.r, a.g, a.b});
      normal_colors.insert({b.r, b.g, b.b});
    }
  EXPECT_EQ(flagged_colors.size(), 2u);  // hatch + neutral fill
  EXPECT_FALSE(flagged_colors.count({255, 255, 255}));
  EXPECT_TRUE(normal_colors.count({255, 255, 255}));
}

TEST(ConfusionPng, AnnotationsDrawn) {
  const Balanced b = balanced(3);
  const auto r = evaluate([](std::span<const double>) { return 0; }, b.rows, b.labels);
  const RgbImage img = render_confusion(r);
  // Column C is 100 % (white text on blue); column I is 0.0 (black text on white).
  int dark = 0;
  for (int dy = 0; dy < kConfusionCell; ++dy)
    for (int dx = 0; dx < kConfusionCell; ++dx)
      dark += img.at(kConfusionMargin + kConfusionCell + dx, kConfusionMargin + dy) == Rgb{0, 0, 0};
  EXPECT_GT(dark, 20);
  EXPECT_EQ(detail::format_percent(16.666666), "16.7");
}
