#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "awapd/pipeline.hpp"
#include "test_util.hpp"

using namespace awapd;
namespace fs = std::filesystem;

namespace {

PipelineConfig quick(const fs::path& out) {
  PipelineConfig c;
  c.output_dir = out.string();
  c.waveforms_per_class = 6;
  c.simulator.excitation.n_cycles = 5;
  c.forest.n_trees = 15;
  c.augment.multiplier = 2;
  return c;
}

nlohmann::json without_timing(nlohmann::json j) {
  j.erase("mean_test_time_per_image_ms");
  return j;
}

}  // namespace

TEST(PipelineConfigJson, RoundTripAndShippedDefault) {
  PipelineConfig c;
  c.master_seed = 99;
  c.forest.max_depth = 7;
  c.detection.min_height = 0.01;
  const auto j = nlohmann::json(c);
  EXPECT_EQ(nlohmann::json(j.get<PipelineConfig>()), j);
  std::ifstream in(AWAPD_SOURCE_DIR "/config/pipeline_default.json");
  ASSERT_TRUE(in.good());
  EXPECT_EQ(nlohmann::json(nlohmann::json::parse(in).get<PipelineConfig>()), nlohmann::json(PipelineConfig{}));
}

TEST(PipelineConfigJson, RejectsUnknownKeysAndBadVersion) {
  EXPECT_THROW(parse_pipeline_config(R"({"bogus": 1})"), InvalidArgument);
  EXPECT_THROW(parse_pipeline_config(R"({"schema_version": 9})"), InvalidArgument);
  EXPECT_THROW(parse_pipeline_config("{"), MalformedInput);
}

TEST(PipelineSchema, DescribesEveryTopLevelKey) {
  const auto s = pipeline_schema();
  const nlohmann::json defaults = PipelineConfig{};
  for (const auto& [k, v] : defaults.items()) EXPECT_TRUE(s["properties"].contains(k)) << k;
  EXPECT_EQ(s["properties"]["master_seed"]["type"], "integer");
}

TEST(Pipeline, DefaultConfigCompletes) {
  testutil::TempDir dir;
  PipelineConfig c;
  c.output_dir = (dir / "run").string();
  const EvalReport r = run_pipeline(c);
  EXPECT_EQ(r.n_test, 6 * 4 * c.augment.multiplier);
  for (const char* f : {"report.json", "confusion.png", "model.json", "features.csv", "integrity.json",
                        "config.json", "dataset/manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / ("run/" + std::string(f)))) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "run/.partial"));
  EXPECT_EQ(std::distance(fs::directory_iterator(dir / "run/pulses"), fs::directory_iterator{}), 120);
  for (const auto& row : r.confusion) {
    double s = 0;
    for (double v : row) s += v;
    EXPECT_NEAR(s, 100.0, 0.1);
  }
}

TEST(Pipeline, RerunIsIdentical) {
  testutil::TempDir dir;
  const auto a = run_pipeline(quick(dir / "a"));
  const auto b = run_pipeline(quick(dir / "b"));
  EXPECT_EQ(without_timing(nlohmann::json(a)), without_timing(nlohmann::json(b)));
  for (const char* f : {"model.json", "features.csv", "dataset/manifest.json", "confusion.png"}) {
    EXPECT_EQ(detail::read_file(dir / ("a/" + std::string(f))), detail::read_file(dir / ("b/" + std::string(f)))) << f;
  }
  auto threaded = quick(dir / "c");
  threaded.threads = 4;
  const auto c = run_pipeline(threaded);
  EXPECT_EQ(without_timing(nlohmann::json(a))["counts"], without_timing(nlohmann::json(c))["counts"]);
  EXPECT_EQ(detail::read_file(dir / "a/model.json"), detail::read_file(dir / "c/model.json"));
}

TEST(Pipeline, BadRatiosAbortInDatasetStage) {
  testutil::TempDir dir;
  auto c = quick(dir / "bad");
  c.split_ratios = {0.6, 0.2, 0.1};
  try {
    run_pipeline(c);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_TRUE(std::string(e.what()).starts_with("[dataset]")) << e.what();
  }
  EXPECT_TRUE(fs::exists(dir / "bad/.partial"));
}

TEST(Pipeline, StageErrorKeepsType) {
  EXPECT_THROW(run_stage("x", [] { throw IoError("boom"); }), IoError);
  try {
    run_stage("train", [] { throw ModelFormatError("bad"); });
  } catch (const ModelFormatError& e) {
    EXPECT_STREQ(e.what(), "[train] bad");
  }
}
