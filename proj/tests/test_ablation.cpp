#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "pipa/ablation.hpp"
#include "support.hpp"

using namespace pipa;
using namespace pipa::ablation;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.source = test::small_domain("source", 1);
  c.target = test::small_domain("target", 2);
  c.model = test::small_model();
  c.train = test::small_train();
  c.train.iterations = 10;
  return c;
}

Result fake_result(const std::vector<std::array<double, 4>>& per_seed) {
  Result r;
  r.variants = contrast_variants(train::TrainConfig{});
  for (std::size_t s = 0; s < per_seed.size(); ++s) r.seeds.push_back(s);
  for (std::size_t v = 0; v < 4; ++v) {
    for (std::size_t s = 0; s < per_seed.size(); ++s) r.runs.push_back({r.variants[v].name, s, per_seed[s][v], 1.0});
  }
  return r;
}

}  // namespace

TEST(Ablation, ContrastVariantsDifferOnlyInSwitches) {
  const auto v = contrast_variants(train::TrainConfig{});
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0].name, "baseline");
  EXPECT_FALSE(v[0].enable_pixel || v[0].enable_patch);
  EXPECT_TRUE(v[1].enable_pixel && !v[1].enable_patch);
  EXPECT_TRUE(!v[2].enable_pixel && v[2].enable_patch);
  EXPECT_TRUE(v[3].enable_pixel && v[3].enable_patch);
  for (const auto& x : v) EXPECT_EQ(x.patch_size, 48);
}

TEST(Ablation, CropSizeVariantsEnableBothContrasts) {
  const auto v = crop_size_variants(train::TrainConfig{}, {32, 40, 48, 56});
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[1].name, "crop-40");
  for (const auto& x : v) EXPECT_TRUE(x.enable_pixel && x.enable_patch);
}

TEST(Ablation, SummaryStatistics) {
  const Result r = fake_result({{0.50, 0.52, 0.51, 0.55}, {0.40, 0.43, 0.41, 0.46}, {0.45, 0.44, 0.47, 0.48}});
  const auto s = r.summarize();
  ASSERT_EQ(s.size(), 4u);
  EXPECT_NEAR(s[0].mean, 0.45, 1e-12);
  EXPECT_NEAR(s[0].stddev, 0.05, 1e-12);
  EXPECT_NEAR(s[3].delta, (0.55 + 0.46 + 0.48) / 3 - 0.45, 1e-12);
  EXPECT_EQ(r.miou("+patch", 2), 0.47);
  EXPECT_ANY_THROW(r.miou("missing", 0));
}

TEST(Ablation, OrderingCountsSeeds) {
  EXPECT_EQ(ordering_holds(fake_result({{0.50, 0.52, 0.51, 0.55}, {0.40, 0.43, 0.41, 0.46}, {0.45, 0.44, 0.47, 0.48}})), 2);
  EXPECT_EQ(ordering_holds(fake_result({{0.5, 0.5, 0.5, 0.5}})), 1);
  EXPECT_EQ(ordering_holds(fake_result({{0.5, 0.6, 0.55, 0.58}})), 0);
}

TEST(Ablation, SmokeRunProducesTableAndJson) {
  const ExperimentConfig cfg = tiny_config();
  const auto data = test::small_data();
  test::TempDir dir("abl");
  const Plan plan{contrast_variants(cfg.train), {3}};
  int seen = 0;
  const Result r = run(cfg, plan, data, dir.path(), [&](const RunResult&) { ++seen; });
  EXPECT_EQ(seen, 4);
  ASSERT_EQ(r.runs.size(), 4u);
  for (const auto& run : r.runs) {
    EXPECT_GE(run.miou, 0.0);
    EXPECT_LE(run.miou, 1.0);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / run.variant / "seed-3" / "checkpoint.bin")) << run.variant;
  }
  const std::string table = format_table(r);
  for (const char* name : {"baseline", "+pixel", "+patch", "pipa"}) EXPECT_NE(table.find(name), std::string::npos);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_TRUE(j.is_object());
}

TEST(Ablation, BudgetScalesWithPlan) {
  const ExperimentConfig cfg = tiny_config();
  const auto data = test::small_data();
  const Plan one{contrast_variants(cfg.train), {1}};
  const Plan three{contrast_variants(cfg.train), {1, 2, 3}};
  const Budget a = estimate_budget(cfg, one, data, 1);
  const Budget b = estimate_budget(cfg, three, data, 1);
  EXPECT_GT(a.seconds, 0.0);
  EXPECT_GT(a.bytes, 0u);
  EXPECT_EQ(b.bytes, 3 * a.bytes);
}
