#include <gtest/gtest.h>

#include <algorithm>
#include <nlohmann/json.hpp>

#include "pipa/eval.hpp"
#include "support.hpp"

using namespace pipa;
using namespace pipa::eval;

namespace {

LabelMap grid(int h, int w, std::initializer_list<int> values) {
  LabelMap m(h, w);
  std::size_t i = 0;
  for (int v : values) m.values()[i++] = static_cast<std::uint8_t>(v);
  return m;
}

LabelMap random_labels(int h, int w, int classes, Rng& rng, double ignore_rate = 0.0) {
  LabelMap m(h, w);
  std::uniform_int_distribution<int> c(0, classes - 1);
  std::bernoulli_distribution ign(ignore_rate);
  for (auto& v : m.values()) v = ign(rng) ? kIgnore : static_cast<std::uint8_t>(c(rng));
  return m;
}

}  // namespace

TEST(Confusion, AccumulateCountsGroundTruthByPrediction) {
  ConfusionMatrix cm(3);
  cm.accumulate(grid(2, 2, {0, 1, 2, 2}), grid(2, 2, {0, 2, 2, 255}));
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(2, 1), 1u);
  EXPECT_EQ(cm.at(2, 2), 1u);
  EXPECT_EQ(cm.total(), 3u);
}

TEST(Confusion, RejectsBadInputs) {
  ConfusionMatrix cm(2);
  EXPECT_THROW(cm.accumulate(LabelMap(2, 2), LabelMap(2, 3)), std::invalid_argument);
  EXPECT_THROW(cm.accumulate(grid(1, 2, {0, 2}), grid(1, 2, {0, 1})), std::invalid_argument);
  EXPECT_THROW(cm.accumulate(grid(1, 2, {0, 1}), grid(1, 2, {0, 3})), std::invalid_argument);
  EXPECT_THROW(cm.merge(ConfusionMatrix(3)), std::invalid_argument);
}

TEST(MeanIoU, HandFixture) {
  ConfusionMatrix cm(2);
  cm.accumulate(grid(2, 2, {0, 0, 0, 0}), grid(2, 2, {0, 0, 1, 1}));
  const auto r = miou(cm);
  EXPECT_DOUBLE_EQ(*r.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(*r.per_class[1], 0.0);
  EXPECT_DOUBLE_EQ(r.mean, 0.25);
}

TEST(MeanIoU, PerfectPredictionIsOne) {
  Rng rng(1);
  ConfusionMatrix cm(4);
  const LabelMap l = random_labels(8, 8, 4, rng);
  cm.accumulate(l, l);
  EXPECT_DOUBLE_EQ(miou(cm).mean, 1.0);
}

TEST(MeanIoU, AbsentClassIsExcluded) {
  ConfusionMatrix cm(3);
  cm.accumulate(grid(1, 4, {0, 0, 1, 1}), grid(1, 4, {0, 0, 1, 0}));
  const auto r = miou(cm);
  EXPECT_FALSE(r.per_class[2].has_value());
  EXPECT_DOUBLE_EQ(*r.per_class[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.per_class[1], 0.5);
  EXPECT_DOUBLE_EQ(r.mean, (2.0 / 3.0 + 0.5) / 2.0);
}

TEST(MeanIoU, PredictedOnlyClassCountsAsZero) {
  ConfusionMatrix cm(2);
  cm.accumulate(grid(1, 2, {0, 1}), grid(1, 2, {0, 0}));
  const auto r = miou(cm);
  ASSERT_TRUE(r.per_class[1].has_value());
  EXPECT_EQ(*r.per_class[1], 0.0);
}

TEST(MeanIoU, AllAbsentThrows) {
  ConfusionMatrix cm(3);
  EXPECT_THROW(miou(cm), std::domain_error);
  cm.accumulate(grid(1, 1, {1}), grid(1, 1, {255}));
  EXPECT_THROW(miou(cm), std::domain_error);
}

TEST(MeanIoU, MatchesBruteForceAndStaysInBounds) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> size(1, 8);
    const int h = size(rng);
    const int w = size(rng);
    const int classes = 2 + trial % 4;
    const LabelMap gt = random_labels(h, w, classes, rng, 0.1);
    const LabelMap pred = random_labels(h, w, classes, rng);
    ConfusionMatrix cm(classes);
    cm.accumulate(pred, gt);
    double sum = 0.0;
    int present = 0;
    std::vector<std::optional<double>> expect(classes);
    for (int c = 0; c < classes; ++c) {
      int inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.values()[i] == kIgnore) continue;
        const bool g = gt.values()[i] == c;
        const bool p = pred.values()[i] == c;
        inter += g && p;
        uni += g || p;
      }
      if (uni > 0) {
        expect[c] = static_cast<double>(inter) / uni;
        sum += *expect[c];
        ++present;
      }
    }
    if (present == 0) {
      EXPECT_THROW(miou(cm), std::domain_error);
      continue;
    }
    const auto r = miou(cm);
    for (int c = 0; c < classes; ++c) {
      ASSERT_EQ(r.per_class[c].has_value(), expect[c].has_value());
      if (expect[c]) {
        EXPECT_NEAR(*r.per_class[c], *expect[c], 1e-12);
      }
    }
    EXPECT_NEAR(r.mean, sum / present, 1e-12);
    EXPECT_GE(r.mean, 0.0);
    EXPECT_LE(r.mean, 1.0);
  }
}

TEST(MeanIoU, AccumulationOrderDoesNotMatter) {
  Rng rng(3);
  std::vector<std::pair<LabelMap, LabelMap>> pairs;
  for (int i = 0; i < 10; ++i) pairs.emplace_back(random_labels(6, 6, 3, rng), random_labels(6, 6, 3, rng, 0.1));
  ConfusionMatrix a(3), b(3), c(3), d(3);
  for (const auto& [p, g] : pairs) a.accumulate(p, g);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  for (std::size_t i = 0; i < pairs.size(); ++i) (i % 2 ? b : c).accumulate(pairs[i].first, pairs[i].second);
  d.merge(c);
  d.merge(b);
  EXPECT_EQ(a, d);
  EXPECT_EQ(miou(a).mean, miou(d).mean);
}

TEST(Evaluate, PredictionIsDeterministicAndBatchInvariant) {
  Rng rng(4);
  const model::ModelBundle b(test::small_model(), rng);
  const auto samples = data::generate_domain(test::small_domain("target", 5, 7));
  const ConfusionMatrix one = evaluate(b.net, samples, 1);
  const ConfusionMatrix many = evaluate(b.net, samples, 16);
  EXPECT_EQ(one, many);
  EXPECT_EQ(one.total(), 7u * 32u * 32u);
  EXPECT_EQ(evaluate(b.net, samples, 3), one);
}

TEST(Evaluate, JsonReportCarriesIousAndMatrix) {
  ConfusionMatrix cm(3);
  cm.accumulate(grid(1, 4, {0, 0, 1, 1}), grid(1, 4, {0, 0, 1, 0}));
  const auto j = nlohmann::json::parse(report_json(miou(cm), cm));
  EXPECT_DOUBLE_EQ(j["miou"].get<double>(), (2.0 / 3.0 + 0.5) / 2.0);
  EXPECT_TRUE(j["per_class_iou"][2].is_null());
  EXPECT_EQ(j["confusion_matrix"][0][1].get<int>(), 1);
  EXPECT_EQ(j["scored_pixels"].get<int>(), 4);
  EXPECT_NE(report_table(miou(cm)).find("mIoU"), std::string::npos);
}
