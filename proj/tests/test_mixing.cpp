#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "pipa/mixing.hpp"
#include "properties.hpp"
#include "support.hpp"

using namespace pipa;
using namespace pipa::mixing;

namespace {

Tensor scores_const(int c, int h, int w, std::vector<float> per_class) {
  Tensor t(1, c, h, w);
  for (int k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < t.plane(); ++p) t.data[k * t.plane() + p] = per_class[k];
  }
  return t;
}

Image random_image(int h, int w, Rng& rng) {
  Image img(h, w);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : img.values()) v = u(rng);
  return img;
}

LabelMap random_labels(int h, int w, int classes, Rng& rng, double ignore_rate = 0.05) {
  LabelMap l(h, w);
  std::uniform_int_distribution<int> c(0, classes - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : l.values()) v = u(rng) < ignore_rate ? kIgnore : static_cast<std::uint8_t>(c(rng));
  return l;
}

}  // namespace

TEST(PseudoLabel, UniformScoresAreNeverValid) {
  const auto pl = pseudo_label(scores_const(19, 4, 4, std::vector<float>(19, 0.3f)), 0, 0.968);
  for (float c : pl.confidence) EXPECT_NEAR(c, 1.0 / 19.0, 1e-7);
  EXPECT_NEAR(1.0 / 19.0, 0.0526, 1e-4);
  for (auto v : pl.valid) EXPECT_EQ(v, 0);
  for (auto l : pl.labels.values()) EXPECT_EQ(l, 0);  // ties break to the lowest id
}

TEST(PseudoLabel, SaturatedLogitIsValid) {
  std::vector<float> s(5, 0.0f);
  s[3] = 20.0f;
  const auto pl = pseudo_label(scores_const(5, 2, 2, s), 0, 0.968);
  for (std::size_t p = 0; p < 4; ++p) {
    EXPECT_EQ(pl.labels.values()[p], 3);
    EXPECT_GT(pl.confidence[p], 0.9999);
    EXPECT_EQ(pl.valid[p], 1);
  }
}

TEST(PseudoLabel, TwoClassAtNinetySevenPercentIsValid) {
  // Softmax max = 0.97 exactly when a - b = log(0.97 / 0.03).
  const double gap = std::log(0.97 / 0.03);
  const auto pl = pseudo_label(scores_const(2, 1, 1, {static_cast<float>(gap), 0.0f}), 0, 0.968);
  EXPECT_NEAR(pl.confidence[0], 0.97, 1e-6);
  EXPECT_EQ(pl.valid[0], 1);
  const auto strict = pseudo_label(scores_const(2, 1, 1, {static_cast<float>(gap), 0.0f}), 0, 0.975);
  EXPECT_EQ(strict.valid[0], 0);
}

TEST(PseudoLabel, RejectsNonFiniteAndSingleClass) {
  auto s = scores_const(3, 2, 2, {0.0f, 1.0f, 2.0f});
  s.data[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(pseudo_label(s, 0, 0.5), std::invalid_argument);
  s.data[5] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(pseudo_label(s, 0, 0.5), std::invalid_argument);
  EXPECT_THROW(pseudo_label(scores_const(1, 2, 2, {1.0f}), 0, 0.5), std::invalid_argument);
}

TEST(PseudoLabel, ReadsTheRequestedSample) {
  Rng rng(2);
  const Tensor t = test::random_tensor(3, 4, 2, 2, rng, 3.0);
  const auto pl = pseudo_label(t, 2, 0.0);
  for (std::size_t p = 0; p < 4; ++p) {
    int best = 0;
    for (int c = 1; c < 4; ++c) {
      if (t.at(2, c, p / 2, p % 2) > t.at(2, best, p / 2, p % 2)) best = c;
    }
    EXPECT_EQ(pl.labels.values()[p], best);
  }
}

TEST(ClassMix, SingleClassSourceCopiesWholeImage) {
  Rng rng(1);
  const Image xs = random_image(8, 8, rng), xt = random_image(8, 8, rng);
  const LabelMap ys(8, 8, 2);
  const auto pl = pseudo_label(scores_const(3, 8, 8, {0.0f, 0.0f, 0.0f}), 0, 0.968);
  const auto mix = classmix(xs, ys, xt, pl, rng);
  EXPECT_EQ(mix.image, xs);
  EXPECT_EQ(mix.label, ys);
  for (auto v : mix.valid_mask) EXPECT_EQ(v, 1);
}

TEST(ClassMix, EmptySelectionIsTarget) {
  Rng rng(1);
  const Image xs = random_image(8, 8, rng), xt = random_image(8, 8, rng);
  const LabelMap ys = random_labels(8, 8, 3, rng);
  const auto pl = pseudo_label(test::random_tensor(1, 3, 8, 8, rng, 4.0), 0, 0.6);
  const auto mix = classmix(xs, ys, xt, pl, std::span<const std::uint8_t>{});
  EXPECT_EQ(mix.image, xt);
  EXPECT_EQ(mix.label, pl.labels);
  EXPECT_EQ(mix.valid_mask, pl.valid);
}

TEST(ClassMix, MatchesReferenceLoop) {
  Rng rng(4);
  const Image xs = random_image(16, 16, rng), xt = random_image(16, 16, rng);
  LabelMap ys(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) ys.at(y, x) = static_cast<std::uint8_t>((x / 4 + y / 8) % 4);
  }
  const auto pl = pseudo_label(test::random_tensor(1, 4, 16, 16, rng, 4.0), 0, 0.8);
  const std::vector<std::uint8_t> selected{0, 2};
  const auto mix = classmix(xs, ys, xt, pl, selected);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * 16 + x;
      const bool from_source = ys.at(y, x) == 0 || ys.at(y, x) == 2;
      EXPECT_EQ(mix.source_mask[p], from_source);
      EXPECT_EQ(mix.label.at(y, x), from_source ? ys.at(y, x) : pl.labels.at(y, x));
      EXPECT_EQ(mix.valid_mask[p], from_source ? 1 : pl.valid[p]);
      for (int c = 0; c < 3; ++c) EXPECT_EQ(mix.image.at(c, y, x), from_source ? xs.at(c, y, x) : xt.at(c, y, x));
    }
  }
}

TEST(ClassMix, ShapeMismatchThrows) {
  Rng rng(1);
  const auto pl = pseudo_label(scores_const(2, 8, 8, {0.0f, 1.0f}), 0, 0.5);
  EXPECT_THROW(classmix(random_image(8, 8, rng), LabelMap(8, 8), random_image(8, 4, rng), pl, rng), std::invalid_argument);
  EXPECT_THROW(classmix(random_image(8, 8, rng), LabelMap(4, 8), random_image(8, 8, rng), pl, rng), std::invalid_argument);
}

TEST(ClassMix, RandomCasesSatisfyInvariants) {
  const auto v = test::classmix_violations(1000, 77);
  EXPECT_EQ(v.cases, 1000);
  EXPECT_EQ(v.count, 0) << v.first;
}
