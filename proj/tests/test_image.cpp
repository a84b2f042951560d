#include <gtest/gtest.h>

#include "pipa/image.hpp"
#include "pipa/rng.hpp"

using namespace pipa;

TEST(Image, RejectsOutOfRangeValues) {
  Image img(4, 4, 0.5f);
  EXPECT_NO_THROW(img.validate());
  img.at(1, 2, 3) = 1.5f;
  EXPECT_THROW(img.validate(), std::invalid_argument);
  img.at(1, 2, 3) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(img.validate(), std::invalid_argument);
}

TEST(LabelMap, ValidateAllowsIgnore) {
  LabelMap l(2, 2, 1);
  l.at(0, 0) = kIgnore;
  EXPECT_NO_THROW(l.validate(2));
  l.at(1, 1) = 2;
  EXPECT_THROW(l.validate(2), std::invalid_argument);
}

TEST(Resize, IdentitySizeIsExact) {
  Image img(8, 6);
  for (std::size_t i = 0; i < img.values().size(); ++i) img.values()[i] = static_cast<float>(i % 7) / 7.0f;
  EXPECT_EQ(resize_bilinear(img, 8, 6), img);
}

TEST(Resize, ConstantStaysConstant) {
  const Image img(10, 10, 0.25f);
  const Image out = resize_bilinear(img, 17, 5);
  ASSERT_EQ(out.height(), 17);
  ASSERT_EQ(out.width(), 5);
  for (float v : out.values()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Resize, UpsampleByTwoInterpolates) {
  // Half-pixel centers: output x=1 sits at source 0.25 -> 0.75*a + 0.25*b.
  Image img(1, 2);
  for (int c = 0; c < 3; ++c) {
    img.at(c, 0, 0) = 0.0f;
    img.at(c, 0, 1) = 1.0f;
  }
  const Image out = resize_bilinear(img, 1, 4);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 1), 0.25f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 2), 0.75f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 3), 1.0f);
}

TEST(Crop, CopiesWindow) {
  Image img(5, 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) img.at(2, y, x) = static_cast<float>(y * 5 + x) / 25.0f;
  }
  const Image c = crop(img, 1, 2, 4, 5);
  ASSERT_EQ(c.height(), 3);
  ASSERT_EQ(c.width(), 3);
  EXPECT_EQ(c.at(2, 0, 0), img.at(2, 2, 1));
  EXPECT_EQ(c.at(2, 2, 2), img.at(2, 4, 3));
  EXPECT_THROW(crop(img, 0, 0, 6, 2), std::out_of_range);
}

TEST(DownsampleLabels, NearestCellCenter) {
  LabelMap l(4, 4, 0);
  l.at(3, 3) = 3;  // cell (1,1) at stride 2 samples pixel (3,3)
  l.at(0, 0) = 7;  // not sampled
  const LabelMap d = downsample_labels(l, 2);
  ASSERT_EQ(d.height(), 2);
  EXPECT_EQ(d.at(1, 1), 3);
  EXPECT_EQ(d.at(0, 0), 0);
  EXPECT_THROW(downsample_labels(LabelMap(5, 4), 2), std::invalid_argument);
}

TEST(Quantize, RoundsToEightBit) {
  Image img(1, 1, 0.5f);
  quantize_8bit(img);
  EXPECT_FLOAT_EQ(img.at(0, 0, 0), 128.0f / 255.0f);
}

TEST(Rng, ChildSeedsAreStableAndDistinct) {
  EXPECT_EQ(child_seed(7, 3), child_seed(7, 3));
  EXPECT_NE(child_seed(7, 3), child_seed(7, 4));
  EXPECT_NE(child_seed(7, 3), child_seed(8, 3));
  Rng a = make_rng(1, 2);
  a();
  Rng b = deserialize_rng(serialize_rng(a));
  EXPECT_EQ(a(), b());
}
