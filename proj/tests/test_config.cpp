#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "pipa/config.hpp"
#include "support.hpp"

using namespace pipa;

TEST(Config, DefaultsAreValidAndConsistent) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.get("train.alpha"), "0.1");
  EXPECT_EQ(c.get("train.beta"), c.get("train.beta"));
  EXPECT_EQ(c.get("train.threshold"), "0.968");
  EXPECT_EQ(c.get("train.ema_momentum"), "0.999");
  EXPECT_EQ(c.model.classes, c.source.class_count);
  EXPECT_NE(c.source.seed, c.target.seed);
}

TEST(Config, KeysAreUniqueAndReadable) {
  const ExperimentConfig c;
  std::set<std::string> seen;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(seen.insert(k.name).second) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
    EXPECT_NO_THROW(c.get(k.name)) << k.name;
  }
  EXPECT_GT(seen.size(), 40u);
}

TEST(Config, SetAndGet) {
  ExperimentConfig c;
  c.set("train.iterations", "123");
  c.set("train.enable_pixel", "false");
  c.set("contrast.denominator", "literal");
  c.set("train.teacher_init", "random");
  c.set("paths.run_dir", "runs/x");
  c.set("data.class_count", "4");
  EXPECT_EQ(c.train.iterations, 123);
  EXPECT_FALSE(c.train.enable_pixel);
  EXPECT_EQ(c.train.contrast.denominator, losses::Denominator::kLiteral);
  EXPECT_EQ(c.train.teacher_init, model::TeacherInit::kRandom);
  EXPECT_EQ(c.run_dir, "runs/x");
  EXPECT_EQ(c.source.class_count, 4);
  EXPECT_EQ(c.target.class_count, 4);
  EXPECT_EQ(c.model.classes, 4);
  EXPECT_EQ(c.get("train.enable_pixel"), "false");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig c;
  try {
    c.set("train.alpah", "0.2");
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("train.alpah"), std::string::npos);
  }
  EXPECT_THROW(c.set("train.iterations", "12x"), std::invalid_argument);
  EXPECT_THROW(c.set("train.iterations", ""), std::invalid_argument);
  EXPECT_THROW(c.set("train.enable_patch", "maybe"), std::invalid_argument);
  EXPECT_THROW(c.set("contrast.denominator", "softmax"), std::invalid_argument);
  EXPECT_THROW(c.get("nope"), std::invalid_argument);
}

TEST(Config, CrossFieldValidation) {
  ExperimentConfig c;
  c.set("train.patch_size", "50");  // not a multiple of the stride
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.set("data.height", "66");
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.set("paths.data_dir", "");
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, TextRoundTrip) {
  ExperimentConfig c;
  c.set("train.learning_rate", "0.00123456789");
  c.set("target.hue_rotation", "33.3");
  c.set("contrast.cross_batch", "false");
  ExperimentConfig back;
  back.merge_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.train.learning_rate, 0.00123456789);
  EXPECT_FALSE(back.train.contrast.cross_batch);
}

TEST(Config, FileThenOverridesPrecedence) {
  test::TempDir dir("cfg");
  std::ofstream(dir.path() / "exp.cfg") << "# experiment\n"
                                           "train.iterations = 50   # short\n"
                                           "\n"
                                           "train.alpha=0.2\n";
  ExperimentConfig c;
  c.merge_file(dir.path() / "exp.cfg");
  EXPECT_EQ(c.train.iterations, 50);
  EXPECT_EQ(c.train.alpha, 0.2);
  const auto [k, v] = split_assignment("train.iterations=75");
  c.set(k, v);
  EXPECT_EQ(c.train.iterations, 75);
  EXPECT_EQ(c.train.alpha, 0.2);
}

TEST(Config, FileErrorsNameTheLocation) {
  test::TempDir dir("cfg");
  std::ofstream(dir.path() / "bad.cfg") << "train.iterations = 5\nnot an assignment\n";
  ExperimentConfig c;
  try {
    c.merge_file(dir.path() / "bad.cfg");
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  EXPECT_ANY_THROW(c.merge_file(dir.path() / "missing.cfg"));
  EXPECT_THROW(split_assignment("novalue"), std::invalid_argument);
}
