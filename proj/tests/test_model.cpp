#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pipa/model.hpp"
#include "support.hpp"

using namespace pipa;
using namespace pipa::model;

namespace {

Tensor images(int n, int h, int w, Rng& rng) {
  Tensor t(n, 3, h, w);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : t.data) v = u(rng);
  return t;
}

}  // namespace

TEST(Model, SegmentShapeContract) {
  Rng rng(1);
  const ModelBundle b(ModelConfig{}, rng);
  const Tensor s = forward_segment(b.net, images(2, 64, 64, rng));
  EXPECT_EQ(s.n, 2);
  EXPECT_EQ(s.c, 5);
  EXPECT_EQ(s.h, 64);
  EXPECT_EQ(s.w, 64);
  for (float v : s.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Model, EmbedShapeContract) {
  Rng rng(1);
  const ModelBundle b(ModelConfig{}, rng);
  const Tensor e = forward_embed(b, images(1, 64, 64, rng), EmbedHead::kPixel);
  EXPECT_EQ(e.c, 64);
  EXPECT_EQ(e.h, 16);
  EXPECT_EQ(e.w, 16);
}

TEST(Model, EncoderStrideIsExact) {
  for (int k : {2, 4, 8}) {
    ModelConfig cfg = test::small_model();
    cfg.stride = k;
    Rng rng(2);
    const ModelBundle b(cfg, rng);
    const Tensor f = b.net.encoder.forward(images(1, 32, 48, rng));
    EXPECT_EQ(f.h, 32 / k);
    EXPECT_EQ(f.w, 48 / k);
    EXPECT_EQ(f.c, cfg.feature_dim);
  }
  ModelConfig bad = test::small_model();
  bad.stride = 3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Model, RejectsIndivisibleInput) {
  Rng rng(1);
  const ModelBundle b(test::small_model(), rng);
  EXPECT_THROW(forward_segment(b.net, images(1, 30, 32, rng)), std::invalid_argument);
}

TEST(Model, ZeroOutputLayerGivesUniformScores) {
  Rng rng(1);
  ModelBundle b(ModelConfig{}, rng);
  b.net.classifier.zero_output_layer();
  const Tensor s = forward_segment(b.net, images(1, 64, 64, rng));
  for (float v : s.data) EXPECT_EQ(v, 0.0f);
}

TEST(Model, ForwardIsDeterministic) {
  Rng rng(1);
  const ModelBundle b(test::small_model(), rng);
  const Tensor x = images(2, 32, 32, rng);
  EXPECT_EQ(forward_segment(b.net, x), forward_segment(b.net, x));
  EXPECT_EQ(forward_embed(b, x, EmbedHead::kPatch), forward_embed(b, x, EmbedHead::kPatch));
}

TEST(Model, SameSeedSameInitialization) {
  Rng a(5), b(5);
  const ModelBundle x(test::small_model(), a), y(test::small_model(), b);
  const auto px = x.parameters(), py = y.parameters();
  ASSERT_EQ(px.size(), py.size());
  for (std::size_t i = 0; i < px.size(); ++i) EXPECT_EQ(px[i]->value, py[i]->value);
}

TEST(Model, ProjectionHeadsAreIndependent) {
  Rng rng(1);
  const ModelBundle b(ModelConfig{}, rng);
  const Tensor x = images(1, 64, 64, rng);
  EXPECT_NE(forward_embed(b, x, EmbedHead::kPixel), forward_embed(b, x, EmbedHead::kPatch));
  std::set<const float*> storage;
  for (const auto* p : b.pixel_head->parameters()) storage.insert(p->value.data());
  for (const auto* p : b.patch_head->parameters()) EXPECT_FALSE(storage.contains(p->value.data()));
}

TEST(Model, NormalizedEmbeddingsHaveUnitNorm) {
  Rng rng(1);
  const ModelBundle b(ModelConfig{}, rng);
  Tensor e = forward_embed(b, images(2, 64, 64, rng), EmbedHead::kPixel);
  normalize_embeddings(e);
  for (int n = 0; n < e.n; ++n) {
    for (int y = 0; y < e.h; ++y) {
      for (int x = 0; x < e.w; ++x) {
        double sq = 0.0;
        for (int c = 0; c < e.c; ++c) sq += static_cast<double>(e.at(n, c, y, x)) * e.at(n, c, y, x);
        EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
      }
    }
  }
}

TEST(Model, InferenceNeverTouchesProjectionHeads) {
  Rng rng(3);
  ModelBundle b(test::small_model(), rng);
  const Tensor x = images(2, 32, 32, rng);
  const Tensor before = forward_segment(b.net, x);
  for (auto* p : b.pixel_head->parameters()) std::fill(p->value.begin(), p->value.end(), 1e6f);
  EXPECT_EQ(forward_segment(b.net, x), before);
  b.drop_projection_heads();
  EXPECT_FALSE(b.has_projection_heads());
  EXPECT_EQ(forward_segment(b.net, x), before);
  EXPECT_THROW(b.head(EmbedHead::kPixel), std::logic_error);
}

TEST(Model, SegmentationBackwardMatchesFiniteDifferences) {
  Rng rng(4);
  ModelBundle b(test::small_model(), rng);
  const Tensor x = images(1, 16, 16, rng);
  const Tensor r = test::random_tensor(1, 3, 16, 16, rng);
  auto loss = [&]() {
    const Tensor s = forward_segment(b.net, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += static_cast<double>(s.data[i]) * r.data[i];
    return acc;
  };
  b.zero_grad();
  EncoderTrace trace;
  const Tensor f = b.net.encoder.forward(x, &trace);
  Tensor hidden;
  const Tensor coarse = b.net.classifier.forward(f, &hidden);
  const nn::Upsample up(coarse.h, coarse.w, 16, 16);
  b.net.encoder.backward(trace, b.net.classifier.backward(f, hidden, up.backward(r)));

  int checked = 0;
  int agreed = 0;
  for (auto* p : b.net.parameters()) {
    for (std::size_t i = 0; i < p->size(); i += std::max<std::size_t>(1, p->size() / 3)) {
      const float keep = p->value[i];
      const float eps = 1e-3f;
      p->value[i] = keep + eps;
      const double up_l = loss();
      p->value[i] = keep - eps;
      const double dn_l = loss();
      p->value[i] = keep;
      const double numeric = (up_l - dn_l) / (2.0 * eps);
      ++checked;
      agreed += std::abs(p->grad[i] - numeric) <= 2e-3 + 2e-2 * std::abs(numeric);
    }
  }
  EXPECT_GT(checked, 20);
  // ReLU kinks inside the finite-difference step can break a few entries.
  EXPECT_GE(agreed, checked * 9 / 10) << agreed << " of " << checked;
}

TEST(Ema, MomentumZeroCopiesStudent) {
  std::vector<double> t{1.0, 2.0, 3.0};
  const std::vector<float> s{4.0f, 5.0f, 6.0f};
  ema_update(t, s, 0.0);
  EXPECT_EQ(t, (std::vector<double>{4.0, 5.0, 6.0}));
}

TEST(Ema, MomentumOneFreezesTeacher) {
  std::vector<double> t{1.0, 2.0, 3.0};
  const std::vector<float> s{4.0f, 5.0f, 6.0f};
  ema_update(t, s, 1.0);
  EXPECT_EQ(t, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(Ema, ClosedFormGeometricSeries) {
  const double m = 0.999;
  const std::vector<double> w{0.5, -1.25, 3.0, 1e-3};
  std::vector<double> t(w.size(), 0.0);
  for (int step = 0; step < 10; ++step) ema_update(t, std::span<const double>(w), m);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(t[i], w[i] * (1.0 - std::pow(m, 10)), 1e-10);
}

TEST(Ema, ShapeMismatchThrows) {
  std::vector<double> t(3, 0.0);
  const std::vector<float> s(4, 1.0f);
  EXPECT_THROW(ema_update(t, s, 0.5), std::invalid_argument);
}

TEST(Teacher, CopyInitAndIsolation) {
  Rng rng(1);
  ModelBundle b(test::small_model(), rng);
  TeacherState t = make_teacher(b.net, TeacherInit::kCopy, 0.999, rng);
  const auto sp = b.net.parameters();
  const auto tp = t.net.parameters();
  ASSERT_EQ(sp.size(), tp.size());
  for (std::size_t i = 0; i < sp.size(); ++i) {
    EXPECT_EQ(sp[i]->value, tp[i]->value);
    EXPECT_NE(sp[i]->value.data(), tp[i]->value.data());
    EXPECT_TRUE(tp[i]->grad.empty());  // nowhere to accumulate a gradient
  }
  // The teacher holds no projection heads and is absent from the student's update list.
  std::set<const Parameter*> student(sp.begin(), sp.end());
  for (auto* p : b.parameters()) student.insert(p);
  for (auto* p : tp) EXPECT_FALSE(student.contains(p));
}

TEST(Teacher, RandomInitDiffersAndEmaTracksStudent) {
  Rng rng(1);
  ModelBundle b(test::small_model(), rng);
  TeacherState t = make_teacher(b.net, TeacherInit::kRandom, 0.5, rng);
  EXPECT_NE(b.net.parameters()[0]->value, t.net.parameters()[0]->value);
  for (int i = 0; i < 60; ++i) ema_update(t, b.net, 0.5);
  const auto sp = b.net.parameters();
  const auto tp = t.net.parameters();
  for (std::size_t i = 0; i < sp.size(); ++i) {
    for (std::size_t j = 0; j < sp[i]->size(); ++j) EXPECT_NEAR(tp[i]->value[j], sp[i]->value[j], 1e-6);
  }
}
