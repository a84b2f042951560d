#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "pipa/config.hpp"
#include "pipa/data_synth.hpp"
#include "pipa/geometry.hpp"
#include "pipa/layers.hpp"
#include "pipa/losses.hpp"
#include "pipa/model.hpp"
#include "pipa/trainer.hpp"

namespace {

using namespace pipa;

losses::EmbeddingMatrix random_rows(Eigen::Index rows, Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  losses::EmbeddingMatrix m(rows, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Pixel contrast over a batch of 4 images with 16x16 cells each.
void BM_PixelContrast(benchmark::State& state) {
  Rng rng = make_rng(1, 0);
  const int cells = 16 * 16;
  const int images = 4;
  std::uniform_int_distribution<int> cls(0, 4);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(cells) * images);
  for (auto& l : labels) l = static_cast<std::uint8_t>(cls(rng));
  const auto rows = random_rows(static_cast<Eigen::Index>(labels.size()), 16, rng);
  losses::ContrastConfig cfg;
  cfg.anchors_per_class = static_cast<int>(state.range(0));
  const auto anchors = losses::sample_pixel_anchors(labels, cells, cfg.anchors_per_class, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::pixel_contrast(rows, labels, cells, anchors, cfg));
  }
}
BENCHMARK(BM_PixelContrast)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

// Patch contrast for one crop pair with a pool of three other images.
void BM_PatchContrast(benchmark::State& state) {
  Rng rng = make_rng(2, 0);
  const int patch = static_cast<int>(state.range(0));
  const geometry::CropSampler sampler{patch, 0.5, 2.0, 0.1, 1.0, 4, 100000};
  const auto cp = geometry::sample_crop_pair(64, 64, sampler, rng);
  const auto cm = geometry::build_correspondence(cp, 4);
  const Eigen::Index cells = static_cast<Eigen::Index>(cm.grid_height) * cm.grid_width;
  const auto f1 = random_rows(cells, 16, rng);
  const auto f2 = random_rows(cells, 16, rng);
  const auto pool = random_rows(cells * 6, 16, rng);
  const losses::ContrastConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::patch_contrast(f1, f2, cm, pool, cfg));
  }
}
BENCHMARK(BM_PatchContrast)->Arg(32)->Arg(48)->Unit(benchmark::kMillisecond);

void BM_ConvForwardBackward(benchmark::State& state) {
  Rng rng = make_rng(3, 0);
  nn::Conv2d conv("bench", 32, 32, 3, 1, 1);
  conv.init(rng);
  Tensor x(4, 32, 32, 32);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (float& v : x.data) v = n(rng);
  for (auto _ : state) {
    const Tensor y = conv.forward(x);
    benchmark::DoNotOptimize(conv.backward(x, y, true));
  }
}
BENCHMARK(BM_ConvForwardBackward)->Unit(benchmark::kMillisecond);

void BM_ForwardSegment(benchmark::State& state) {
  const ExperimentConfig cfg;
  Rng rng = make_rng(4, 0);
  const model::ModelBundle bundle(cfg.model, rng);
  Tensor x(4, 3, cfg.source.height, cfg.source.width);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward_segment(bundle.net, x));
}
BENCHMARK(BM_ForwardSegment)->Unit(benchmark::kMillisecond);

// One full training step at the default configuration; arg selects the
// ablation variant (0 baseline, 1 pixel, 2 patch, 3 both).
void BM_TrainStep(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.source.sample_count = 32;
  cfg.target.sample_count = 32;
  cfg.train.enable_pixel = (state.range(0) & 1) != 0;
  cfg.train.enable_patch = (state.range(0) & 2) != 0;
  auto data = std::make_shared<const train::TrainData>(train::split_train_data(
      data::generate_domain(cfg.source), data::generate_domain(cfg.target), cfg.train.holdout_fraction));
  train::Trainer trainer(cfg.model, cfg.train, data);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
