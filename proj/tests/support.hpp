#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pipa/data_synth.hpp"
#include "pipa/model.hpp"
#include "pipa/trainer.hpp"

namespace pipa::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("pipa-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A narrow model for fast tests.
inline model::ModelConfig small_model(int classes = 3) {
  model::ModelConfig m;
  m.classes = classes;
  m.stride = 4;
  m.stem_channels = 4;
  m.body_channels = 8;
  m.res_blocks = 1;
  m.feature_dim = 8;
  m.head_hidden = 8;
  m.embed_dim = 4;
  return m;
}

inline data::DomainSpec small_domain(const std::string& name, std::uint64_t seed, int samples = 12, int classes = 3) {
  data::DomainSpec d;
  d.name = name;
  d.class_count = classes;
  d.height = 32;
  d.width = 32;
  d.scene.min_size = 3;
  d.scene.max_size = 8;
  d.sample_count = samples;
  d.seed = seed;
  if (name == "target") {
    d.shift.hue_rotation = 30.0;
    d.shift.noise_sigma = 0.05;
  }
  return d;
}

inline std::shared_ptr<const train::TrainData> small_data(int samples = 12, int classes = 3) {
  return std::make_shared<const train::TrainData>(train::split_train_data(
      data::generate_domain(small_domain("source", 1, samples, classes)),
      data::generate_domain(small_domain("target", 2, samples, classes)), 0.25));
}

inline train::TrainConfig small_train() {
  train::TrainConfig t;
  t.iterations = 5;
  t.batch_size = 2;
  t.warmup = 2;
  t.patch_size = 16;
  t.contrast.anchors_per_class = 4;
  t.threshold = 0.3;
  t.eval_interval = 0;
  t.seed = 11;
  return t;
}

inline Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor t(n, c, h, w);
  std::normal_distribution<float> g(0.0f, static_cast<float>(scale));
  for (auto& v : t.data) v = g(rng);
  return t;
}

}  // namespace pipa::test
