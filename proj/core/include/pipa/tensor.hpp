#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pipa/image.hpp"

namespace pipa {

/// Dense NCHW float tensor.
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return c * plane(); }

  float* sample(int i) { return data.data() + i * sample_size(); }
  const float* sample(int i) const { return data.data() + i * sample_size(); }

  float& at(int ni, int ci, int y, int x) { return data[(ni * sample_size()) + ci * plane() + y * w + x]; }
  float at(int ni, int ci, int y, int x) const { return data[(ni * sample_size()) + ci * plane() + y * w + x]; }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  bool operator==(const Tensor&) const = default;
};

/// Stacks equally sized images into an (N,3,H,W) tensor.
Tensor stack_images(std::span<const Image> images);

/// Named trainable array with its gradient accumulator.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;

  Parameter() = default;
  Parameter(std::string name_, std::vector<int> shape_);

  std::size_t size() const { return value.size(); }
  void zero_grad();
};

}  // namespace pipa
