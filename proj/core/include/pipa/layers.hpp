#pragma once

#include <string>
#include <vector>

#include "pipa/rng.hpp"
#include "pipa/tensor.hpp"

namespace pipa::nn {

/// 2-D convolution with square kernel, zero padding and bias. Stateless apart
/// from its parameters: backward recomputes what it needs from the input.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int padding);

  /// He-normal weights scaled by `gain`; zero bias.
  void init(Rng& rng, float gain = 1.0f);

  int out_size(int in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Tensor forward(const Tensor& x) const;

  /// Accumulates parameter gradients; returns dL/dx when `need_input_grad`.
  Tensor backward(const Tensor& x, const Tensor& dy, bool need_input_grad);

  Parameter weight;
  Parameter bias;

 private:
  int in_ = 0;
  int out_ = 0;
  int kernel_ = 1;
  int stride_ = 1;
  int padding_ = 0;
};

void relu_inplace(Tensor& t);
/// dy *= (y > 0)
void relu_backward_inplace(const Tensor& y, Tensor& dy);

/// Bilinear upsampling by an integer factor (half-pixel centers), expressed as
/// a separable linear map so its adjoint is exact.
class Upsample {
 public:
  Upsample() = default;
  Upsample(int in_h, int in_w, int out_h, int out_w);

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& dy) const;

  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }

 private:
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  std::vector<float> rows_;  // out_h x in_h
  std::vector<float> cols_;  // out_w x in_w
};

}  // namespace pipa::nn
