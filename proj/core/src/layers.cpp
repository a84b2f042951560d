#include "pipa/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pipa {

Tensor stack_images(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("cannot stack an empty image list");
  const int h = images.front().height();
  const int w = images.front().width();
  Tensor t(static_cast<int>(images.size()), Image::kChannels, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height() != h || images[i].width() != w) throw std::invalid_argument("image sizes differ in batch");
    std::copy(images[i].values().begin(), images[i].values().end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

Parameter::Parameter(std::string name_, std::vector<int> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  value.assign(n, 0.0f);
  grad.assign(n, 0.0f);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

}  // namespace pipa

namespace pipa::nn {

namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void im2col(const float* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow, float* col) {
  const int hw = oh * ow;
  for (int ci = 0; ci < c; ++ci) {
    const float* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* dst = row + oy * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, int k, int stride, int pad, int oh, int ow, float* dx) {
  const int hw = oh * ow;
  for (int ci = 0; ci < c; ++ci) {
    float* plane = dx + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * hw;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          float* dst = plane + static_cast<std::size_t>(iy) * w;
          const float* src = row + oy * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int padding)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {}

void Conv2d::init(Rng& rng, float gain) {
  const float fan_in = static_cast<float>(in_ * kernel_ * kernel_);
  std::normal_distribution<float> dist(0.0f, gain * std::sqrt(2.0f / fan_in));
  for (float& v : weight.value) v = dist(rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.c != in_) {
    throw std::invalid_argument(weight.name + ": expected " + std::to_string(in_) + " input channels, got " +
                                std::to_string(x.c));
  }
  const int oh = out_size(x.h);
  const int ow = out_size(x.w);
  Tensor y(x.n, out_, oh, ow);
  const int kdim = in_ * kernel_ * kernel_;
  const int hw = oh * ow;
  CMapR wmat(weight.value.data(), out_, kdim);
  Eigen::Map<const Eigen::VectorXf> b(bias.value.data(), out_);
  const bool direct = kernel_ == 1 && stride_ == 1 && padding_ == 0;
  std::vector<float> col(direct ? 0 : static_cast<std::size_t>(kdim) * hw);
  for (int i = 0; i < x.n; ++i) {
    const float* src = x.sample(i);
    if (!direct) {
      im2col(src, in_, x.h, x.w, kernel_, stride_, padding_, oh, ow, col.data());
      src = col.data();
    }
    MapR out(y.sample(i), out_, hw);
    out.noalias() = wmat * CMapR(src, kdim, hw);
    out.colwise() += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy, bool need_input_grad) {
  const int oh = out_size(x.h);
  const int ow = out_size(x.w);
  if (dy.n != x.n || dy.c != out_ || dy.h != oh || dy.w != ow) {
    throw std::invalid_argument(weight.name + ": gradient shape mismatch");
  }
  const int kdim = in_ * kernel_ * kernel_;
  const int hw = oh * ow;
  CMapR wmat(weight.value.data(), out_, kdim);
  MapR dw(weight.grad.data(), out_, kdim);
  Eigen::Map<Eigen::VectorXf> db(bias.grad.data(), out_);
  const bool direct = kernel_ == 1 && stride_ == 1 && padding_ == 0;
  std::vector<float> col(direct ? 0 : static_cast<std::size_t>(kdim) * hw);
  std::vector<float> dcol(direct ? 0 : static_cast<std::size_t>(kdim) * hw);
  Tensor dx;
  if (need_input_grad) dx = Tensor(x.n, x.c, x.h, x.w);
  for (int i = 0; i < x.n; ++i) {
    const float* src = x.sample(i);
    if (!direct) {
      im2col(src, in_, x.h, x.w, kernel_, stride_, padding_, oh, ow, col.data());
      src = col.data();
    }
    CMapR g(dy.sample(i), out_, hw);
    dw.noalias() += g * CMapR(src, kdim, hw).transpose();
    // Plain loop: Eigen's vectorised reductions peel by address, which makes sums allocation dependent.
    for (int o = 0; o < out_; ++o) {
      const float* row = dy.sample(i) + static_cast<std::size_t>(o) * hw;
      float acc = 0.0f;
      for (int p = 0; p < hw; ++p) acc += row[p];
      db[o] += acc;
    }
    if (!need_input_grad) continue;
    if (direct) {
      MapR(dx.sample(i), kdim, hw).noalias() = wmat.transpose() * g;
    } else {
      MapR(dcol.data(), kdim, hw).noalias() = wmat.transpose() * g;
      col2im(dcol.data(), in_, x.h, x.w, kernel_, stride_, padding_, oh, ow, dx.sample(i));
    }
  }
  return dx;
}

void relu_inplace(Tensor& t) {
  for (float& v : t.data) v = v > 0.0f ? v : 0.0f;
}

void relu_backward_inplace(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (!(y.data[i] > 0.0f)) dy.data[i] = 0.0f;
  }
}

namespace {

std::vector<float> interp_matrix(int in, int out) {
  std::vector<float> m(static_cast<std::size_t>(out) * in, 0.0f);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, in - 1);
    const float t = static_cast<float>(s - lo);
    m[static_cast<std::size_t>(i) * in + lo] += 1.0f - t;
    m[static_cast<std::size_t>(i) * in + hi] += t;
  }
  return m;
}

}  // namespace

Upsample::Upsample(int in_h, int in_w, int out_h, int out_w)
    : in_h_(in_h), in_w_(in_w), out_h_(out_h), out_w_(out_w), rows_(interp_matrix(in_h, out_h)), cols_(interp_matrix(in_w, out_w)) {}

Tensor Upsample::forward(const Tensor& x) const {
  if (x.h != in_h_ || x.w != in_w_) throw std::invalid_argument("Upsample: unexpected input size");
  Tensor y(x.n, x.c, out_h_, out_w_);
  CMapR r(rows_.data(), out_h_, in_h_);
  CMapR c(cols_.data(), out_w_, in_w_);
  for (int i = 0; i < x.n * x.c; ++i) {
    CMapR src(x.data.data() + static_cast<std::size_t>(i) * in_h_ * in_w_, in_h_, in_w_);
    MapR(y.data.data() + static_cast<std::size_t>(i) * out_h_ * out_w_, out_h_, out_w_).noalias() =
        r * src * c.transpose();
  }
  return y;
}

Tensor Upsample::backward(const Tensor& dy) const {
  Tensor dx(dy.n, dy.c, in_h_, in_w_);
  CMapR r(rows_.data(), out_h_, in_h_);
  CMapR c(cols_.data(), out_w_, in_w_);
  for (int i = 0; i < dy.n * dy.c; ++i) {
    CMapR g(dy.data.data() + static_cast<std::size_t>(i) * out_h_ * out_w_, out_h_, out_w_);
    MapR(dx.data.data() + static_cast<std::size_t>(i) * in_h_ * in_w_, in_h_, in_w_).noalias() =
        r.transpose() * g * c;
  }
  return dx;
}

}  // namespace pipa::nn
