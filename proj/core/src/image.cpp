#include "pipa/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pipa {

Image::Image(int height, int width, float fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("Image dimensions must be positive, got " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
  values_.assign(static_cast<std::size_t>(kChannels) * height * width, fill);
}

void Image::validate() const {
  for (float v : values_) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw std::invalid_argument("Image value out of [0,1] or non-finite");
    }
  }
}

LabelMap::LabelMap(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("LabelMap dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

void LabelMap::validate(int class_count) const {
  for (auto v : values_) {
    if (v != kIgnore && v >= class_count) {
      throw std::invalid_argument("label " + std::to_string(v) + " >= class count " + std::to_string(class_count));
    }
  }
}

namespace {

struct Tap {
  int lo;
  int hi;
  float w_hi;
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, static_cast<float>(s - lo)};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, int height, int width) {
  if (height == img.height() && width == img.width()) return img;
  Image out(height, width);
  const auto ty = bilinear_taps(img.height(), height);
  const auto tx = bilinear_taps(img.width(), width);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < height; ++y) {
      const Tap& a = ty[y];
      for (int x = 0; x < width; ++x) {
        const Tap& b = tx[x];
        const float top = img.at(c, a.lo, b.lo) * (1 - b.w_hi) + img.at(c, a.lo, b.hi) * b.w_hi;
        const float bot = img.at(c, a.hi, b.lo) * (1 - b.w_hi) + img.at(c, a.hi, b.hi) * b.w_hi;
        out.at(c, y, x) = std::clamp(top * (1 - a.w_hi) + bot * a.w_hi, 0.0f, 1.0f);
      }
    }
  }
  return out;
}

Image crop(const Image& img, int x0, int y0, int x1, int y1) {
  if (x0 < 0 || y0 < 0 || x1 > img.width() || y1 > img.height() || x1 <= x0 || y1 <= y0) {
    throw std::out_of_range("crop window outside image bounds");
  }
  Image out(y1 - y0, x1 - x0);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) out.at(c, y - y0, x - x0) = img.at(c, y, x);
    }
  }
  return out;
}

LabelMap downsample_labels(const LabelMap& labels, int stride) {
  if (stride <= 0 || labels.height() % stride != 0 || labels.width() % stride != 0) {
    throw std::invalid_argument("label dims must be divisible by stride " + std::to_string(stride));
  }
  LabelMap out(labels.height() / stride, labels.width() / stride);
  const int off = stride / 2;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.at(y, x) = labels.at(y * stride + off, x * stride + off);
  }
  return out;
}

void quantize_8bit(Image& img) {
  for (float& v : img.values()) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
}

}  // namespace pipa
