#include "pipa/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pipa::geometry {

Rect intersect(const Rect& a, const Rect& b) {
  Rect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  if (r.empty()) return {};
  return r;
}

double iou(const Rect& a, const Rect& b) {
  const long inter = intersect(a, b).area();
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

CropPair sample_crop_pair(int image_height, int image_width, const CropSampler& s, Rng& rng) {
  if (s.stride <= 0 || s.patch_size <= 0 || s.patch_size % s.stride != 0) {
    throw std::invalid_argument("patch_size " + std::to_string(s.patch_size) + " must be a positive multiple of stride " +
                                std::to_string(s.stride));
  }
  if (s.resize_min <= 0.0 || s.resize_max < s.resize_min) throw std::invalid_argument("invalid resize range");
  if (s.iou_min < 0.0 || s.iou_max > 1.0 || s.iou_max < s.iou_min) throw std::invalid_argument("invalid IoU range");

  const double min_dim = std::min(image_height, image_width);
  const double ratio_lo = std::max(s.resize_min, s.patch_size / min_dim);
  if (ratio_lo > s.resize_max) {
    throw std::runtime_error("infeasible crop constraint: patch_size " + std::to_string(s.patch_size) +
                             " exceeds the image even at the largest resize ratio");
  }
  std::uniform_real_distribution<double> ratio_dist(ratio_lo, s.resize_max);

  for (int attempt = 0; attempt < s.max_attempts; ++attempt) {
    CropPair p;
    p.resize_ratio = ratio_dist(rng);
    p.resized_height = std::max(s.patch_size, static_cast<int>(std::lround(image_height * p.resize_ratio)));
    p.resized_width = std::max(s.patch_size, static_cast<int>(std::lround(image_width * p.resize_ratio)));
    std::uniform_int_distribution<int> ux(0, p.resized_width - s.patch_size);
    std::uniform_int_distribution<int> uy(0, p.resized_height - s.patch_size);
    auto draw = [&]() {
      const int x0 = ux(rng) / s.stride * s.stride;
      const int y0 = uy(rng) / s.stride * s.stride;
      return Rect{x0, y0, x0 + s.patch_size, y0 + s.patch_size};
    };
    p.rect1 = draw();
    p.rect2 = draw();
    const double v = iou(p.rect1, p.rect2);
    if (v >= s.iou_min && v <= s.iou_max && v > 0.0) {
      p.overlap = intersect(p.rect1, p.rect2);
      return p;
    }
  }
  throw std::runtime_error("no crop pair with IoU in [" + std::to_string(s.iou_min) + ", " + std::to_string(s.iou_max) +
                           "] found in " + std::to_string(s.max_attempts) + " attempts");
}

CorrespondenceMap build_correspondence(const CropPair& pair, int stride) {
  const auto aligned = [stride](const Rect& r) {
    return r.x0 % stride == 0 && r.y0 % stride == 0 && r.x1 % stride == 0 && r.y1 % stride == 0;
  };
  if (stride <= 0 || !aligned(pair.rect1) || !aligned(pair.rect2)) {
    throw std::invalid_argument("crop rects are not aligned to stride " + std::to_string(stride));
  }
  if (pair.rect1.width() != pair.rect2.width() || pair.rect1.height() != pair.rect2.height()) {
    throw std::invalid_argument("crop rects differ in size");
  }
  const Rect overlap = intersect(pair.rect1, pair.rect2);
  if (overlap.empty()) throw std::invalid_argument("crop rects do not overlap");

  CorrespondenceMap cm;
  cm.stride = stride;
  cm.grid_height = pair.rect1.height() / stride;
  cm.grid_width = pair.rect1.width() / stride;
  const int drow = (pair.rect1.y0 - pair.rect2.y0) / stride;
  const int dcol = (pair.rect1.x0 - pair.rect2.x0) / stride;
  for (int y = overlap.y0; y < overlap.y1; y += stride) {
    for (int x = overlap.x0; x < overlap.x1; x += stride) {
      const Cell c1{(y - pair.rect1.y0) / stride, (x - pair.rect1.x0) / stride};
      cm.pairs.emplace_back(c1, Cell{c1.row + drow, c1.col + dcol});
    }
  }
  return cm;
}

}  // namespace pipa::geometry
