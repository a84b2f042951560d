#pragma once

#include <utility>
#include <vector>

#include "pipa/rng.hpp"

namespace pipa::geometry {

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long area() const { return empty() ? 0 : static_cast<long>(width()) * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }

  bool operator==(const Rect&) const = default;
};

Rect intersect(const Rect& a, const Rect& b);
double iou(const Rect& a, const Rect& b);

/// Two equally sized crops of one resized image.
struct CropPair {
  double resize_ratio = 1.0;
  int resized_height = 0;
  int resized_width = 0;
  Rect rect1;
  Rect rect2;
  Rect overlap;  ///< rect1 ∩ rect2, in the resized-image frame
};

struct CropSampler {
  int patch_size = 48;
  double resize_min = 0.5;
  double resize_max = 2.0;
  double iou_min = 0.1;
  double iou_max = 1.0;
  int stride = 4;
  int max_attempts = 100;
};

/// Draws a shared resize ratio and two stride-aligned crops whose IoU lies in
/// [iou_min, iou_max]. Ratios that would shrink the image below the patch size
/// are excluded from the draw. Throws std::runtime_error when the constraints
/// cannot be met within max_attempts.
CropPair sample_crop_pair(int image_height, int image_width, const CropSampler& sampler, Rng& rng);

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

/// Positive-pair index mapping between the feature grids of two crops.
struct CorrespondenceMap {
  int stride = 1;
  int grid_height = 0;  ///< feature rows of each crop
  int grid_width = 0;
  std::vector<std::pair<Cell, Cell>> pairs;
};

/// Throws std::invalid_argument if a rect is not aligned to `stride`.
CorrespondenceMap build_correspondence(const CropPair& pair, int stride);

}  // namespace pipa::geometry
