#pragma once

// Randomized invariant checks shared by the unit tests and the acceptance run.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "pipa/geometry.hpp"
#include "pipa/mixing.hpp"
#include "support.hpp"

namespace pipa::test {

struct Violations {
  int cases = 0;
  int count = 0;
  std::string first;  ///< description of the first violation

  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (count++ == 0) first = what;
  }
};

/// Samples crop pairs at the default geometry and checks each correspondence
/// against the resized-image coordinates both cells cover.
inline Violations crop_pair_violations(int cases, std::uint64_t seed) {
  Violations v;
  Rng rng(seed);
  geometry::CropSampler s;
  s.max_attempts = 100000;  // small crops on large resized images rarely overlap enough
  for (int trial = 0; trial < cases; ++trial) {
    const int stride = 1 << (1 + trial % 3);
    s.stride = stride;
    s.patch_size = stride * (4 + trial % 9);
    const int h = 64 + 8 * (trial % 5);
    const int w = 64 + 8 * (trial % 3);
    const auto p = geometry::sample_crop_pair(h, w, s, rng);
    ++v.cases;
    const std::string tag = "case " + std::to_string(trial) + ": ";
    const double iou = geometry::iou(p.rect1, p.rect2);
    v.check(iou >= 0.1 && iou <= 1.0, tag + "IoU " + std::to_string(iou) + " outside [0.1, 1]");
    for (const auto& r : {p.rect1, p.rect2}) {
      v.check(r.x0 >= 0 && r.y0 >= 0 && r.x1 <= p.resized_width && r.y1 <= p.resized_height, tag + "crop leaves the image");
      v.check(r.width() == s.patch_size && r.height() == s.patch_size, tag + "crop has the wrong size");
    }
    const auto cm = geometry::build_correspondence(p, stride);
    v.check(static_cast<long>(cm.pairs.size()) * stride * stride == p.overlap.area(), tag + "pair count differs from overlap");
    std::set<std::pair<int, int>> left, right;
    for (const auto& [a, b] : cm.pairs) {
      v.check(p.rect1.x0 + a.col * stride == p.rect2.x0 + b.col * stride &&
                  p.rect1.y0 + a.row * stride == p.rect2.y0 + b.row * stride,
              tag + "pair maps to different image coordinates");
      v.check(left.insert({a.row, a.col}).second && right.insert({b.row, b.col}).second, tag + "cell paired twice");
      v.check(b.row >= 0 && b.row < cm.grid_height && b.col >= 0 && b.col < cm.grid_width, tag + "cell off the grid");
    }
  }
  return v;
}

/// Random pseudo-label and ClassMix cases: partition of pixels by the
/// selected source classes, ceil(|K|/2) selection size, and monotonicity of
/// the valid mask in the threshold.
inline Violations classmix_violations(int cases, std::uint64_t seed) {
  Violations v;
  Rng rng(seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (int trial = 0; trial < cases; ++trial) {
    const int h = 4 + static_cast<int>(rng() % 9);
    const int w = 4 + static_cast<int>(rng() % 9);
    const int classes = 2 + static_cast<int>(rng() % 6);
    Image xs(h, w), xt(h, w);
    for (float& x : xs.values()) x = unit(rng);
    for (float& x : xt.values()) x = unit(rng);
    LabelMap ys(h, w);
    for (auto& y : ys.values()) y = unit(rng) < 0.05f ? kIgnore : static_cast<std::uint8_t>(rng() % classes);
    const Tensor scores = random_tensor(1, classes, h, w, rng, 3.0);
    const double t1 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double t2 = std::uniform_real_distribution<double>(t1, 1.0)(rng);
    ++v.cases;
    const std::string tag = "case " + std::to_string(trial) + ": ";

    const auto pl = mixing::pseudo_label(scores, 0, t1);
    const auto pl_hi = mixing::pseudo_label(scores, 0, t2);
    for (std::size_t p = 0; p < pl.valid.size(); ++p) {
      v.check(pl_hi.valid[p] <= pl.valid[p], tag + "raising the threshold validated a pixel");
    }

    std::set<std::uint8_t> present;
    for (auto y : ys.values()) {
      if (y != kIgnore) present.insert(y);
    }
    Rng pick = rng;
    const auto selected = mixing::select_mix_classes(ys, pick);
    v.check(selected.size() == (present.size() + 1) / 2, tag + "selection size is not ceil(|K|/2)");
    v.check(std::set<std::uint8_t>(selected.begin(), selected.end()).size() == selected.size(), tag + "class chosen twice");
    for (auto c : selected) v.check(present.contains(c), tag + "selected an absent class");

    const auto mix = mixing::classmix(xs, ys, xt, pl, rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const bool from_source = std::find(selected.begin(), selected.end(), ys.at(y, x)) != selected.end();
        v.check(mix.source_mask[p] == (from_source ? 1 : 0), tag + "mask disagrees with the selected classes");
        bool pixels_ok = true;
        for (int c = 0; c < 3; ++c) pixels_ok &= mix.image.at(c, y, x) == (from_source ? xs.at(c, y, x) : xt.at(c, y, x));
        v.check(pixels_ok, tag + "mixed pixel from the wrong image");
        v.check(mix.label.at(y, x) == (from_source ? ys.at(y, x) : pl.labels.at(y, x)), tag + "mixed label from the wrong map");
        v.check(mix.valid_mask[p] == (from_source ? 1 : pl.valid[p]), tag + "validity mask wrong");
      }
    }
  }
  return v;
}

}  // namespace pipa::test
