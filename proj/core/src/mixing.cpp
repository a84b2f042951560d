#include "pipa/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pipa::mixing {

PseudoLabel pseudo_label(const Tensor& scores, int index, double threshold) {
  if (scores.c < 2) throw std::invalid_argument("pseudo_label: need at least 2 classes");
  if (index < 0 || index >= scores.n) throw std::out_of_range("pseudo_label: sample index out of range");
  PseudoLabel pl;
  pl.labels = LabelMap(scores.h, scores.w);
  pl.confidence.resize(scores.plane());
  pl.valid.resize(scores.plane());
  const float* s = scores.sample(index);
  const std::size_t plane = scores.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    double best_v = s[p];
    for (int c = 0; c < scores.c; ++c) {
      const double v = s[c * plane + p];
      if (!std::isfinite(v)) throw std::invalid_argument("pseudo_label: non-finite teacher score");
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    double z = 0.0;
    for (int c = 0; c < scores.c; ++c) z += std::exp(static_cast<double>(s[c * plane + p]) - best_v);
    const double conf = 1.0 / z;
    pl.labels.values()[p] = static_cast<std::uint8_t>(best);
    pl.confidence[p] = static_cast<float>(conf);
    pl.valid[p] = conf > threshold ? 1 : 0;
  }
  return pl;
}

std::vector<std::uint8_t> select_mix_classes(const LabelMap& labels, Rng& rng) {
  std::vector<std::uint8_t> present;
  std::vector<bool> seen(256, false);
  for (auto v : labels.values()) {
    if (v != kIgnore && !seen[v]) {
      seen[v] = true;
      present.push_back(v);
    }
  }
  std::sort(present.begin(), present.end());
  const std::size_t take = (present.size() + 1) / 2;
  std::vector<std::uint8_t> selected;
  std::sample(present.begin(), present.end(), std::back_inserter(selected), take, rng);
  return selected;
}

MixResult classmix(const Image& xs, const LabelMap& ys, const Image& xt, const PseudoLabel& pl,
                   std::span<const std::uint8_t> selected) {
  const int h = xs.height();
  const int w = xs.width();
  if (ys.height() != h || ys.width() != w || xt.height() != h || xt.width() != w || pl.labels.height() != h ||
      pl.labels.width() != w || pl.valid.size() != static_cast<std::size_t>(h) * w) {
    throw std::invalid_argument("classmix: raster shapes differ");
  }
  std::vector<bool> pick(256, false);
  for (auto c : selected) pick[c] = true;

  MixResult r{xt, pl.labels, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 0), pl.valid};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      if (!pick[ys.at(y, x)]) continue;
      r.source_mask[p] = 1;
      r.valid_mask[p] = 1;
      r.label.at(y, x) = ys.at(y, x);
      for (int c = 0; c < Image::kChannels; ++c) r.image.at(c, y, x) = xs.at(c, y, x);
    }
  }
  return r;
}

MixResult classmix(const Image& xs, const LabelMap& ys, const Image& xt, const PseudoLabel& pl, Rng& rng) {
  const auto selected = select_mix_classes(ys, rng);
  return classmix(xs, ys, xt, pl, selected);
}

}  // namespace pipa::mixing
