#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pipa/image.hpp"
#include "pipa/rng.hpp"
#include "pipa/tensor.hpp"

namespace pipa::mixing {

struct PseudoLabel {
  LabelMap labels;                 ///< per-pixel argmax, ties to the lowest class id
  std::vector<float> confidence;   ///< max softmax probability
  std::vector<std::uint8_t> valid; ///< confidence > threshold
};

/// Pseudo-labels from one image's teacher scores: sample `index` of an
/// (N,C,H,W) score tensor. Throws on non-finite scores or C < 2.
PseudoLabel pseudo_label(const Tensor& teacher_scores, int index, double threshold);

struct MixResult {
  Image image;
  LabelMap label;
  std::vector<std::uint8_t> source_mask;
  std::vector<std::uint8_t> valid_mask;
};

/// Picks ceil(|K|/2) of the classes present in `source_labels` (ignore
/// excluded), uniformly without replacement, returned in ascending order.
std::vector<std::uint8_t> select_mix_classes(const LabelMap& source_labels, Rng& rng);

/// Copy-paste of the selected source classes onto the target sample.
MixResult classmix(const Image& source_image, const LabelMap& source_labels, const Image& target_image,
                   const PseudoLabel& target_pseudo, std::span<const std::uint8_t> selected_classes);

MixResult classmix(const Image& source_image, const LabelMap& source_labels, const Image& target_image,
                   const PseudoLabel& target_pseudo, Rng& rng);

}  // namespace pipa::mixing
