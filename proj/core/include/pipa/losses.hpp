#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "pipa/geometry.hpp"
#include "pipa/image.hpp"
#include "pipa/mixing.hpp"
#include "pipa/rng.hpp"
#include "pipa/tensor.hpp"

namespace pipa::losses {

/// How the softmax denominator of a contrastive pair is formed.
///   kInfoNce: r(i,j) + sum over mined negatives r(i,k)
///   kLiteral: sum over every candidate cell of the anchor's pool, anchor included
enum class Denominator { kInfoNce, kLiteral };

struct ContrastConfig {
  double temperature = 0.1;
  int anchors_per_class = 32;  ///< per class per image
  double hard_fraction = 0.1;  ///< farthest positives / nearest negatives kept per anchor
  bool cross_batch = true;     ///< draw negatives from the whole batch
  Denominator denominator = Denominator::kInfoNce;

  void validate() const;
};

/// One row per cell, one column per embedding dimension.
using EmbeddingMatrix = Eigen::MatrixXd;

/// Candidate sets for one anchor row. Indices address rows of the embedding
/// matrix the sets are evaluated against.
struct AnchorSet {
  int anchor = 0;
  std::vector<int> positives;
  std::vector<int> negatives;
};

struct ContrastResult {
  double loss = 0.0;
  std::size_t pairs = 0;
  std::size_t anchors = 0;
  EmbeddingMatrix grad;  ///< dL/d(raw rows); empty when not requested
};

/// Number of candidates kept by hard mining: floor(fraction * n), at least 1
/// when n > 0.
std::size_t mined_count(std::size_t n, double fraction);

/// Mean over retained (anchor, positive) pairs of
///   -log( r(i,j) / denominator ),  r(a,b) = exp(cos(a,b) / temperature),
/// after keeping the hardest positives and negatives of every anchor.
ContrastResult contrast_from_sets(const EmbeddingMatrix& embeddings, std::span<const AnchorSet> sets,
                                  const ContrastConfig& cfg, bool with_grad = true);

// ---- pixel-wise contrast ------------------------------------------------------

/// Up to anchors_per_class anchors per class per image, drawn from classes with
/// at least two labelled cells in that image. Rows are image-major; result is
/// sorted ascending.
std::vector<int> sample_pixel_anchors(std::span<const std::uint8_t> cell_labels, int cells_per_image,
                                      int anchors_per_class, Rng& rng);

/// Positives: same class in the anchor's image (self excluded). Negatives:
/// labelled cells of other classes in the anchor's image, and in every other
/// image when cross_batch.
std::vector<AnchorSet> pixel_anchor_sets(std::span<const std::uint8_t> cell_labels, int cells_per_image,
                                         std::span<const int> anchors, bool cross_batch);

ContrastResult pixel_contrast(const EmbeddingMatrix& embeddings, std::span<const std::uint8_t> cell_labels,
                              int cells_per_image, std::span<const int> anchors, const ContrastConfig& cfg,
                              bool with_grad = true);

// ---- patch-wise contrast ------------------------------------------------------

struct PatchContrastResult {
  double loss = 0.0;
  std::size_t pairs = 0;
  EmbeddingMatrix grad_f1;
  EmbeddingMatrix grad_f2;
  EmbeddingMatrix grad_pool;
};

/// Rows of f1/f2 are the row-major cells of each crop's grid. Every overlap
/// cell anchors once per crop with its counterpart as the positive; negatives
/// are all other cells of both crops plus the pool.
std::vector<AnchorSet> patch_anchor_sets(const geometry::CorrespondenceMap& cm, int pool_rows);

PatchContrastResult patch_contrast(const EmbeddingMatrix& f1, const EmbeddingMatrix& f2,
                                   const geometry::CorrespondenceMap& cm, const EmbeddingMatrix& pool,
                                   const ContrastConfig& cfg, bool with_grad = true);

// ---- segmentation cross-entropy ----------------------------------------------

struct CeResult {
  double loss = 0.0;
  std::size_t count = 0;
  Tensor grad;  ///< dL/dscores, same shape as scores
};

/// Mean of -log softmax(scores)[label] over pixels that are labelled and,
/// when masks are given, masked in. Zero with count 0 if nothing qualifies.
CeResult masked_cross_entropy(const Tensor& scores, std::span<const LabelMap> labels,
                              std::span<const std::vector<std::uint8_t>> masks = {});

CeResult ce_source(const Tensor& scores, std::span<const LabelMap> labels);
CeResult ce_target_mixed(const Tensor& scores, std::span<const mixing::MixResult> mixes);

// ---- total --------------------------------------------------------------------

struct LossComponents {
  double ce_source = 0.0;
  double ce_target = 0.0;
  double pixel = 0.0;
  double patch = 0.0;
};

struct LossReport {
  double ce_source = 0.0;
  double ce_target = 0.0;
  double pixel = 0.0;
  double patch = 0.0;
  double total = 0.0;
  std::size_t source_pixels = 0;
  std::size_t target_pixels = 0;
  std::size_t pixel_anchors = 0;
  std::size_t pixel_pairs = 0;
  std::size_t patch_pairs = 0;
};

/// total = ce_source + ce_target + alpha * pixel + beta * patch. Throws
/// std::domain_error on a non-finite component.
LossReport total_loss(const LossComponents& c, double alpha, double beta);

}  // namespace pipa::losses
