#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pipa/geometry.hpp"
#include "pipa/losses.hpp"
#include "pipa/rng.hpp"

namespace pipa::verify {

// ---- brute-force references -------------------------------------------------
//
// Plain loops over every (anchor, candidate) pair. They share no code with the
// vectorized losses beyond the mined-count rule.

double brute_pixel_contrast(const losses::EmbeddingMatrix& e, const std::vector<std::uint8_t>& labels,
                            int cells_per_image, const std::vector<int>& anchors, const losses::ContrastConfig& cfg);

/// Candidates are classified by the resized-image location each cell covers,
/// computed from the crop rectangles rather than from a correspondence map.
double brute_patch_contrast(const losses::EmbeddingMatrix& f1, const losses::EmbeddingMatrix& f2,
                            const geometry::CropPair& pair, int stride, const losses::EmbeddingMatrix& pool,
                            const losses::ContrastConfig& cfg);

// ---- random instances ---------------------------------------------------------

struct PixelInstance {
  losses::EmbeddingMatrix embeddings;
  std::vector<std::uint8_t> labels;
  int cells_per_image = 0;
  std::vector<int> anchors;
  losses::ContrastConfig cfg;
};

struct PatchInstance {
  losses::EmbeddingMatrix f1;
  losses::EmbeddingMatrix f2;
  losses::EmbeddingMatrix pool;
  geometry::CropPair pair;
  geometry::CorrespondenceMap cm;
  int stride = 1;
  losses::ContrastConfig cfg;
};

/// At most max_cells rows, at most max_classes classes, some IGNORE cells,
/// always at least one anchor.
PixelInstance random_pixel_instance(Rng& rng, int max_cells, int max_classes, int max_dim, double hard_fraction);
/// 2 * grid cells + pool rows <= max_cells.
PatchInstance random_patch_instance(Rng& rng, int max_cells, int max_dim, double hard_fraction);

// ---- finite differences -----------------------------------------------------

/// Central differences of f at x, entry by entry.
losses::EmbeddingMatrix numeric_gradient(const std::function<double(const losses::EmbeddingMatrix&)>& f,
                                         const losses::EmbeddingMatrix& x, double eps = 1e-6);

/// ||a - n|| / max(||a||, ||n||, 1e-6), Frobenius norms.
double relative_error(const losses::EmbeddingMatrix& analytic, const losses::EmbeddingMatrix& numeric);

// ---- suite ------------------------------------------------------------------

struct SuiteOptions {
  int oracle_instances = 200;
  int gradient_instances = 50;
  double oracle_tolerance = 1e-6;    ///< absolute
  double gradient_tolerance = 1e-4;  ///< relative
  std::uint64_t seed = 2024;
  /// Mutation canary: negate the analytic patch gradient before comparing.
  bool inject_patch_sign_fault = false;
};

struct CheckResult {
  std::string name;
  int instances = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  bool passed = false;
};

std::vector<CheckResult> run_suite(const SuiteOptions& options);

}  // namespace pipa::verify
