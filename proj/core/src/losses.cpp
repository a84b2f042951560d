#include "pipa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pipa::losses {

void ContrastConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("contrast.temperature must be > 0");
  if (!(hard_fraction > 0.0 && hard_fraction <= 1.0)) throw std::invalid_argument("contrast.hard_fraction must be in (0,1]");
  if (anchors_per_class < 1) throw std::invalid_argument("contrast.anchors_per_class must be >= 1");
}

std::size_t mined_count(std::size_t n, double fraction) {
  if (n == 0) return 0;
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

namespace {

/// Moves the `keep` best candidates (by `better`) to the front.
template <typename Better>
void select_front(std::vector<int>& idx, std::size_t keep, Better better) {
  if (keep < idx.size()) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), better);
  idx.resize(keep);
}

}  // namespace

ContrastResult contrast_from_sets(const EmbeddingMatrix& e, std::span<const AnchorSet> sets, const ContrastConfig& cfg,
                                  bool with_grad) {
  cfg.validate();
  const Eigen::Index rows = e.rows();
  ContrastResult result;
  if (with_grad) result.grad = EmbeddingMatrix::Zero(rows, e.cols());

  std::size_t total_pairs = 0;
  for (const auto& s : sets) total_pairs += mined_count(s.positives.size(), cfg.hard_fraction);
  result.anchors = sets.size();
  if (total_pairs == 0) return result;

  const Eigen::VectorXd norms = e.rowwise().norm().cwiseMax(1e-12);
  const EmbeddingMatrix u = e.array().colwise() / norms.array();

  std::vector<int> slot(static_cast<std::size_t>(rows), -1);
  std::vector<int> anchor_rows;
  for (const auto& s : sets) {
    if (s.anchor < 0 || s.anchor >= rows) throw std::out_of_range("anchor row out of range");
    if (slot[s.anchor] < 0) {
      slot[s.anchor] = static_cast<int>(anchor_rows.size());
      anchor_rows.push_back(s.anchor);
    }
  }
  EmbeddingMatrix ua(anchor_rows.size(), e.cols());
  for (std::size_t a = 0; a < anchor_rows.size(); ++a) ua.row(static_cast<Eigen::Index>(a)) = u.row(anchor_rows[a]);
  const double inv_t = 1.0 / cfg.temperature;
  const EmbeddingMatrix sim = (ua * u.transpose()) * inv_t;
  EmbeddingMatrix dsim;
  if (with_grad) dsim = EmbeddingMatrix::Zero(sim.rows(), sim.cols());

  const double w = 1.0 / static_cast<double>(total_pairs);
  double loss = 0.0;
  std::vector<int> pos;
  std::vector<int> neg;
  std::vector<double> ex;
  for (const auto& s : sets) {
    const Eigen::Index a = slot[s.anchor];
    auto srow = sim.row(a);
    const std::size_t kp = mined_count(s.positives.size(), cfg.hard_fraction);
    if (kp == 0) continue;

    pos.assign(s.positives.begin(), s.positives.end());
    select_front(pos, kp, [&](int x, int y) { return srow(x) != srow(y) ? srow(x) < srow(y) : x < y; });

    if (cfg.denominator == Denominator::kInfoNce) {
      neg.assign(s.negatives.begin(), s.negatives.end());
      select_front(neg, mined_count(neg.size(), cfg.hard_fraction),
                   [&](int x, int y) { return srow(x) != srow(y) ? srow(x) > srow(y) : x < y; });
      double neg_max = -std::numeric_limits<double>::infinity();
      for (int k : neg) neg_max = std::max(neg_max, srow(k));
      ex.resize(neg.size());
      for (int j : pos) {
        const double sj = srow(j);
        const double m = std::max(sj, neg_max);
        double z = std::exp(sj - m);
        for (std::size_t t = 0; t < neg.size(); ++t) z += ex[t] = std::exp(srow(neg[t]) - m);
        loss += -(sj - m) + std::log(z);
        if (!with_grad) continue;
        dsim(a, j) += (std::exp(sj - m) / z - 1.0) * w;
        for (std::size_t t = 0; t < neg.size(); ++t) dsim(a, neg[t]) += ex[t] / z * w;
      }
    } else {
      // Denominator spans the anchor itself and every candidate, unmined.
      double m = srow(s.anchor);
      for (int k : s.positives) m = std::max(m, srow(k));
      for (int k : s.negatives) m = std::max(m, srow(k));
      double z = std::exp(srow(s.anchor) - m);
      for (int k : s.positives) z += std::exp(srow(k) - m);
      for (int k : s.negatives) z += std::exp(srow(k) - m);
      const double lse = m + std::log(z);
      for (int j : pos) loss += lse - srow(j);
      if (!with_grad) continue;
      const double scale = static_cast<double>(pos.size()) * w;
      dsim(a, s.anchor) += std::exp(srow(s.anchor) - lse) * scale;
      for (int k : s.positives) dsim(a, k) += std::exp(srow(k) - lse) * scale;
      for (int k : s.negatives) dsim(a, k) += std::exp(srow(k) - lse) * scale;
      for (int j : pos) dsim(a, j) -= w;
    }
  }
  result.loss = loss * w;
  result.pairs = total_pairs;
  if (!with_grad) return result;

  EmbeddingMatrix du = (dsim.transpose() * ua) * inv_t;
  const EmbeddingMatrix da = (dsim * u) * inv_t;
  for (std::size_t a = 0; a < anchor_rows.size(); ++a) du.row(anchor_rows[a]) += da.row(static_cast<Eigen::Index>(a));
  // Back through row normalization: (I - u u^T) du / |e|.
  const Eigen::VectorXd radial = (u.array() * du.array()).rowwise().sum();
  const EmbeddingMatrix tangent = du.array() - (u.array().colwise() * radial.array());
  result.grad = tangent.array().colwise() / norms.array();
  return result;
}

std::vector<int> sample_pixel_anchors(std::span<const std::uint8_t> labels, int cells_per_image, int anchors_per_class,
                                      Rng& rng) {
  if (cells_per_image <= 0 || labels.size() % static_cast<std::size_t>(cells_per_image) != 0) {
    throw std::invalid_argument("cell label count is not a multiple of cells_per_image");
  }
  const int images = static_cast<int>(labels.size()) / cells_per_image;
  std::vector<int> anchors;
  std::vector<std::vector<int>> by_class(256);
  for (int b = 0; b < images; ++b) {
    for (auto& v : by_class) v.clear();
    for (int i = 0; i < cells_per_image; ++i) {
      const int row = b * cells_per_image + i;
      if (labels[row] != kIgnore) by_class[labels[row]].push_back(row);
    }
    for (const auto& cells : by_class) {
      if (cells.size() < 2) continue;
      std::sample(cells.begin(), cells.end(), std::back_inserter(anchors),
                  std::min<std::size_t>(cells.size(), static_cast<std::size_t>(anchors_per_class)), rng);
    }
  }
  std::sort(anchors.begin(), anchors.end());
  return anchors;
}

std::vector<AnchorSet> pixel_anchor_sets(std::span<const std::uint8_t> labels, int cells_per_image,
                                         std::span<const int> anchors, bool cross_batch) {
  if (cells_per_image <= 0 || labels.size() % static_cast<std::size_t>(cells_per_image) != 0) {
    throw std::invalid_argument("cell label count is not a multiple of cells_per_image");
  }
  const int total = static_cast<int>(labels.size());
  std::vector<AnchorSet> sets;
  sets.reserve(anchors.size());
  for (int a : anchors) {
    if (a < 0 || a >= total || labels[a] == kIgnore) throw std::invalid_argument("anchor must be a labelled cell");
    const int img = a / cells_per_image;
    AnchorSet s;
    s.anchor = a;
    for (int r = 0; r < total; ++r) {
      const auto l = labels[r];
      if (l == kIgnore || r == a) continue;
      const bool same_image = r / cells_per_image == img;
      if (l == labels[a]) {
        if (same_image) s.positives.push_back(r);
      } else if (same_image || cross_batch) {
        s.negatives.push_back(r);
      }
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

ContrastResult pixel_contrast(const EmbeddingMatrix& e, std::span<const std::uint8_t> labels, int cells_per_image,
                              std::span<const int> anchors, const ContrastConfig& cfg, bool with_grad) {
  if (static_cast<std::size_t>(e.rows()) != labels.size()) {
    throw std::invalid_argument("pixel_contrast: " + std::to_string(e.rows()) + " embeddings vs " +
                                std::to_string(labels.size()) + " labels");
  }
  const auto sets = pixel_anchor_sets(labels, cells_per_image, anchors, cfg.cross_batch);
  return contrast_from_sets(e, sets, cfg, with_grad);
}

std::vector<AnchorSet> patch_anchor_sets(const geometry::CorrespondenceMap& cm, int pool_rows) {
  if (cm.pairs.empty()) throw std::invalid_argument("patch_contrast: empty correspondence");
  const int n1 = cm.grid_height * cm.grid_width;
  const int total = 2 * n1 + pool_rows;
  std::vector<AnchorSet> sets;
  sets.reserve(2 * cm.pairs.size());
  for (const auto& [c1, c2] : cm.pairs) {
    const int r1 = c1.row * cm.grid_width + c1.col;
    const int r2 = n1 + c2.row * cm.grid_width + c2.col;
    for (const auto& [anchor, positive] : {std::pair{r1, r2}, std::pair{r2, r1}}) {
      AnchorSet s;
      s.anchor = anchor;
      s.positives = {positive};
      s.negatives.reserve(static_cast<std::size_t>(total) - 2);
      for (int r = 0; r < total; ++r) {
        if (r != anchor && r != positive) s.negatives.push_back(r);
      }
      sets.push_back(std::move(s));
    }
  }
  return sets;
}

PatchContrastResult patch_contrast(const EmbeddingMatrix& f1, const EmbeddingMatrix& f2,
                                   const geometry::CorrespondenceMap& cm, const EmbeddingMatrix& pool,
                                   const ContrastConfig& cfg, bool with_grad) {
  const Eigen::Index n1 = static_cast<Eigen::Index>(cm.grid_height) * cm.grid_width;
  if (f1.rows() != n1 || f2.rows() != n1 || f2.cols() != f1.cols() || (pool.rows() > 0 && pool.cols() != f1.cols())) {
    throw std::invalid_argument("patch_contrast: embedding shapes do not match the correspondence grid");
  }
  const auto sets = patch_anchor_sets(cm, static_cast<int>(pool.rows()));
  EmbeddingMatrix all(2 * n1 + pool.rows(), f1.cols());
  all.topRows(n1) = f1;
  all.middleRows(n1, n1) = f2;
  if (pool.rows() > 0) all.bottomRows(pool.rows()) = pool;
  auto r = contrast_from_sets(all, sets, cfg, with_grad);
  PatchContrastResult out;
  out.loss = r.loss;
  out.pairs = r.pairs;
  if (with_grad) {
    out.grad_f1 = r.grad.topRows(n1);
    out.grad_f2 = r.grad.middleRows(n1, n1);
    out.grad_pool = r.grad.bottomRows(pool.rows());
  }
  return out;
}

CeResult masked_cross_entropy(const Tensor& scores, std::span<const LabelMap> labels,
                              std::span<const std::vector<std::uint8_t>> masks) {
  if (static_cast<std::size_t>(scores.n) != labels.size() || (!masks.empty() && masks.size() != labels.size())) {
    throw std::invalid_argument("cross_entropy: batch size mismatch");
  }
  const std::size_t plane = scores.plane();
  CeResult r;
  r.grad = Tensor(scores.n, scores.c, scores.h, scores.w);
  std::vector<double> prob(scores.c);
  double sum = 0.0;
  for (int n = 0; n < scores.n; ++n) {
    const LabelMap& lab = labels[n];
    if (lab.height() != scores.h || lab.width() != scores.w) throw std::invalid_argument("cross_entropy: shape mismatch");
    if (!masks.empty() && masks[n].size() != plane) throw std::invalid_argument("cross_entropy: mask shape mismatch");
    const float* s = scores.sample(n);
    float* g = r.grad.sample(n);
    for (std::size_t p = 0; p < plane; ++p) {
      const auto y = lab.values()[p];
      if (y == kIgnore || (!masks.empty() && !masks[n][p])) continue;
      if (y >= scores.c) throw std::invalid_argument("cross_entropy: label exceeds class count");
      double m = s[p];
      for (int c = 1; c < scores.c; ++c) m = std::max(m, static_cast<double>(s[c * plane + p]));
      double z = 0.0;
      for (int c = 0; c < scores.c; ++c) z += prob[c] = std::exp(s[c * plane + p] - m);
      sum += std::log(z) - (s[y * plane + p] - m);
      for (int c = 0; c < scores.c; ++c) g[c * plane + p] = static_cast<float>(prob[c] / z - (c == y ? 1.0 : 0.0));
      ++r.count;
    }
  }
  if (r.count == 0) return r;
  r.loss = sum / static_cast<double>(r.count);
  const float inv = 1.0f / static_cast<float>(r.count);
  for (float& v : r.grad.data) v *= inv;
  return r;
}

CeResult ce_source(const Tensor& scores, std::span<const LabelMap> labels) { return masked_cross_entropy(scores, labels); }

CeResult ce_target_mixed(const Tensor& scores, std::span<const mixing::MixResult> mixes) {
  std::vector<LabelMap> labels;
  std::vector<std::vector<std::uint8_t>> masks;
  labels.reserve(mixes.size());
  masks.reserve(mixes.size());
  for (const auto& m : mixes) {
    labels.push_back(m.label);
    masks.push_back(m.valid_mask);
  }
  return masked_cross_entropy(scores, labels, masks);
}

LossReport total_loss(const LossComponents& c, double alpha, double beta) {
  for (double v : {c.ce_source, c.ce_target, c.pixel, c.patch}) {
    if (!std::isfinite(v)) throw std::domain_error("non-finite loss component");
  }
  LossReport r;
  r.ce_source = c.ce_source;
  r.ce_target = c.ce_target;
  r.pixel = c.pixel;
  r.patch = c.patch;
  r.total = c.ce_source + c.ce_target + alpha * c.pixel + beta * c.patch;
  return r;
}

}  // namespace pipa::losses
