#include "pipa/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace pipa::verify {

namespace {

double cosine(const losses::EmbeddingMatrix& a, int i, const losses::EmbeddingMatrix& b, int j) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    dot += a(i, d) * b(j, d);
    na += a(i, d) * a(i, d);
    nb += b(j, d) * b(j, d);
  }
  return dot / (std::max(std::sqrt(na), 1e-12) * std::max(std::sqrt(nb), 1e-12));
}

/// Loss summed over the anchor's retained positives; adds their count to pairs.
double anchor_loss(const std::vector<std::pair<double, int>>& positives, const std::vector<std::pair<double, int>>& negatives,
                   double self_cos, const losses::ContrastConfig& cfg, std::size_t& pairs) {
  auto pos = positives;
  auto neg = negatives;
  std::sort(pos.begin(), pos.end());  // farthest (lowest cosine) first
  std::sort(neg.begin(), neg.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  const std::size_t kp = losses::mined_count(pos.size(), cfg.hard_fraction);
  const std::size_t kn = losses::mined_count(neg.size(), cfg.hard_fraction);
  auto r = [&](double c) { return std::exp(c / cfg.temperature); };
  double sum = 0.0;
  if (cfg.denominator == losses::Denominator::kInfoNce) {
    double rn = 0.0;
    for (std::size_t k = 0; k < kn; ++k) rn += r(neg[k].first);
    for (std::size_t j = 0; j < kp; ++j) sum += -std::log(r(pos[j].first) / (r(pos[j].first) + rn));
  } else {
    double all = r(self_cos);
    for (const auto& p : positives) all += r(p.first);
    for (const auto& n : negatives) all += r(n.first);
    for (std::size_t j = 0; j < kp; ++j) sum += -std::log(r(pos[j].first) / all);
  }
  pairs += kp;
  return sum;
}

}  // namespace

double brute_pixel_contrast(const losses::EmbeddingMatrix& e, const std::vector<std::uint8_t>& labels,
                            int cells_per_image, const std::vector<int>& anchors, const losses::ContrastConfig& cfg) {
  double total = 0.0;
  std::size_t pairs = 0;
  const int n = static_cast<int>(labels.size());
  for (int a : anchors) {
    std::vector<std::pair<double, int>> pos, neg;
    for (int j = 0; j < n; ++j) {
      if (j == a || labels[j] == kIgnore) continue;
      const bool same_image = j / cells_per_image == a / cells_per_image;
      if (labels[j] == labels[a] && same_image) {
        pos.emplace_back(cosine(e, a, e, j), j);
      } else if (labels[j] != labels[a] && (same_image || cfg.cross_batch)) {
        neg.emplace_back(cosine(e, a, e, j), j);
      }
    }
    total += anchor_loss(pos, neg, cosine(e, a, e, a), cfg, pairs);
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

double brute_patch_contrast(const losses::EmbeddingMatrix& f1, const losses::EmbeddingMatrix& f2,
                            const geometry::CropPair& pair, int stride, const losses::EmbeddingMatrix& pool,
                            const losses::ContrastConfig& cfg) {
  const int gw = pair.rect1.width() / stride;
  const int n1 = static_cast<int>(f1.rows());
  // Stack every candidate with its image location; pool rows get none.
  struct Row {
    const losses::EmbeddingMatrix* m;
    int i;
    bool located;
    int x, y;
  };
  std::vector<Row> rows;
  for (int i = 0; i < n1; ++i) rows.push_back({&f1, i, true, pair.rect1.x0 + (i % gw) * stride, pair.rect1.y0 + (i / gw) * stride});
  for (int i = 0; i < n1; ++i) rows.push_back({&f2, i, true, pair.rect2.x0 + (i % gw) * stride, pair.rect2.y0 + (i / gw) * stride});
  for (int i = 0; i < pool.rows(); ++i) rows.push_back({&pool, i, false, 0, 0});

  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < 2 * static_cast<std::size_t>(n1); ++a) {
    const Row& A = rows[a];
    int partner = -1;
    for (std::size_t j = 0; j < 2 * static_cast<std::size_t>(n1); ++j) {
      if (j != a && rows[j].m != A.m && rows[j].x == A.x && rows[j].y == A.y) partner = static_cast<int>(j);
    }
    if (partner < 0) continue;  // not in the overlap
    std::vector<std::pair<double, int>> pos{{cosine(*A.m, A.i, *rows[partner].m, rows[partner].i), partner}};
    std::vector<std::pair<double, int>> neg;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].located && rows[j].x == A.x && rows[j].y == A.y) continue;
      neg.emplace_back(cosine(*A.m, A.i, *rows[j].m, rows[j].i), static_cast<int>(j));
    }
    total += anchor_loss(pos, neg, cosine(*A.m, A.i, *A.m, A.i), cfg, pairs);
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

PixelInstance random_pixel_instance(Rng& rng, int max_cells, int max_classes, int max_dim, double hard_fraction) {
  std::uniform_int_distribution<int> images_d(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    PixelInstance p;
    const int images = images_d(rng);
    p.cells_per_image = std::uniform_int_distribution<int>(2, std::max(2, max_cells / images))(rng);
    const int classes = std::uniform_int_distribution<int>(2, max_classes)(rng);
    const int dim = std::uniform_int_distribution<int>(2, max_dim)(rng);
    const int n = images * p.cells_per_image;
    for (int i = 0; i < n; ++i) {
      p.labels.push_back(u(rng) < 0.1 ? kIgnore : static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, classes - 1)(rng)));
    }
    p.embeddings.resize(n, dim);
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < dim; ++d) p.embeddings(i, d) = g(rng);
    }
    p.cfg.temperature = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    p.cfg.hard_fraction = hard_fraction;
    p.cfg.cross_batch = u(rng) < 0.5;
    p.cfg.anchors_per_class = std::uniform_int_distribution<int>(1, 8)(rng);
    p.anchors = losses::sample_pixel_anchors(p.labels, p.cells_per_image, p.cfg.anchors_per_class, rng);
    if (!p.anchors.empty()) return p;
  }
}

PatchInstance random_patch_instance(Rng& rng, int max_cells, int max_dim, double hard_fraction) {
  std::normal_distribution<double> g(0.0, 1.0);
  PatchInstance p;
  p.stride = std::uniform_int_distribution<int>(1, 2)(rng);
  int max_grid = 1;
  while (2 * (max_grid + 1) * (max_grid + 1) <= max_cells) ++max_grid;
  const int grid = std::uniform_int_distribution<int>(1, max_grid)(rng);
  const int patch = grid * p.stride;
  const int h = patch + std::uniform_int_distribution<int>(0, 2 * patch)(rng);
  const int w = patch + std::uniform_int_distribution<int>(0, 2 * patch)(rng);
  const geometry::CropSampler sampler{patch, 1.0, 1.0, 0.1, 1.0, p.stride};
  p.pair = geometry::sample_crop_pair(h, w, sampler, rng);
  p.cm = geometry::build_correspondence(p.pair, p.stride);
  const int dim = std::uniform_int_distribution<int>(2, max_dim)(rng);
  const int n1 = grid * grid;
  const int pool_rows = std::uniform_int_distribution<int>(0, std::min(16, max_cells - 2 * n1))(rng);
  auto fill = [&](losses::EmbeddingMatrix& m, int rows) {
    m.resize(rows, dim);
    for (int i = 0; i < rows; ++i) {
      for (int d = 0; d < dim; ++d) m(i, d) = g(rng);
    }
  };
  fill(p.f1, n1);
  fill(p.f2, n1);
  fill(p.pool, pool_rows);
  p.cfg.temperature = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  p.cfg.hard_fraction = hard_fraction;
  return p;
}

losses::EmbeddingMatrix numeric_gradient(const std::function<double(const losses::EmbeddingMatrix&)>& f,
                                         const losses::EmbeddingMatrix& x, double eps) {
  losses::EmbeddingMatrix grad(x.rows(), x.cols());
  losses::EmbeddingMatrix probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      probe(i, j) = x(i, j) + eps;
      const double up = f(probe);
      probe(i, j) = x(i, j) - eps;
      const double down = f(probe);
      probe(i, j) = x(i, j);
      grad(i, j) = (up - down) / (2.0 * eps);
    }
  }
  return grad;
}

double relative_error(const losses::EmbeddingMatrix& a, const losses::EmbeddingMatrix& n) {
  if (a.rows() != n.rows() || a.cols() != n.cols()) throw std::invalid_argument("relative_error: shape mismatch");
  return (a - n).norm() / std::max({a.norm(), n.norm(), 1e-6});
}

namespace {

losses::EmbeddingMatrix stack_patch(const PatchInstance& p) {
  losses::EmbeddingMatrix all(p.f1.rows() + p.f2.rows() + p.pool.rows(), p.f1.cols());
  all << p.f1, p.f2, p.pool;
  return all;
}

double patch_loss_of(const PatchInstance& p, const losses::EmbeddingMatrix& all) {
  const Eigen::Index n1 = p.f1.rows();
  return losses::patch_contrast(all.topRows(n1), all.middleRows(n1, n1), p.cm, all.bottomRows(p.pool.rows()), p.cfg, false).loss;
}

template <class Body>
CheckResult timed(std::string name, int instances, double tolerance, Body body) {
  CheckResult r{std::move(name), instances, 0.0, tolerance, 0.0, false};
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < instances; ++i) r.worst = std::max(r.worst, body(i));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.passed = std::isfinite(r.worst) && r.worst <= tolerance;
  return r;
}

}  // namespace

std::vector<CheckResult> run_suite(const SuiteOptions& o) {
  std::vector<CheckResult> out;
  Rng rng = make_rng(o.seed, 0);

  out.push_back(timed("pixel oracle", o.oracle_instances, o.oracle_tolerance, [&](int) {
    const auto p = random_pixel_instance(rng, 64, 4, 8, 1.0);
    const double fast = losses::pixel_contrast(p.embeddings, p.labels, p.cells_per_image, p.anchors, p.cfg, false).loss;
    return std::abs(fast - brute_pixel_contrast(p.embeddings, p.labels, p.cells_per_image, p.anchors, p.cfg));
  }));
  out.push_back(timed("patch oracle", o.oracle_instances, o.oracle_tolerance, [&](int) {
    const auto p = random_patch_instance(rng, 64, 8, 1.0);
    const double fast = losses::patch_contrast(p.f1, p.f2, p.cm, p.pool, p.cfg, false).loss;
    return std::abs(fast - brute_patch_contrast(p.f1, p.f2, p.pair, p.stride, p.pool, p.cfg));
  }));

  const double fractions[] = {1.0, 0.5, 0.25};
  out.push_back(timed("pixel gradient", o.gradient_instances, o.gradient_tolerance, [&](int i) {
    const auto p = random_pixel_instance(rng, 16, 4, 8, fractions[i % 3]);
    const auto analytic = losses::pixel_contrast(p.embeddings, p.labels, p.cells_per_image, p.anchors, p.cfg).grad;
    const auto numeric = numeric_gradient(
        [&](const losses::EmbeddingMatrix& x) {
          return losses::pixel_contrast(x, p.labels, p.cells_per_image, p.anchors, p.cfg, false).loss;
        },
        p.embeddings);
    return relative_error(analytic, numeric);
  }));
  out.push_back(timed("patch gradient", o.gradient_instances, o.gradient_tolerance, [&](int i) {
    const auto p = random_patch_instance(rng, 16, 8, fractions[i % 3]);
    const auto res = losses::patch_contrast(p.f1, p.f2, p.cm, p.pool, p.cfg);
    losses::EmbeddingMatrix analytic(res.grad_f1.rows() + res.grad_f2.rows() + res.grad_pool.rows(), p.f1.cols());
    analytic << res.grad_f1, res.grad_f2, res.grad_pool;
    if (o.inject_patch_sign_fault) analytic = -analytic;
    const auto numeric = numeric_gradient([&](const losses::EmbeddingMatrix& x) { return patch_loss_of(p, x); }, stack_patch(p));
    return relative_error(analytic, numeric);
  }));
  return out;
}

}  // namespace pipa::verify
