#include "pipa/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "pipa/version.hpp"

namespace pipa::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (iterations < 0) fail("iterations must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (warmup < 0) fail("warmup must be >= 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) fail("alpha and beta must be >= 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold must be in [0,1]");
  if (!(ema_momentum >= 0.0 && ema_momentum <= 1.0)) fail("ema_momentum must be in [0,1]");
  if (patch_size <= 0) fail("patch_size must be > 0");
  if (!(resize_min > 0.0 && resize_max >= resize_min)) fail("resize range must satisfy 0 < min <= max");
  if (!(iou_min >= 0.0 && iou_max <= 1.0 && iou_min <= iou_max)) fail("IoU range must lie in [0,1]");
  if (eval_interval < 0) fail("eval_interval must be >= 0");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) fail("holdout_fraction must be in [0,1)");
  if (max_consecutive_skips < 1) fail("max_consecutive_skips must be >= 1");
  contrast.validate();
}

TrainData split_train_data(std::vector<Sample> source, std::vector<Sample> target, double holdout_fraction) {
  if (source.empty() || target.empty()) throw std::invalid_argument("both domains need at least one sample");
  const auto held = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(target.size())));
  if (held >= target.size()) throw std::invalid_argument("holdout leaves no target training images");
  TrainData d;
  d.source = std::move(source);
  const std::size_t train_n = target.size() - held;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (i < train_n) {
      d.target.push_back(std::move(target[i].image));
    } else {
      d.target_eval.push_back(std::move(target[i]));
    }
  }
  return d;
}

TrainData load_train_data(const std::filesystem::path& data_dir, double holdout_fraction) {
  return split_train_data(data::load_domain(data_dir, "source"), data::load_domain(data_dir, "target"), holdout_fraction);
}

StepRngs StepRngs::from_seed(std::uint64_t seed) {
  return {make_rng(seed, 10), make_rng(seed, 11), make_rng(seed, 12), make_rng(seed, 13)};
}

std::map<std::string, std::string> StepRngs::serialize() const {
  return {{"batch", serialize_rng(batch)}, {"mix", serialize_rng(mix)}, {"crop", serialize_rng(crop)},
          {"anchor", serialize_rng(anchor)}};
}

StepRngs StepRngs::deserialize(const std::map<std::string, std::string>& s) {
  for (const char* k : {"batch", "mix", "crop", "anchor"}) {
    if (!s.contains(k)) throw std::runtime_error(std::string("checkpoint missing rng state '") + k + "'");
  }
  return {deserialize_rng(s.at("batch")), deserialize_rng(s.at("mix")), deserialize_rng(s.at("crop")),
          deserialize_rng(s.at("anchor"))};
}

namespace {

/// Cell labels at stride k; optionally ignore cells whose block mixes classes.
void append_cell_labels(const LabelMap& labels, int stride, bool ignore_mixed, std::vector<std::uint8_t>& out) {
  const LabelMap cells = downsample_labels(labels, stride);
  for (int y = 0; y < cells.height(); ++y) {
    for (int x = 0; x < cells.width(); ++x) {
      std::uint8_t v = cells.at(y, x);
      if (ignore_mixed && v != kIgnore) {
        for (int dy = 0; dy < stride && v != kIgnore; ++dy) {
          for (int dx = 0; dx < stride; ++dx) {
            if (labels.at(y * stride + dy, x * stride + dx) != v) {
              v = kIgnore;
              break;
            }
          }
        }
      }
      out.push_back(v);
    }
  }
}

}  // namespace

StepPlan plan_step(const model::TeacherState& teacher, const Batch& batch, const TrainConfig& cfg,
                   const model::ModelConfig& model_cfg, StepRngs& rngs) {
  if (batch.source.empty() || batch.target.empty()) throw std::invalid_argument("plan_step: empty batch");
  StepPlan plan;
  std::vector<Image> src_images;
  for (const Sample* s : batch.source) {
    src_images.push_back(s->image);
    plan.source_labels.push_back(s->label);
  }
  plan.source_images = stack_images(src_images);

  std::vector<Image> tgt_images;
  for (const Image* t : batch.target) tgt_images.push_back(*t);
  const Tensor teacher_scores = model::forward_segment(teacher.net, stack_images(tgt_images));

  std::vector<Image> mixed;
  for (std::size_t b = 0; b < tgt_images.size(); ++b) {
    const Sample& src = *batch.source[b % batch.source.size()];
    const auto pl = mixing::pseudo_label(teacher_scores, static_cast<int>(b), cfg.threshold);
    auto mix = mixing::classmix(src.image, src.label, tgt_images[b], pl, rngs.mix);
    mix.image = data::augment(mix.image, cfg.augment, rngs.mix);
    mixed.push_back(mix.image);
    plan.mixes.push_back(std::move(mix));
  }
  plan.mixed_images = stack_images(mixed);

  if (cfg.enable_patch) {
    const geometry::CropSampler sampler{cfg.patch_size, cfg.resize_min, cfg.resize_max,
                                        cfg.iou_min,    cfg.iou_max,    model_cfg.stride};
    std::vector<Image> firsts;
    std::vector<Image> seconds;
    for (const Image& t : tgt_images) {
      const auto cp = geometry::sample_crop_pair(t.height(), t.width(), sampler, rngs.crop);
      const Image resized = resize_bilinear(t, cp.resized_height, cp.resized_width);
      firsts.push_back(crop(resized, cp.rect1.x0, cp.rect1.y0, cp.rect1.x1, cp.rect1.y1));
      seconds.push_back(crop(resized, cp.rect2.x0, cp.rect2.y0, cp.rect2.x1, cp.rect2.y1));
      if (cfg.augment_crops) {
        firsts.back() = data::augment(firsts.back(), cfg.augment, rngs.crop);
        seconds.back() = data::augment(seconds.back(), cfg.augment, rngs.crop);
      }
      plan.correspondences.push_back(geometry::build_correspondence(cp, model_cfg.stride));
      plan.crops.push_back(cp);
    }
    firsts.insert(firsts.end(), seconds.begin(), seconds.end());
    plan.crop_images = stack_images(firsts);
  }

  if (cfg.enable_pixel) {
    const int k = model_cfg.stride;
    plan.pixel_cells_per_image = (plan.source_images.h / k) * (plan.source_images.w / k);
    for (const auto& lab : plan.source_labels) append_cell_labels(lab, k, cfg.ignore_mixed_cells, plan.pixel_cell_labels);
    if (cfg.pixel_on_mixed) {
      for (const auto& mix : plan.mixes) {
        LabelMap masked = mix.label;
        for (std::size_t p = 0; p < masked.size(); ++p) {
          if (!mix.valid_mask[p]) masked.values()[p] = kIgnore;
        }
        append_cell_labels(masked, k, cfg.ignore_mixed_cells, plan.pixel_cell_labels);
      }
    }
    plan.pixel_anchors = losses::sample_pixel_anchors(plan.pixel_cell_labels, plan.pixel_cells_per_image,
                                                      cfg.contrast.anchors_per_class, rngs.anchor);
  }
  return plan;
}

losses::EmbeddingMatrix to_rows(const Tensor& e, int first, int count) {
  const int hw = static_cast<int>(e.plane());
  losses::EmbeddingMatrix m(static_cast<Eigen::Index>(count) * hw, e.c);
  for (int n = 0; n < count; ++n) {
    const float* s = e.sample(first + n);
    for (int d = 0; d < e.c; ++d) {
      for (int p = 0; p < hw; ++p) m(static_cast<Eigen::Index>(n) * hw + p, d) = s[d * hw + p];
    }
  }
  return m;
}

losses::EmbeddingMatrix to_rows(const Tensor& e) { return to_rows(e, 0, e.n); }

void add_rows(Tensor& grad, const losses::EmbeddingMatrix& rows, int first, double scale) {
  const int hw = static_cast<int>(grad.plane());
  const int count = static_cast<int>(rows.rows()) / hw;
  for (int n = 0; n < count; ++n) {
    float* g = grad.sample(first + n);
    for (int d = 0; d < grad.c; ++d) {
      for (int p = 0; p < hw; ++p) g[d * hw + p] += static_cast<float>(scale * rows(static_cast<Eigen::Index>(n) * hw + p, d));
    }
  }
}

namespace {

/// Encoder + classifier activations for one batch.
struct SegPass {
  model::EncoderTrace trace;
  Tensor features;
  Tensor cls_hidden;
  nn::Upsample up;
  Tensor logits;
};

SegPass segment_pass(const model::SegmentationNet& net, const Tensor& images) {
  model::check_input(net.config, images);
  SegPass s;
  s.features = net.encoder.forward(images, &s.trace);
  const Tensor coarse = net.classifier.forward(s.features, &s.cls_hidden);
  s.up = nn::Upsample(coarse.h, coarse.w, images.h, images.w);
  s.logits = s.up.forward(coarse);
  return s;
}

void accumulate(Tensor& into, const Tensor& add) {
  for (std::size_t i = 0; i < into.data.size(); ++i) into.data[i] += add.data[i];
}

}  // namespace

losses::LossReport compute_gradients(model::ModelBundle& bundle, const StepPlan& plan, const TrainConfig& cfg) {
  bundle.zero_grad();
  const losses::ContrastConfig& ccfg = cfg.contrast;

  SegPass src = segment_pass(bundle.net, plan.source_images);
  SegPass mix = segment_pass(bundle.net, plan.mixed_images);
  const auto ce_s = losses::ce_source(src.logits, plan.source_labels);
  const auto ce_t = losses::ce_target_mixed(mix.logits, plan.mixes);

  // Pixel-wise contrast on source (and optionally mixed) embeddings.
  Tensor pix_src_hidden, pix_mix_hidden, pix_src, pix_mix;
  losses::ContrastResult pixel;
  if (cfg.enable_pixel) {
    auto& head = bundle.head(model::EmbedHead::kPixel);
    pix_src = head.forward(src.features, &pix_src_hidden);
    losses::EmbeddingMatrix rows = to_rows(pix_src);
    if (cfg.pixel_on_mixed) {
      pix_mix = head.forward(mix.features, &pix_mix_hidden);
      const losses::EmbeddingMatrix more = to_rows(pix_mix);
      losses::EmbeddingMatrix both(rows.rows() + more.rows(), rows.cols());
      both << rows, more;
      rows = std::move(both);
    }
    pixel = losses::pixel_contrast(rows, plan.pixel_cell_labels, plan.pixel_cells_per_image, plan.pixel_anchors, ccfg);
  }

  // Patch-wise contrast between the two crops of each target image.
  model::EncoderTrace crop_trace;
  Tensor crop_features, patch_hidden, patch_embed;
  double patch_loss = 0.0;
  std::size_t patch_pairs = 0;
  std::vector<losses::PatchContrastResult> patch_results;
  const int n_img = static_cast<int>(plan.correspondences.size());
  if (cfg.enable_patch) {
    crop_features = bundle.net.encoder.forward(plan.crop_images, &crop_trace);
    patch_embed = bundle.head(model::EmbedHead::kPatch).forward(crop_features, &patch_hidden);
    for (int b = 0; b < n_img; ++b) {
      const auto f1 = to_rows(patch_embed, b, 1);
      const auto f2 = to_rows(patch_embed, n_img + b, 1);
      losses::EmbeddingMatrix pool(0, patch_embed.c);
      if (ccfg.cross_batch && n_img > 1) {
        const Eigen::Index cells = f1.rows();
        pool.resize(cells * 2 * (n_img - 1), patch_embed.c);
        Eigen::Index r = 0;
        for (int j = 0; j < 2 * n_img; ++j) {
          if (j == b || j == n_img + b) continue;
          pool.middleRows(r, cells) = to_rows(patch_embed, j, 1);
          r += cells;
        }
      }
      patch_results.push_back(losses::patch_contrast(f1, f2, plan.correspondences[b], pool, ccfg));
      patch_loss += patch_results.back().loss * static_cast<double>(patch_results.back().pairs);
      patch_pairs += patch_results.back().pairs;
    }
    if (patch_pairs > 0) patch_loss /= static_cast<double>(patch_pairs);
  }

  losses::LossReport report;
  try {
    report = losses::total_loss({ce_s.loss, ce_t.loss, pixel.loss, patch_loss}, cfg.enable_pixel ? cfg.alpha : 0.0,
                                cfg.enable_patch ? cfg.beta : 0.0);
  } catch (const std::domain_error&) {
    report.ce_source = ce_s.loss;
    report.ce_target = ce_t.loss;
    report.pixel = pixel.loss;
    report.patch = patch_loss;
    report.total = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  report.source_pixels = ce_s.count;
  report.target_pixels = ce_t.count;
  report.pixel_anchors = pixel.anchors;
  report.pixel_pairs = pixel.pairs;
  report.patch_pairs = patch_pairs;

  // Source branch backward.
  Tensor d_src = bundle.net.classifier.backward(src.features, src.cls_hidden, src.up.backward(ce_s.grad));
  Tensor d_mix = bundle.net.classifier.backward(mix.features, mix.cls_hidden, mix.up.backward(ce_t.grad));
  if (cfg.enable_pixel && pixel.pairs > 0) {
    auto& head = bundle.head(model::EmbedHead::kPixel);
    Tensor g_src(pix_src.n, pix_src.c, pix_src.h, pix_src.w);
    add_rows(g_src, pixel.grad.topRows(static_cast<Eigen::Index>(pix_src.n) * pix_src.plane()), 0, cfg.alpha);
    accumulate(d_src, head.backward(src.features, pix_src_hidden, g_src));
    if (cfg.pixel_on_mixed) {
      Tensor g_mix(pix_mix.n, pix_mix.c, pix_mix.h, pix_mix.w);
      add_rows(g_mix, pixel.grad.bottomRows(static_cast<Eigen::Index>(pix_mix.n) * pix_mix.plane()), 0, cfg.alpha);
      accumulate(d_mix, head.backward(mix.features, pix_mix_hidden, g_mix));
    }
  }
  bundle.net.encoder.backward(src.trace, std::move(d_src));
  bundle.net.encoder.backward(mix.trace, std::move(d_mix));

  if (cfg.enable_patch && patch_pairs > 0) {
    Tensor g(patch_embed.n, patch_embed.c, patch_embed.h, patch_embed.w);
    for (int b = 0; b < n_img; ++b) {
      const auto& r = patch_results[b];
      const double scale = cfg.beta * static_cast<double>(r.pairs) / static_cast<double>(patch_pairs);
      add_rows(g, r.grad_f1, b, scale);
      add_rows(g, r.grad_f2, n_img + b, scale);
      const Eigen::Index cells = r.grad_f1.rows();
      Eigen::Index row = 0;
      for (int j = 0; j < 2 * n_img && r.grad_pool.rows() > 0; ++j) {
        if (j == b || j == n_img + b) continue;
        add_rows(g, r.grad_pool.middleRows(row, cells), j, scale);
        row += cells;
      }
    }
    const Tensor d_crop = bundle.head(model::EmbedHead::kPatch).backward(crop_features, patch_hidden, g);
    bundle.net.encoder.backward(crop_trace, d_crop);
  }
  return report;
}

double learning_rate_at(const TrainConfig& cfg, std::int64_t t) {
  if (cfg.warmup > 0 && t < cfg.warmup) return cfg.learning_rate * static_cast<double>(t) / cfg.warmup;
  return cfg.learning_rate;
}

Trainer::Trainer(const model::ModelConfig& model_cfg, const TrainConfig& cfg, std::shared_ptr<const TrainData> data)
    : cfg_(cfg), data_(std::move(data)), rngs_(StepRngs::from_seed(cfg.seed)) {
  cfg_.validate();
  model_cfg.validate();
  if (!data_ || data_->source.empty() || data_->target.empty()) throw std::invalid_argument("trainer needs source and target data");
  Rng init = make_rng(cfg_.seed, 1);
  bundle_ = model::ModelBundle(model_cfg, init);
  teacher_ = model::make_teacher(bundle_.net, cfg_.teacher_init, cfg_.ema_momentum, init);
  optimizer_ = make_optimizer(cfg_.optimizer, cfg_.weight_decay);
}

Trainer Trainer::resume(const model::Checkpoint& ckpt, const TrainConfig& cfg, std::shared_ptr<const TrainData> data) {
  Trainer t(ckpt.model, cfg, std::move(data));
  model::import_parameters(t.bundle_, ckpt.student);
  if (!t.bundle_.has_projection_heads()) throw std::runtime_error("cannot resume training from an inference-only checkpoint");
  model::import_teacher(t.teacher_, ckpt.teacher);
  t.teacher_.momentum = ckpt.teacher_momentum;
  t.optimizer_->load_state(ckpt.optimizer);
  t.iteration_ = ckpt.iteration;
  t.rngs_ = StepRngs::deserialize(ckpt.rng_states);
  return t;
}

Batch Trainer::sample_batch() {
  Batch b;
  std::uniform_int_distribution<std::size_t> us(0, data_->source.size() - 1);
  std::uniform_int_distribution<std::size_t> ut(0, data_->target.size() - 1);
  for (int i = 0; i < cfg_.batch_size; ++i) b.source.push_back(&data_->source[us(rngs_.batch)]);
  for (int i = 0; i < cfg_.batch_size; ++i) b.target.push_back(&data_->target[ut(rngs_.batch)]);
  return b;
}

StepOutcome Trainer::train_step(const Batch& batch) {
  const StepPlan plan = plan_step(teacher_, batch, cfg_, bundle_.config(), rngs_);
  StepOutcome out;
  out.report = compute_gradients(bundle_, plan, cfg_);
  ++iteration_;
  out.learning_rate = learning_rate_at(cfg_, iteration_);
  if (!std::isfinite(out.report.total)) {
    out.skipped = true;
    if (++consecutive_skips_ >= cfg_.max_consecutive_skips) {
      throw std::runtime_error("aborting: " + std::to_string(consecutive_skips_) + " consecutive non-finite losses at iteration " +
                               std::to_string(iteration_));
    }
    return out;
  }
  consecutive_skips_ = 0;
  const auto params = bundle_.parameters();
  optimizer_->step(params, out.learning_rate);
  model::ema_update(teacher_, bundle_.net, teacher_.momentum);
  return out;
}

eval::ConfusionMatrix Trainer::confusion() const { return eval::evaluate(bundle_.net, data_->target_eval); }

eval::IoUReport Trainer::evaluate() const { return eval::miou(confusion()); }

model::Checkpoint Trainer::checkpoint(const std::string& config_text) const {
  model::Checkpoint c;
  c.model = bundle_.config();
  c.student = model::export_parameters(bundle_);
  c.teacher = model::export_teacher(teacher_);
  c.teacher_momentum = teacher_.momentum;
  c.optimizer = optimizer_->state();
  c.iteration = iteration_;
  c.rng_states = rngs_.serialize();
  c.config_text = config_text;
  return c;
}

std::optional<eval::IoUReport> Trainer::fit(const FitOptions& opt) {
  std::filesystem::create_directories(opt.run_dir);
  if (!opt.config_text.empty()) {
    std::ofstream(opt.run_dir / "config.txt") << opt.config_text;
  }
  std::ofstream(opt.run_dir / "run_info.txt") << "version = " << kVersion << "\nseed = " << cfg_.seed << "\n";
  const auto ckpt_path = opt.run_dir / "checkpoint.bin";
  if (iteration_ == 0) model::save_checkpoint(ckpt_path, checkpoint(opt.config_text));
  std::ofstream metrics(opt.run_dir / "metrics.jsonl", std::ios::app);
  if (!metrics) throw std::runtime_error("cannot open metrics log under " + opt.run_dir.string());

  const bool can_eval = !data_->target_eval.empty();
  std::optional<eval::IoUReport> last;
  while (iteration_ < cfg_.iterations) {
    const StepOutcome out = train_step();
    std::optional<eval::IoUReport> ev;
    if (can_eval && ((cfg_.eval_interval > 0 && iteration_ % cfg_.eval_interval == 0) || iteration_ == cfg_.iterations)) {
      ev = evaluate();
      last = ev;
    }
    const auto& r = out.report;
    nlohmann::json rec = {{"iteration", iteration_},        {"ce_source", r.ce_source},
                          {"ce_target", r.ce_target},       {"pixel", r.pixel},
                          {"patch", r.patch},               {"total", std::isfinite(r.total) ? nlohmann::json(r.total) : nlohmann::json(nullptr)},
                          {"lr", out.learning_rate},        {"skipped", out.skipped},
                          {"source_pixels", r.source_pixels}, {"target_pixels", r.target_pixels},
                          {"pixel_pairs", r.pixel_pairs},   {"patch_pairs", r.patch_pairs}};
    if (ev) rec["eval_miou"] = ev->mean;
    metrics << rec.dump() << '\n';
    if (opt.on_step) opt.on_step(iteration_, out, ev);
  }
  metrics.flush();
  model::save_checkpoint(ckpt_path, checkpoint(opt.config_text));
  if (!last && can_eval) last = evaluate();
  return last;
}

}  // namespace pipa::train
