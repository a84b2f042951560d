#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pipa/checkpoint.hpp"
#include "pipa/data_synth.hpp"
#include "pipa/eval.hpp"
#include "pipa/geometry.hpp"
#include "pipa/losses.hpp"
#include "pipa/mixing.hpp"
#include "pipa/model.hpp"
#include "pipa/optimizer.hpp"

namespace pipa::train {

struct TrainConfig {
  int iterations = 4000;
  int batch_size = 4;
  double learning_rate = 1e-3;
  int warmup = 150;
  double weight_decay = 0.01;
  std::string optimizer = "adamw";
  double alpha = 0.1;
  double beta = 0.1;
  double threshold = 0.968;
  double ema_momentum = 0.999;
  model::TeacherInit teacher_init = model::TeacherInit::kCopy;
  int patch_size = 48;
  double resize_min = 0.5;
  double resize_max = 2.0;
  double iou_min = 0.1;
  double iou_max = 1.0;
  losses::ContrastConfig contrast;
  data::AugmentParams augment;
  bool enable_pixel = true;
  bool enable_patch = true;
  bool pixel_on_mixed = false;      ///< also contrast mixed images against the mixed labels
  bool augment_crops = true;        ///< independent photometric augmentation of each patch crop
  bool ignore_mixed_cells = false;  ///< drop embedding cells whose stride block mixes classes
  std::uint64_t seed = 0;
  int eval_interval = 500;  ///< 0 disables periodic evaluation
  double holdout_fraction = 0.2;
  int max_consecutive_skips = 3;

  void validate() const;
};

/// Source samples with labels, unlabelled target images, and a held-out
/// labelled target split that only the evaluator reads.
struct TrainData {
  std::vector<Sample> source;
  std::vector<Image> target;
  std::vector<Sample> target_eval;
};

TrainData split_train_data(std::vector<Sample> source, std::vector<Sample> target, double holdout_fraction);

/// Loads <data_dir> written by data::write_dataset ("source" and "target").
TrainData load_train_data(const std::filesystem::path& data_dir, double holdout_fraction);

struct Batch {
  std::vector<const Sample*> source;
  std::vector<const Image*> target;
};

/// Everything a step derives from the teacher and the rng, fixed before the
/// student's forward pass.
struct StepPlan {
  Tensor source_images;
  std::vector<LabelMap> source_labels;
  Tensor mixed_images;
  std::vector<mixing::MixResult> mixes;
  std::vector<geometry::CropPair> crops;
  std::vector<geometry::CorrespondenceMap> correspondences;
  Tensor crop_images;  ///< (2N,3,P,P): first crops then second crops
  std::vector<std::uint8_t> pixel_cell_labels;
  int pixel_cells_per_image = 0;
  std::vector<int> pixel_anchors;
};

/// Independent streams so that switching a loss off does not perturb the
/// batches, mixes or augmentations the other branches see.
struct StepRngs {
  Rng batch;
  Rng mix;
  Rng crop;
  Rng anchor;

  static StepRngs from_seed(std::uint64_t seed);
  std::map<std::string, std::string> serialize() const;
  static StepRngs deserialize(const std::map<std::string, std::string>& states);
};

StepPlan plan_step(const model::TeacherState& teacher, const Batch& batch, const TrainConfig& cfg,
                   const model::ModelConfig& model_cfg, StepRngs& rngs);

/// Zeroes the bundle's gradients, runs every student branch of the plan and
/// accumulates gradients of the total loss. Returns the loss report; when the
/// total is non-finite the report's total is NaN and no gradient is computed.
losses::LossReport compute_gradients(model::ModelBundle& bundle, const StepPlan& plan, const TrainConfig& cfg);

/// Learning rate at 1-based iteration t: linear warmup, then constant.
double learning_rate_at(const TrainConfig& cfg, std::int64_t t);

struct StepOutcome {
  losses::LossReport report;
  bool skipped = false;
  double learning_rate = 0.0;
};

class Trainer {
 public:
  Trainer(const model::ModelConfig& model_cfg, const TrainConfig& cfg, std::shared_ptr<const TrainData> data);

  /// Restores bundle, teacher, optimizer, rng and iteration from a checkpoint.
  static Trainer resume(const model::Checkpoint& ckpt, const TrainConfig& cfg, std::shared_ptr<const TrainData> data);

  Batch sample_batch();

  /// One iteration: pseudo-label, mix, forward, losses, backward, optimizer
  /// step, EMA update. A non-finite loss leaves every parameter untouched.
  StepOutcome train_step(const Batch& batch);
  StepOutcome train_step() { return train_step(sample_batch()); }

  /// Student segmentation path on the held-out target split.
  eval::IoUReport evaluate() const;
  eval::ConfusionMatrix confusion() const;

  model::Checkpoint checkpoint(const std::string& config_text = {}) const;

  struct FitOptions {
    std::filesystem::path run_dir;
    std::string config_text;
    std::function<void(std::int64_t, const StepOutcome&, const std::optional<eval::IoUReport>&)> on_step;
  };

  /// Runs the remaining iterations, appending one JSON record per step to
  /// <run_dir>/metrics.jsonl and writing <run_dir>/checkpoint.bin at the end
  /// (and before the first step). Returns the final evaluation when a
  /// held-out split exists.
  std::optional<eval::IoUReport> fit(const FitOptions& options);

  model::ModelBundle& bundle() { return bundle_; }
  const model::ModelBundle& bundle() const { return bundle_; }
  model::TeacherState& teacher() { return teacher_; }
  const TrainConfig& config() const { return cfg_; }
  std::int64_t iteration() const { return iteration_; }
  StepRngs& rngs() { return rngs_; }

 private:
  TrainConfig cfg_;
  std::shared_ptr<const TrainData> data_;
  StepRngs rngs_;
  model::ModelBundle bundle_;
  model::TeacherState teacher_;
  std::unique_ptr<Optimizer> optimizer_;
  std::int64_t iteration_ = 0;
  int consecutive_skips_ = 0;
};

/// Matrix view of an (N,D,h,w) embedding tensor: row n*h*w + y*w + x.
losses::EmbeddingMatrix to_rows(const Tensor& embeddings);
losses::EmbeddingMatrix to_rows(const Tensor& embeddings, int first, int count);
/// Adds `scale * rows` into an (N,D,h,w) gradient tensor starting at sample `first`.
void add_rows(Tensor& grad, const losses::EmbeddingMatrix& rows, int first, double scale);

}  // namespace pipa::train
