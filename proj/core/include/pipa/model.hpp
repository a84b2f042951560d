#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pipa/layers.hpp"
#include "pipa/rng.hpp"
#include "pipa/tensor.hpp"

namespace pipa::model {

struct ModelConfig {
  int classes = 5;
  int stride = 4;  ///< encoder downsampling k, a power of two >= 2
  int stem_channels = 16;
  int body_channels = 32;
  int res_blocks = 1;
  int feature_dim = 128;  ///< D_enc
  int head_hidden = 64;
  int embed_dim = 64;  ///< D_emb

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Activations retained for the encoder backward pass.
struct EncoderTrace {
  Tensor input;
  std::vector<Tensor> stages;  // post-ReLU output of each stride-2 conv
  struct Block {
    Tensor mid;  // relu(conv1(in))
    Tensor out;  // relu(in + conv2(mid))
  };
  std::vector<Block> blocks;
  Tensor features;
};

/// Strided residual conv encoder g: (N,3,H,W) -> (N,D_enc,H/k,W/k).
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const ModelConfig& cfg);

  void init(Rng& rng);
  Tensor forward(const Tensor& images, EncoderTrace* trace = nullptr) const;
  /// Accumulates parameter gradients for dL/dfeatures.
  void backward(const EncoderTrace& trace, Tensor dfeatures);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  std::vector<nn::Conv2d> stages_;
  std::vector<std::pair<nn::Conv2d, nn::Conv2d>> blocks_;
  nn::Conv2d proj_;
};

/// Two per-cell fully connected layers with a ReLU between them.
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(const std::string& name, int in, int hidden, int out);

  void init(Rng& rng);
  Tensor forward(const Tensor& x, Tensor* hidden = nullptr) const;
  Tensor backward(const Tensor& x, const Tensor& hidden, const Tensor& dy);
  void zero_output_layer();

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  nn::Conv2d fc1_;
  nn::Conv2d fc2_;
};

/// g_θ plus h_cls: everything inference needs.
struct SegmentationNet {
  ModelConfig config;
  Encoder encoder;
  MlpHead classifier;

  SegmentationNet() = default;
  explicit SegmentationNet(const ModelConfig& cfg);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

enum class EmbedHead { kPixel, kPatch };

/// Student bundle: segmentation path plus the two training-only projection heads.
class ModelBundle {
 public:
  ModelBundle() = default;
  ModelBundle(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return net.config; }
  bool has_projection_heads() const { return pixel_head.has_value() && patch_head.has_value(); }
  void drop_projection_heads();

  MlpHead& head(EmbedHead which);
  const MlpHead& head(EmbedHead which) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void zero_grad();

  SegmentationNet net;
  std::optional<MlpHead> pixel_head;
  std::optional<MlpHead> patch_head;
};

/// Class scores (N,C,H,W) at input resolution.
Tensor forward_segment(const SegmentationNet& net, const Tensor& images);

/// Projection-head embeddings (N,D_emb,H/k,W/k), not normalized.
Tensor forward_embed(const ModelBundle& bundle, const Tensor& images, EmbedHead which);

/// Rescales every cell's channel vector to unit length.
void normalize_embeddings(Tensor& embeddings);

/// Validates (H,W) against the encoder stride.
void check_input(const ModelConfig& cfg, const Tensor& images);

enum class TeacherInit { kCopy, kRandom };

/// EMA copy of the student's segmentation path. Never receives gradients.
/// The average accumulates in double; `net` holds its float rounding for
/// forward passes.
struct TeacherState {
  SegmentationNet net;
  std::vector<std::vector<double>> shadow;  // one per net parameter, same order
  double momentum = 0.999;

  /// Rounds the shadow into net's parameters.
  void sync();
};

TeacherState make_teacher(const SegmentationNet& student, TeacherInit init, double momentum, Rng& rng);

/// teacher <- m * teacher + (1 - m) * student, elementwise.
void ema_update(std::span<double> teacher, std::span<const float> student, double m);
void ema_update(std::span<double> teacher, std::span<const double> student, double m);
void ema_update(TeacherState& teacher, const SegmentationNet& student, double m);

std::size_t parameter_count(std::span<const Parameter* const> params);

}  // namespace pipa::model
