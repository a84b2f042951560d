#include "pipa/model.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pipa::model {

void ModelConfig::validate() const {
  if (classes < 2) throw std::invalid_argument("model.classes must be >= 2");
  if (stride < 2 || !std::has_single_bit(static_cast<unsigned>(stride))) {
    throw std::invalid_argument("model.stride must be a power of two >= 2");
  }
  if (stem_channels <= 0 || body_channels <= 0 || feature_dim <= 0 || head_hidden <= 0 || embed_dim <= 0 ||
      res_blocks < 0) {
    throw std::invalid_argument("model widths must be positive");
  }
}

namespace {

template <typename P>
void append(std::vector<P*>& out, nn::Conv2d& c) {
  out.push_back(&c.weight);
  out.push_back(&c.bias);
}
template <typename P>
void append(std::vector<P*>& out, const nn::Conv2d& c) {
  out.push_back(&c.weight);
  out.push_back(&c.bias);
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor r = a;
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
  return r;
}

}  // namespace

Encoder::Encoder(const ModelConfig& cfg) {
  cfg.validate();
  const int n_stages = std::countr_zero(static_cast<unsigned>(cfg.stride));
  int ch = 3;
  for (int s = 0; s < n_stages; ++s) {
    const int out = s == 0 ? cfg.stem_channels : cfg.body_channels;
    stages_.emplace_back("encoder.stage" + std::to_string(s), ch, out, 3, 2, 1);
    ch = out;
  }
  for (int b = 0; b < cfg.res_blocks; ++b) {
    const std::string n = "encoder.block" + std::to_string(b);
    blocks_.emplace_back(nn::Conv2d(n + ".conv1", ch, ch, 3, 1, 1), nn::Conv2d(n + ".conv2", ch, ch, 3, 1, 1));
  }
  proj_ = nn::Conv2d("encoder.proj", ch, cfg.feature_dim, 1, 1, 0);
}

void Encoder::init(Rng& rng) {
  for (auto& s : stages_) s.init(rng);
  for (auto& [c1, c2] : blocks_) {
    c1.init(rng);
    c2.init(rng, 0.2f);
  }
  proj_.init(rng);
}

Tensor Encoder::forward(const Tensor& images, EncoderTrace* trace) const {
  Tensor x = images;
  if (trace) {
    trace->input = images;
    trace->stages.clear();
    trace->blocks.clear();
  }
  for (const auto& s : stages_) {
    x = s.forward(x);
    nn::relu_inplace(x);
    if (trace) trace->stages.push_back(x);
  }
  for (const auto& [c1, c2] : blocks_) {
    Tensor mid = c1.forward(x);
    nn::relu_inplace(mid);
    Tensor out = add(x, c2.forward(mid));
    nn::relu_inplace(out);
    if (trace) trace->blocks.push_back({std::move(mid), out});
    x = std::move(out);
  }
  Tensor f = proj_.forward(x);
  nn::relu_inplace(f);
  if (trace) trace->features = f;
  return f;
}

void Encoder::backward(const EncoderTrace& trace, Tensor d) {
  nn::relu_backward_inplace(trace.features, d);
  const Tensor& last = blocks_.empty() ? trace.stages.back() : trace.blocks.back().out;
  d = proj_.backward(last, d, true);
  for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) {
    auto& [c1, c2] = blocks_[b];
    const auto& blk = trace.blocks[b];
    const Tensor& in = b == 0 ? trace.stages.back() : trace.blocks[b - 1].out;
    nn::relu_backward_inplace(blk.out, d);
    Tensor dmid = c2.backward(blk.mid, d, true);
    nn::relu_backward_inplace(blk.mid, dmid);
    const Tensor din = c1.backward(in, dmid, true);
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += din.data[i];
  }
  for (int s = static_cast<int>(stages_.size()) - 1; s >= 0; --s) {
    nn::relu_backward_inplace(trace.stages[s], d);
    const Tensor& in = s == 0 ? trace.input : trace.stages[s - 1];
    d = stages_[s].backward(in, d, s > 0);
  }
}

std::vector<Parameter*> Encoder::parameters() {
  std::vector<Parameter*> out;
  for (auto& s : stages_) append(out, s);
  for (auto& [c1, c2] : blocks_) {
    append(out, c1);
    append(out, c2);
  }
  append(out, proj_);
  return out;
}

std::vector<const Parameter*> Encoder::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& s : stages_) append(out, s);
  for (const auto& [c1, c2] : blocks_) {
    append(out, c1);
    append(out, c2);
  }
  append(out, proj_);
  return out;
}

MlpHead::MlpHead(const std::string& name, int in, int hidden, int out)
    : fc1_(name + ".fc1", in, hidden, 1, 1, 0), fc2_(name + ".fc2", hidden, out, 1, 1, 0) {}

void MlpHead::init(Rng& rng) {
  fc1_.init(rng);
  fc2_.init(rng, 0.5f);
}

Tensor MlpHead::forward(const Tensor& x, Tensor* hidden) const {
  Tensor h = fc1_.forward(x);
  nn::relu_inplace(h);
  Tensor y = fc2_.forward(h);
  if (hidden) *hidden = std::move(h);
  return y;
}

Tensor MlpHead::backward(const Tensor& x, const Tensor& hidden, const Tensor& dy) {
  Tensor dh = fc2_.backward(hidden, dy, true);
  nn::relu_backward_inplace(hidden, dh);
  return fc1_.backward(x, dh, true);
}

void MlpHead::zero_output_layer() {
  std::fill(fc2_.weight.value.begin(), fc2_.weight.value.end(), 0.0f);
  std::fill(fc2_.bias.value.begin(), fc2_.bias.value.end(), 0.0f);
}

std::vector<Parameter*> MlpHead::parameters() {
  std::vector<Parameter*> out;
  append(out, fc1_);
  append(out, fc2_);
  return out;
}

std::vector<const Parameter*> MlpHead::parameters() const {
  std::vector<const Parameter*> out;
  append(out, fc1_);
  append(out, fc2_);
  return out;
}

SegmentationNet::SegmentationNet(const ModelConfig& cfg)
    : config(cfg), encoder(cfg), classifier("cls", cfg.feature_dim, cfg.head_hidden, cfg.classes) {}

std::vector<Parameter*> SegmentationNet::parameters() {
  auto out = encoder.parameters();
  for (auto* p : classifier.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> SegmentationNet::parameters() const {
  auto out = encoder.parameters();
  for (const auto* p : classifier.parameters()) out.push_back(p);
  return out;
}

ModelBundle::ModelBundle(const ModelConfig& cfg, Rng& rng)
    : net(cfg),
      pixel_head(MlpHead("pixel_head", cfg.feature_dim, cfg.head_hidden, cfg.embed_dim)),
      patch_head(MlpHead("patch_head", cfg.feature_dim, cfg.head_hidden, cfg.embed_dim)) {
  net.encoder.init(rng);
  net.classifier.init(rng);
  pixel_head->init(rng);
  patch_head->init(rng);
}

void ModelBundle::drop_projection_heads() {
  pixel_head.reset();
  patch_head.reset();
}

MlpHead& ModelBundle::head(EmbedHead which) {
  auto& h = which == EmbedHead::kPixel ? pixel_head : patch_head;
  if (!h) throw std::logic_error("projection heads were dropped from this bundle");
  return *h;
}

const MlpHead& ModelBundle::head(EmbedHead which) const {
  const auto& h = which == EmbedHead::kPixel ? pixel_head : patch_head;
  if (!h) throw std::logic_error("projection heads were dropped from this bundle");
  return *h;
}

std::vector<Parameter*> ModelBundle::parameters() {
  auto out = net.parameters();
  for (auto* h : {&pixel_head, &patch_head}) {
    if (!*h) continue;
    for (auto* p : (*h)->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> ModelBundle::parameters() const {
  auto out = net.parameters();
  for (const auto* h : {&pixel_head, &patch_head}) {
    if (!*h) continue;
    for (const auto* p : (*h)->parameters()) out.push_back(p);
  }
  return out;
}

void ModelBundle::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

void check_input(const ModelConfig& cfg, const Tensor& images) {
  if (images.c != 3 || images.h % cfg.stride != 0 || images.w % cfg.stride != 0 || images.h == 0 || images.w == 0) {
    throw std::invalid_argument("input " + std::to_string(images.c) + "x" + std::to_string(images.h) + "x" +
                                std::to_string(images.w) + " incompatible with stride " + std::to_string(cfg.stride));
  }
}

Tensor forward_segment(const SegmentationNet& net, const Tensor& images) {
  check_input(net.config, images);
  const Tensor coarse = net.classifier.forward(net.encoder.forward(images));
  return nn::Upsample(coarse.h, coarse.w, images.h, images.w).forward(coarse);
}

Tensor forward_embed(const ModelBundle& bundle, const Tensor& images, EmbedHead which) {
  check_input(bundle.config(), images);
  return bundle.head(which).forward(bundle.net.encoder.forward(images));
}

void normalize_embeddings(Tensor& e) {
  const std::size_t plane = e.plane();
  for (int n = 0; n < e.n; ++n) {
    float* s = e.sample(n);
    for (std::size_t p = 0; p < plane; ++p) {
      double sq = 0.0;
      for (int c = 0; c < e.c; ++c) sq += static_cast<double>(s[c * plane + p]) * s[c * plane + p];
      const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
      for (int c = 0; c < e.c; ++c) s[c * plane + p] = static_cast<float>(s[c * plane + p] * inv);
    }
  }
}

void TeacherState::sync() {
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < shadow[i].size(); ++j) params[i]->value[j] = static_cast<float>(shadow[i][j]);
  }
}

TeacherState make_teacher(const SegmentationNet& student, TeacherInit init, double momentum, Rng& rng) {
  TeacherState t;
  t.momentum = momentum;
  t.net = student;
  if (init == TeacherInit::kRandom) {
    t.net.encoder.init(rng);
    t.net.classifier.init(rng);
  }
  for (auto* p : t.net.parameters()) {
    p->grad.clear();
    p->grad.shrink_to_fit();
    t.shadow.emplace_back(p->value.begin(), p->value.end());
  }
  return t;
}

namespace {

template <typename S>
void ema_impl(std::span<double> teacher, std::span<const S> student, double m) {
  if (teacher.size() != student.size()) {
    throw std::invalid_argument("ema_update: teacher has " + std::to_string(teacher.size()) + " values, student " +
                                std::to_string(student.size()));
  }
  if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("ema_update: momentum must be in [0,1]");
  for (std::size_t i = 0; i < teacher.size(); ++i) teacher[i] = m * teacher[i] + (1.0 - m) * static_cast<double>(student[i]);
}

}  // namespace

void ema_update(std::span<double> teacher, std::span<const float> student, double m) { ema_impl(teacher, student, m); }
void ema_update(std::span<double> teacher, std::span<const double> student, double m) { ema_impl(teacher, student, m); }

void ema_update(TeacherState& teacher, const SegmentationNet& student, double m) {
  const auto sp = student.parameters();
  if (sp.size() != teacher.shadow.size()) throw std::invalid_argument("ema_update: parameter lists are not congruent");
  for (std::size_t i = 0; i < sp.size(); ++i) ema_update(teacher.shadow[i], std::span<const float>(sp[i]->value), m);
  teacher.sync();
}

std::size_t parameter_count(std::span<const Parameter* const> params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

}  // namespace pipa::model
