#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pipa/tensor.hpp"

namespace pipa::train {

/// Serializable optimizer slots, keyed "<slot>.<parameter name>".
struct OptimizerState {
  std::string kind;
  std::int64_t steps = 0;
  std::map<std::string, std::vector<float>> slots;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;

  /// Applies one update from the accumulated gradients.
  virtual void step(std::span<Parameter* const> params, double learning_rate) = 0;

  virtual OptimizerState state() const = 0;
  virtual void load_state(const OptimizerState& state) = 0;
};

/// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  AdamW(double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<Parameter* const> params, double learning_rate) override;
  OptimizerState state() const override;
  void load_state(const OptimizerState& state) override;

 private:
  double weight_decay_;
  double beta1_;
  double beta2_;
  double eps_;
  std::int64_t steps_ = 0;
  std::map<std::string, std::vector<float>> m_;
  std::map<std::string, std::vector<float>> v_;
};

/// Heavy-ball SGD with coupled L2 decay.
class Sgd final : public Optimizer {
 public:
  Sgd(double momentum, double weight_decay);

  void step(std::span<Parameter* const> params, double learning_rate) override;
  OptimizerState state() const override;
  void load_state(const OptimizerState& state) override;

 private:
  double momentum_;
  double weight_decay_;
  std::int64_t steps_ = 0;
  std::map<std::string, std::vector<float>> velocity_;
};

/// kind: "adamw" or "sgd".
std::unique_ptr<Optimizer> make_optimizer(const std::string& kind, double weight_decay);

}  // namespace pipa::train
