#include "pipa/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace pipa::train {

AdamW::AdamW(double weight_decay, double beta1, double beta2, double eps)
    : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(std::span<Parameter* const> params, double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (Parameter* p : params) {
    auto& m = m_[p->name];
    auto& v = v_[p->name];
    if (m.empty()) {
      m.assign(p->size(), 0.0f);
      v.assign(p->size(), 0.0f);
    }
    if (m.size() != p->size()) throw std::invalid_argument("AdamW: state size mismatch for " + p->name);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->grad[i];
      m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g);
      v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_) + weight_decay_ * p->value[i];
      p->value[i] = static_cast<float>(p->value[i] - lr * update);
    }
  }
}

OptimizerState AdamW::state() const {
  OptimizerState s{"adamw", steps_, {}};
  for (const auto& [k, v] : m_) s.slots["m." + k] = v;
  for (const auto& [k, v] : v_) s.slots["v." + k] = v;
  return s;
}

void AdamW::load_state(const OptimizerState& s) {
  if (s.kind != "adamw") throw std::invalid_argument("optimizer state is '" + s.kind + "', expected 'adamw'");
  steps_ = s.steps;
  m_.clear();
  v_.clear();
  for (const auto& [k, v] : s.slots) {
    if (k.starts_with("m.")) {
      m_[k.substr(2)] = v;
    } else if (k.starts_with("v.")) {
      v_[k.substr(2)] = v;
    }
  }
}

Sgd::Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

void Sgd::step(std::span<Parameter* const> params, double lr) {
  ++steps_;
  for (Parameter* p : params) {
    auto& vel = velocity_[p->name];
    if (vel.empty()) vel.assign(p->size(), 0.0f);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->grad[i] + weight_decay_ * p->value[i];
      vel[i] = static_cast<float>(momentum_ * vel[i] + g);
      p->value[i] = static_cast<float>(p->value[i] - lr * vel[i]);
    }
  }
}

OptimizerState Sgd::state() const {
  OptimizerState s{"sgd", steps_, {}};
  for (const auto& [k, v] : velocity_) s.slots["velocity." + k] = v;
  return s;
}

void Sgd::load_state(const OptimizerState& s) {
  if (s.kind != "sgd") throw std::invalid_argument("optimizer state is '" + s.kind + "', expected 'sgd'");
  steps_ = s.steps;
  velocity_.clear();
  for (const auto& [k, v] : s.slots) {
    if (k.starts_with("velocity.")) velocity_[k.substr(9)] = v;
  }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& kind, double weight_decay) {
  if (kind == "adamw") return std::make_unique<AdamW>(weight_decay);
  if (kind == "sgd") return std::make_unique<Sgd>(0.9, weight_decay);
  throw std::invalid_argument("unknown optimizer '" + kind + "' (expected adamw or sgd)");
}

}  // namespace pipa::train
