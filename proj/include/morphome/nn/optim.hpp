#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphome/nn/graph.hpp"

namespace morphome::nn {

template <typename Scalar>
void zero_grads(const std::vector<Parameter<Scalar>*>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename Scalar>
double global_grad_norm(const std::vector<Parameter<Scalar>*>& params) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

// Scales all gradients by threshold / norm when the global L2 norm exceeds
// threshold. Returns the norm before clipping.
template <typename Scalar>
double clip_global_norm(const std::vector<Parameter<Scalar>*>& params, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip threshold must be positive");
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
  if (norm > threshold) {
    const auto factor = static_cast<Scalar>(threshold / norm);
    for (auto* p : params) p->grad *= factor;
  }
  return norm;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

enum class LrScheduleKind { kConstant, kInverseSqrt };

struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::kConstant;
  double base_lr = 1e-3;
  long warmup_updates = 4000;
  double warmup_init_lr = 1e-7;

  // Learning rate for 1-based update number `step`.
  double at(long step) const {
    if (kind == LrScheduleKind::kConstant) return base_lr;
    if (step < warmup_updates)
      return warmup_init_lr + (base_lr - warmup_init_lr) * static_cast<double>(step) / static_cast<double>(warmup_updates);
    return base_lr * std::sqrt(static_cast<double>(warmup_updates) / static_cast<double>(step));
  }
};

// Bias-corrected Adam. Moments are zero-initialized; step() refuses to touch
// parameters if any gradient is non-finite.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Parameter<Scalar>*> params, AdamConfig config = {}) : params_(std::move(params)), config_(config) {
    for (auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() { step(config_.lr); }

  void step(double lr) {
    for (const auto* p : params_)
      if (!p->grad.allFinite()) throw NumericalError("non-finite gradient in parameter " + p->name);
    ++steps_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    const auto b1 = static_cast<Scalar>(config_.beta1), b2 = static_cast<Scalar>(config_.beta2);
    const auto step_size = static_cast<Scalar>(lr / bc1);
    const auto inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
    const auto eps = static_cast<Scalar>(config_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& g = params_[i]->grad;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
      params_[i]->value.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() * inv_sqrt_bc2 + eps);
    }
  }

  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }
  const AdamConfig& config() const { return config_; }
  std::vector<Matrix<Scalar>>& first_moments() { return m_; }
  std::vector<Matrix<Scalar>>& second_moments() { return v_; }
  const std::vector<Parameter<Scalar>*>& parameters() const { return params_; }

 private:
  std::vector<Parameter<Scalar>*> params_;
  AdamConfig config_;
  std::vector<Matrix<Scalar>> m_, v_;
  long steps_ = 0;
};

}  // namespace morphome::nn
