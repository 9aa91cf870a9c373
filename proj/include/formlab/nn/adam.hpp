#pragma once

#include <cmath>
#include <string>

#include "formlab/common/error.hpp"
#include "formlab/common/types.hpp"

namespace formlab::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2_weight = 0.0;  // added to the gradient as l2_weight * param
};

/// Adam optimizer state for one flat parameter vector. The L2 term is folded
/// into the gradient, so logged losses stay pure likelihoods.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }
  long step_count() const { return step_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }

  void step(Vec& params, const Vec& grads) {
    require(params.size() == grads.size(), "adam_step: params and grads differ in size");
    for (Eigen::Index i = 0; i < grads.size(); ++i) {
      if (!std::isfinite(grads(i)))
        throw NumericalError("adam_step: non-finite gradient at index " + std::to_string(i) +
                             " (step " + std::to_string(step_) + ")");
    }
    if (m_.size() != params.size()) {
      m_ = Vec::Zero(params.size());
      v_ = Vec::Zero(params.size());
    }
    ++step_;
    Vec g = grads;
    if (cfg_.l2_weight != 0.0) g += cfg_.l2_weight * params;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const double lr = cfg_.learning_rate;
    params.array() -= lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.epsilon);
  }

  /// Scalar variant used for Lagrange multipliers and temperatures.
  double step_scalar(double value, double grad) {
    Vec p(1), g(1);
    p(0) = value;
    g(0) = grad;
    step(p, g);
    return p(0);
  }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  long step_ = 0;
};

}  // namespace formlab::nn
