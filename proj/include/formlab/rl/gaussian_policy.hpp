#pragma once

#include <memory>
#include <numbers>

#include "formlab/density/gmm.hpp"
#include "formlab/envs/rollout.hpp"
#include "formlab/nn/dense_net.hpp"

namespace formlab::rl {

/// Diagonal Gaussian over actions, one column per state.
struct GaussianHead {
  Mat mean;   // A x n
  Mat raw;    // A x n
  Mat scale;  // A x n, softplus(raw) + 1e-4
};

inline double gaussian_log_prob(const Eigen::Ref<const Vec>& mean, const Eigen::Ref<const Vec>& scale,
                                const Eigen::Ref<const Vec>& a) {
  double lp = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const double z = (a(d) - mean(d)) / scale(d);
    lp += -0.5 * z * z - std::log(scale(d)) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

/// Splits a (2A x n) network output into mean and scale.
inline GaussianHead split_head(const Mat& out, int action_dim) {
  require(out.rows() == 2 * action_dim, "Gaussian head has wrong row count");
  GaussianHead h;
  h.mean = out.topRows(action_dim);
  h.raw = out.bottomRows(action_dim);
  h.scale = h.raw.unaryExpr([](double r) { return density::effective_scale(r); });
  return h;
}

/// Gradient wrt the (2A x n) network output given gradients wrt mean and scale.
inline Mat join_head_grad(const GaussianHead& h, const Mat& d_mean, const Mat& d_scale) {
  Mat d(2 * h.mean.rows(), h.mean.cols());
  d.topRows(h.mean.rows()) = d_mean;
  d.bottomRows(h.mean.rows()) = (d_scale.array() * h.raw.unaryExpr([](double r) { return density::sigmoid(r); }).array()).matrix();
  return d;
}

struct PolicyConfig {
  int hidden = 256;
  int elu_layers = 1;  // hidden ELU layers after the layer-norm/tanh input layer
  bool layer_norm = true;
};

/// Observation -> Linear -> LayerNorm -> tanh -> [Linear -> ELU]* -> Linear(2A).
struct GaussianPolicy {
  nn::DenseNet net;
  int obs_dim = 0;
  int action_dim = 0;

  GaussianHead head(const Mat& obs, nn::DenseNet::Cache* cache = nullptr) const {
    return split_head(net.forward(obs, cache), action_dim);
  }

  Vec sample(const Vec& obs, Rng& rng, double* logp = nullptr) const {
    const GaussianHead h = head(Mat(obs));
    Vec a(action_dim);
    for (int d = 0; d < action_dim; ++d) a(d) = h.mean(d, 0) + h.scale(d, 0) * standard_normal(rng);
    if (logp) *logp = gaussian_log_prob(h.mean.col(0), h.scale.col(0), a);
    return a;
  }

  Vec mean_action(const Vec& obs) const { return head(Mat(obs)).mean.col(0); }

  double log_prob(const Vec& obs, const Vec& a) const {
    const GaussianHead h = head(Mat(obs));
    return gaussian_log_prob(h.mean.col(0), h.scale.col(0), a);
  }

  /// Per-column log-probabilities and, when requested, the gradient of
  /// sum_j weight_j * log pi(a_j | x_j) with respect to the parameters.
  Vec log_prob_batch(const Mat& obs, const Mat& actions, const Vec* weights = nullptr, Vec* grad = nullptr) const {
    nn::DenseNet::Cache cache;
    const GaussianHead h = head(obs, grad ? &cache : nullptr);
    const Eigen::Index n = obs.cols();
    Vec lp(n);
    Mat d_mean(action_dim, n), d_scale(action_dim, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      lp(j) = gaussian_log_prob(h.mean.col(j), h.scale.col(j), actions.col(j));
      const double w = weights ? (*weights)(j) : 1.0;
      for (int d = 0; d < action_dim; ++d) {
        const double s = h.scale(d, j);
        const double diff = actions(d, j) - h.mean(d, j);
        d_mean(d, j) = w * diff / (s * s);
        d_scale(d, j) = w * (diff * diff / (s * s * s) - 1.0 / s);
      }
    }
    if (grad) net.backward(cache, join_head_grad(h, d_mean, d_scale), *grad);
    return lp;
  }
};

inline GaussianPolicy make_policy(int obs_dim, int action_dim, const PolicyConfig& cfg, Rng& rng) {
  using nn::Activation;
  std::vector<int> widths{cfg.hidden};
  std::vector<Activation> acts{Activation::tanh};
  std::vector<bool> ln{cfg.layer_norm};
  for (int i = 0; i < cfg.elu_layers; ++i) {
    widths.push_back(cfg.hidden);
    acts.push_back(Activation::elu);
    ln.push_back(false);
  }
  widths.push_back(2 * action_dim);
  acts.push_back(Activation::identity);
  ln.push_back(false);
  GaussianPolicy p{nn::make_mlp(obs_dim, widths, acts, ln), obs_dim, action_dim};
  p.net.init(rng);
  // Small output layer: initial actions near zero with unit-order scale.
  p.net.weight_mut(p.net.num_layers() - 1) *= 0.01;
  return p;
}

/// Acting interface for rollouts. Stochastic actors report log mu(a|x).
inline envs::ActionFn as_action_fn(std::shared_ptr<const GaussianPolicy> policy, bool stochastic) {
  if (stochastic)
    return [policy](const Vec& obs, Rng& rng, double* logp) { return policy->sample(obs, rng, logp); };
  return [policy](const Vec& obs, Rng&, double* logp) {
    if (logp) *logp = 0.0;
    return policy->mean_action(obs);
  };
}

}  // namespace formlab::rl
