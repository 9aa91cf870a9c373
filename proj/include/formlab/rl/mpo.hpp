#pragma once

#include <functional>

#include "formlab/nn/adam.hpp"
#include "formlab/rl/gaussian_policy.hpp"

namespace formlab::rl {

struct MpoConfig {
  int action_samples = 20;
  double eps_temp = 0.1;
  double eps_mean = 0.005;
  double eps_scale = 1e-5;
  double dual_lr = 1e-3;
  double policy_lr = 1e-4;
  double init_temperature = 1.0;
  double min_temperature = 1e-6;

  void validate() const {
    require(action_samples >= 1, "mpo action_samples must be >= 1");
    require(eps_temp > 0 && eps_mean > 0 && eps_scale > 0, "mpo epsilons must be > 0");
  }
};

/// Temperature and Lagrange multipliers with their optimizers.
struct MpoDuals {
  double temperature = 1.0;
  double alpha_mean = 0.0;
  double alpha_scale = 0.0;
  nn::AdamState temperature_opt;
  nn::AdamState mean_opt;
  nn::AdamState scale_opt;
  long temperature_floor_hits = 0;

  explicit MpoDuals(const MpoConfig& cfg = {})
      : temperature(cfg.init_temperature),
        temperature_opt(nn::AdamConfig{.learning_rate = cfg.dual_lr}),
        mean_opt(nn::AdamConfig{.learning_rate = cfg.dual_lr}),
        scale_opt(nn::AdamConfig{.learning_rate = cfg.dual_lr}) {}
};

struct MpoStats {
  double temperature = 0.0;
  double alpha_mean = 0.0;
  double alpha_scale = 0.0;
  double kl_mean = 0.0;   // online vs target, before the step
  double kl_scale = 0.0;
  double mean_q = 0.0;
  double mean_scale = 0.0;
};

/// Q evaluated at column j of `actions` and state column index[j].
using QFunction = std::function<Vec(const Mat& states, const std::vector<int>& index, const Mat& actions)>;

/// E-step weights softmax_j(Q_ij / eta) per state; q is (samples x states).
inline Mat mpo_weights(const Mat& q, double temperature) {
  Mat w(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const Vec z = q.col(i) / temperature;
    const Vec e = (z.array() - z.maxCoeff()).exp();
    w.col(i) = e / e.sum();
  }
  return w;
}

/// Temperature dual g(eta) = eta*eps + eta * mean_i log mean_j exp(Q_ij/eta)
/// and its derivative.
inline std::pair<double, double> temperature_dual(const Mat& q, double eta, double eps) {
  const double k = static_cast<double>(q.rows());
  double lse_sum = 0.0, weighted_sum = 0.0;
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const Vec z = q.col(i) / eta;
    const double m = z.maxCoeff();
    const Vec e = (z.array() - m).exp();
    const double s = e.sum();
    lse_sum += m + std::log(s / k);
    weighted_sum += e.dot(z) / s;
  }
  const double n = static_cast<double>(q.cols());
  const double g = eta * eps + eta * lse_sum / n;
  const double dg = eps + (lse_sum - weighted_sum) / n;
  return {g, dg};
}

/// One MPO improvement step on `policy` at the given states. Actions are
/// sampled from `target`, which also anchors both KL constraints.
inline MpoStats mpo_update(GaussianPolicy& policy, const GaussianPolicy& target, const Mat& states, const QFunction& qfn,
                           const MpoConfig& cfg, MpoDuals& duals, nn::AdamState& policy_opt, Rng& rng) {
  const Eigen::Index n = states.cols();
  const int k = cfg.action_samples;
  const int A = policy.action_dim;
  require(n > 0, "mpo_update on an empty batch");

  const GaussianHead old = target.head(states);
  Mat actions(A, n * k);
  std::vector<int> index(static_cast<std::size_t>(n * k));
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      const Eigen::Index c = i * k + j;
      index[static_cast<std::size_t>(c)] = static_cast<int>(i);
      for (int d = 0; d < A; ++d) actions(d, c) = old.mean(d, i) + old.scale(d, i) * standard_normal(rng);
    }
  const Vec qflat = qfn(states, index, actions);
  require(qflat.size() == n * k, "Q function returned the wrong number of values");
  const Mat q = Eigen::Map<const Mat>(qflat.data(), k, n);

  // E-step: temperature dual descent, then weights.
  const auto [g, dg] = temperature_dual(q, duals.temperature, cfg.eps_temp);
  (void)g;
  duals.temperature = duals.temperature_opt.step_scalar(duals.temperature, dg);
  if (duals.temperature < cfg.min_temperature) {
    duals.temperature = cfg.min_temperature;
    ++duals.temperature_floor_hits;
  }
  const Mat w = mpo_weights(q, duals.temperature);

  // M-step: decoupled weighted maximum likelihood with KL penalties.
  nn::DenseNet::Cache cache;
  const GaussianHead cur = policy.head(states, &cache);
  const double inv_n = 1.0 / static_cast<double>(n);
  Mat d_mean = Mat::Zero(A, n), d_scale = Mat::Zero(A, n);
  double kl_mean = 0.0, kl_scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < A; ++d) {
      const double mu = cur.mean(d, i), s = cur.scale(d, i);
      const double mu0 = old.mean(d, i), s0 = old.scale(d, i);
      double gm = 0.0, gs = 0.0;
      for (int j = 0; j < k; ++j) {
        const double a = actions(d, i * k + j);
        const double wij = w(j, i);
        gm -= wij * (a - mu) / (s0 * s0);
        gs -= wij * ((a - mu0) * (a - mu0) / (s * s * s) - 1.0 / s);
      }
      kl_mean += (mu - mu0) * (mu - mu0) / (2.0 * s0 * s0);
      kl_scale += std::log(s / s0) + s0 * s0 / (2.0 * s * s) - 0.5;
      d_mean(d, i) = inv_n * (gm + duals.alpha_mean * (mu - mu0) / (s0 * s0));
      d_scale(d, i) = inv_n * (gs + duals.alpha_scale * (1.0 / s - s0 * s0 / (s * s * s)));
    }
  }
  kl_mean *= inv_n;
  kl_scale *= inv_n;

  Vec grad;
  policy.net.backward(cache, join_head_grad(cur, d_mean, d_scale), grad);
  policy_opt.step(policy.net.mutable_params(), grad);

  duals.alpha_mean = std::max(0.0, duals.mean_opt.step_scalar(duals.alpha_mean, cfg.eps_mean - kl_mean));
  duals.alpha_scale = std::max(0.0, duals.scale_opt.step_scalar(duals.alpha_scale, cfg.eps_scale - kl_scale));

  MpoStats st;
  st.temperature = duals.temperature;
  st.alpha_mean = duals.alpha_mean;
  st.alpha_scale = duals.alpha_scale;
  st.kl_mean = kl_mean;
  st.kl_scale = kl_scale;
  st.mean_q = q.mean();
  st.mean_scale = cur.scale.mean();
  return st;
}

}  // namespace formlab::rl
