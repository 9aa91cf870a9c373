#pragma once

#include <cmath>
#include <numbers>

#include "formlab/envs/rollout.hpp"
#include "formlab/form/reward.hpp"
#include "formlab/verify/gaussian_kl.hpp"

namespace formlab::verify {

/// Closed-form lingauss effect density under a linear-Gaussian policy
/// a = clip(-K x) + s * xi (the noise term must never clip):
/// x' ~ N(A x + B clip(-K x), sigma^2 I + s^2 B B^T). B B^T must be diagonal.
struct LinearGaussianEffect {
  Mat a_dyn, b_dyn, gain;
  double noise_std = 0.01;
  double policy_std = 0.0;

  Vec mean(const Vec& x) const { return a_dyn * x + b_dyn * (-gain * x).cwiseMax(-1.0).cwiseMin(1.0); }

  Vec variance() const {
    const Mat bbt = b_dyn * b_dyn.transpose();
    require((bbt - Mat(bbt.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0,
            "closed-form effect needs a diagonal B B^T");
    return Vec::Constant(a_dyn.rows(), noise_std * noise_std) + policy_std * policy_std * bbt.diagonal();
  }

  Vec log_prob(const Mat& prev, const Mat& next) const {
    const Vec var = variance();
    const double log_norm = -0.5 * (var.array().log().sum() + static_cast<double>(var.size()) * std::log(2.0 * std::numbers::pi));
    Vec out(prev.cols());
    for (Eigen::Index j = 0; j < prev.cols(); ++j) {
      const Vec d = next.col(j) - mean(prev.col(j));
      out(j) = log_norm - 0.5 * (d.array().square() / var.array()).sum();
    }
    return out;
  }
};

inline LinearGaussianEffect linear_gaussian_effect(const envs::EnvSpec& spec, const Mat& gain, double policy_std) {
  require(spec.kind == envs::EnvKind::lingauss, "closed-form effect densities exist only for lingauss");
  return {spec.a_dyn, spec.b_dyn, gain, spec.noise_std, policy_std};
}

struct KlConsistency {
  int episodes = 0;
  double mean_rho = 0.0;
  double mean_kl_sum = 0.0;     // mean over episodes of sum_t KL(p_I || p_D)(x_t)
  double mean_gap = 0.0;        // mean of rho_e + sum_t KL_e
  double gap_stderr = 0.0;
  long clipped_actions = 0;
};

/// Monte Carlo check that E[rho_FORM] = -sum_t E[KL(p_I(.|x_t) || p_D(.|x_t))]
/// on imitator episodes, with exact densities in place of both models.
inline KlConsistency lingauss_kl_consistency(const envs::EnvSpec& spec, const Mat& demo_gain, const Mat& imit_gain,
                                             double imit_std, int episodes, std::uint64_t seed) {
  const LinearGaussianEffect demo = linear_gaussian_effect(spec, demo_gain, 0.0);
  const LinearGaussianEffect imit = linear_gaussian_effect(spec, imit_gain, imit_std);
  const envs::DistractorSpec none = envs::make_pool(0, 1, 0);
  const envs::ActionFn policy = [&](const Vec& x, Rng& rng, double* logp) {
    if (logp) *logp = 0.0;
    Vec a = (-imit_gain * x).cwiseMax(-1.0).cwiseMin(1.0);
    for (Eigen::Index d = 0; d < a.size(); ++d) a(d) += imit_std * standard_normal(rng);
    return a;
  };
  KlConsistency r;
  r.episodes = episodes;
  Vec gaps(episodes);
  const Vec var_i = imit.variance(), var_d = demo.variance();
  for (int e = 0; e < episodes; ++e) {
    const envs::Trajectory tr =
        envs::run_episode(spec, none, envs::Phase::imitation, policy, derive_seed(seed, "episode/" + std::to_string(e)));
    r.clipped_actions += tr.clipped_actions;
    const double rho = form::rho_form(tr.observations, demo, imit);
    double kl = 0.0;
    for (int t = 0; t < tr.length(); ++t) {
      const Vec x = tr.observations.col(t);
      kl += gaussian_kl(imit.mean(x), var_i, demo.mean(x), var_d);
    }
    r.mean_rho += rho;
    r.mean_kl_sum += kl;
    gaps(e) = rho + kl;
  }
  r.mean_rho /= episodes;
  r.mean_kl_sum /= episodes;
  r.mean_gap = gaps.mean();
  r.gap_stderr = std::sqrt((gaps.array() - r.mean_gap).square().sum() / (episodes - 1) / episodes);
  return r;
}

/// Mean per-step KL between the next-state distribution of a deterministic
/// policy and that of the LQR expert, at the states the policy visits:
/// both are N(A x + B clip(a), sigma^2 I), so KL = |B (a - a*)|^2 / (2 sigma^2).
inline double lingauss_closed_loop_kl(const envs::EnvSpec& spec, const Mat& expert_gain, const envs::ActionFn& policy,
                                      int episodes, std::uint64_t seed) {
  const envs::DistractorSpec none = envs::make_pool(0, 1, 0);
  const double var = spec.noise_std * spec.noise_std;
  double total = 0.0;
  long n = 0;
  for (int e = 0; e < episodes; ++e) {
    const envs::Trajectory tr =
        envs::run_episode(spec, none, envs::Phase::imitation, policy, derive_seed(seed, "kl/" + std::to_string(e)));
    for (int t = 0; t < tr.length(); ++t) {
      const Vec x = tr.observations.col(t).head(spec.obs_dim);
      const Vec a = tr.actions.col(t).cwiseMax(-1.0).cwiseMin(1.0);
      const Vec a_star = (-expert_gain * x).cwiseMax(-1.0).cwiseMin(1.0);
      total += (spec.b_dyn * (a - a_star)).squaredNorm() / (2.0 * var);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace formlab::verify
