#pragma once

#include <functional>

#include "formlab/envs/dataset.hpp"
#include "formlab/nn/adam.hpp"
#include "formlab/rl/gaussian_policy.hpp"

namespace formlab::baselines {

/// The policy uses the effect-model trunk: tanh, then two ELU layers, no
/// layer norm.
struct BcConfig {
  int hidden = 256;
  double learning_rate = 1e-4;
  int batch_size = 256;  // transitions per step
  long steps = 20000;
};

/// One Adam step on the mean negative log-likelihood of `actions`.
/// Returns the loss before the step.
inline double bc_update(rl::GaussianPolicy& policy, const Mat& obs, const Mat& actions, nn::AdamState& opt) {
  const Vec w = Vec::Constant(obs.cols(), 1.0 / static_cast<double>(obs.cols()));
  Vec grad;
  const Vec lp = policy.log_prob_batch(obs, actions, &w, &grad);
  const double loss = -lp.mean();
  if (!std::isfinite(loss)) throw NumericalError("behavioral cloning loss is not finite");
  opt.step(policy.net.mutable_params(), Vec(-grad));
  return loss;
}

/// Flattened (observation, action) pairs.
struct TransitionSet {
  Mat obs;      // dim x n
  Mat next;     // dim x n
  Mat actions;  // A x n
  Eigen::Index size() const { return obs.cols(); }
};

inline TransitionSet flatten_transitions(const std::vector<envs::Trajectory>& trajs) {
  require(!trajs.empty(), "no trajectories to flatten");
  Eigen::Index n = 0;
  for (const auto& t : trajs) n += t.length();
  const Eigen::Index D = trajs.front().observations.rows(), A = trajs.front().actions.rows();
  TransitionSet s{Mat(D, n), Mat(D, n), Mat(A, n)};
  Eigen::Index c = 0;
  for (const auto& t : trajs) {
    const int T = t.length();
    s.obs.middleCols(c, T) = t.observations.leftCols(T);
    s.next.middleCols(c, T) = t.observations.rightCols(T);
    s.actions.middleCols(c, T) = t.actions;
    c += T;
  }
  return s;
}

/// `steps` minibatch updates on uniformly drawn (obs, action) columns.
inline double bc_fit(rl::GaussianPolicy& policy, const Mat& obs, const Mat& actions, long steps, int batch,
                     nn::AdamState& opt, Rng& rng) {
  require(obs.cols() == actions.cols() && obs.cols() > 0, "bc_fit needs matching non-empty data");
  std::uniform_int_distribution<Eigen::Index> pick(0, obs.cols() - 1);
  Mat bo(obs.rows(), batch), ba(actions.rows(), batch);
  double loss = 0.0;
  for (long s = 0; s < steps; ++s) {
    for (int j = 0; j < batch; ++j) {
      const Eigen::Index i = pick(rng);
      bo.col(j) = obs.col(i);
      ba.col(j) = actions.col(i);
    }
    loss = bc_update(policy, bo, ba, opt);
  }
  return loss;
}

/// Behavioral cloning on the demonstrations' stored actions. `on_eval` sees
/// the policy before training, every `eval_interval` steps and at the end.
inline rl::GaussianPolicy bc_train(const envs::DemoDataset& demos, const BcConfig& cfg, std::uint64_t seed,
                                   const std::function<void(long, const rl::GaussianPolicy&)>& on_eval = {},
                                   long eval_interval = 0) {
  const TransitionSet data = flatten_transitions(demos.trajectories);
  Rng rng = make_rng(seed, "init");
  rl::GaussianPolicy policy = rl::make_policy(static_cast<int>(data.obs.rows()), static_cast<int>(data.actions.rows()),
                                              {.hidden = cfg.hidden, .elu_layers = 2, .layer_norm = false}, rng);
  nn::AdamState opt(nn::AdamConfig{.learning_rate = cfg.learning_rate});
  Rng batch_rng = make_rng(seed, "bc");
  if (!on_eval || eval_interval <= 0) {
    bc_fit(policy, data.obs, data.actions, cfg.steps, cfg.batch_size, opt, batch_rng);
    if (on_eval) on_eval(cfg.steps, policy);
    return policy;
  }
  on_eval(0, policy);
  for (long done = 0; done < cfg.steps;) {
    const long chunk = std::min(eval_interval, cfg.steps - done);
    bc_fit(policy, data.obs, data.actions, chunk, cfg.batch_size, opt, batch_rng);
    done += chunk;
    on_eval(done, policy);
  }
  return policy;
}

}  // namespace formlab::baselines
