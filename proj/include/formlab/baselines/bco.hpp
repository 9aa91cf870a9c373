#pragma once

#include <functional>

#include "formlab/baselines/bc.hpp"
#include "formlab/rl/learner.hpp"

namespace formlab::baselines {

/// p(a_t | x_t, x_{t+1}): a Gaussian head over the concatenated pair.
struct InverseModel {
  rl::GaussianPolicy net;

  static Mat pair(const Mat& obs, const Mat& next) {
    Mat x(obs.rows() * 2, obs.cols());
    x.topRows(obs.rows()) = obs;
    x.bottomRows(obs.rows()) = next;
    return x;
  }
  Mat mean_actions(const Mat& obs, const Mat& next) const { return net.head(pair(obs, next)).mean; }
};

inline InverseModel make_inverse_model(int obs_dim, int action_dim, int hidden, Rng& rng) {
  return {rl::make_policy(2 * obs_dim, action_dim, {.hidden = hidden, .elu_layers = 2, .layer_norm = false}, rng)};
}

/// Maps expert (x_t, x_{t+1}) columns to inferred actions.
using ActionLabeler = std::function<Mat(const Mat& obs, const Mat& next)>;

struct BcoConfig {
  int hidden = 256;
  double learning_rate = 1e-4;
  int batch_size = 256;
  int iterations = 10;
  int episodes_per_iteration = 20;  // imitator rollouts collected per iteration
  long inverse_steps = 2000;        // inverse-model updates per iteration
  long bc_steps = 2000;             // cloning updates per iteration
  int eval_episodes = 10;
};

struct BcoEval {
  int iteration = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
};

/// Label expert transitions, then clone. Expert actions are never read.
inline double bco_clone_step(rl::GaussianPolicy& policy, const TransitionSet& expert, const ActionLabeler& label,
                             long steps, int batch, nn::AdamState& opt, Rng& rng) {
  const Mat labeled = label(expert.obs, expert.next);
  return bc_fit(policy, expert.obs, labeled, steps, batch, opt, rng);
}

/// Behavioral cloning from observation: alternate between collecting
/// imitator transitions, fitting the inverse model on them, and cloning the
/// inverse-model-labeled demonstrations.
inline rl::GaussianPolicy bco_train(const envs::EnvSpec& env, const envs::DistractorSpec& distractor,
                                    const envs::DemoDataset& demos, const BcoConfig& cfg, std::uint64_t seed,
                                    const std::function<void(const BcoEval&)>& on_eval = {}) {
  TransitionSet expert = flatten_transitions(demos.trajectories);
  expert.actions.setZero();  // action-free
  const int D = static_cast<int>(expert.obs.rows()), A = env.action_dim;
  Rng init = make_rng(seed, "init");
  rl::GaussianPolicy policy = rl::make_policy(D, A, {.hidden = cfg.hidden, .elu_layers = 2, .layer_norm = false}, init);
  InverseModel inverse = make_inverse_model(D, A, cfg.hidden, init);
  nn::AdamState policy_opt(nn::AdamConfig{.learning_rate = cfg.learning_rate});
  nn::AdamState inverse_opt(nn::AdamConfig{.learning_rate = cfg.learning_rate});
  Rng rng = make_rng(seed, "bco");
  const std::uint64_t actor_seed = derive_seed(seed, "actors"), eval_seed = derive_seed(seed, "eval");

  std::vector<envs::Trajectory> own;
  long episode = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    auto snap = std::make_shared<const rl::GaussianPolicy>(policy);
    for (int e = 0; e < cfg.episodes_per_iteration; ++e, ++episode)
      own.push_back(envs::run_episode(env, distractor, envs::Phase::imitation, rl::as_action_fn(snap, true),
                                      derive_seed(actor_seed, "episode/" + std::to_string(episode))));
    const TransitionSet mine = flatten_transitions(own);
    bc_fit(inverse.net, InverseModel::pair(mine.obs, mine.next), mine.actions, cfg.inverse_steps, cfg.batch_size,
           inverse_opt, rng);
    bco_clone_step(policy, expert, [&](const Mat& o, const Mat& n) { return inverse.mean_actions(o, n); },
                   cfg.bc_steps, cfg.batch_size, policy_opt, rng);
    if (on_eval) {
      auto p = std::make_shared<const rl::GaussianPolicy>(policy);
      const rl::EvalResult ev =
          rl::evaluate_policy(env, distractor, rl::as_action_fn(p, false), cfg.eval_episodes, eval_seed);
      on_eval({it + 1, ev.mean(), ev.stddev()});
    }
  }
  return policy;
}

}  // namespace formlab::baselines
