#pragma once

#include <cstring>
#include <functional>

#include "formlab/density/effect_model.hpp"
#include "formlab/envs/dataset.hpp"
#include "formlab/form/reward.hpp"
#include "formlab/rl/learner.hpp"

namespace formlab::form {

struct FormConfig {
  envs::EnvSpec env;
  envs::DistractorSpec distractor;     // imitation draws any pattern of N bits
  density::EffectModelConfig effect;   // shared by demonstrator and imitator
  rl::LearnerConfig learner;
  long imitator_warmup = 500;          // imitator updates before rewards are used
  bool imitator_before_policy = false; // default order: policy, then imitator
  bool zero_reward_control = false;    // label with the imitator on both sides
  int eval_episodes = 10;
  long eval_interval = 5000;
  std::uint64_t seed = 0;
};

struct EvalRow {
  long step = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double demo_logp = 0.0;  // mean per-step log p_D on evaluation episodes
  double imit_logp = 0.0;
};

struct FormResult {
  rl::Agent agent;
  density::EffectModel imitator;
  std::vector<EvalRow> evals;
};

inline std::uint64_t hash_vec(std::uint64_t h, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    const double x = v(i);
    std::memcpy(&bits, &x, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

/// Bitwise fingerprint of an effect model's parameters and statistics.
inline std::uint64_t effect_model_hash(const density::EffectModel& m) {
  std::uint64_t h = hash_vec(0, m.net.encoder.params());
  h = hash_vec(h, m.net.decoder.params());
  if (m.standardizer.count() > 0) {
    h = hash_vec(h, m.standardizer.mean());
    h = hash_vec(h, m.standardizer.variance());
  }
  return h;
}

/// Phase 1: offline maximum likelihood on action-free demonstrations.
inline density::EffectModel train_demo_model(const envs::DemoDataset& demos, density::EffectModelConfig cfg,
                                             std::uint64_t seed,
                                             std::vector<density::EffectTrainLogEntry>* log = nullptr) {
  require(!demos.trajectories.empty(), "demonstrator training needs at least one trajectory");
  cfg.obs_dim = static_cast<int>(demos.trajectories.front().observations.rows());
  Rng rng = make_rng(seed, "demo_model");
  return density::train_demonstrator(demos.observation_ptrs(), cfg, rng, log);
}

template <TransitionDensity Demo, TransitionDensity Imit>
EvalRow evaluate_form(const envs::EnvSpec& env, const envs::DistractorSpec& distractor, const rl::GaussianPolicy& policy,
                      const Demo& demo, const Imit& imit, int episodes, std::uint64_t seed, long step) {
  auto snap = std::make_shared<const rl::GaussianPolicy>(policy);
  const rl::EvalResult ev = rl::evaluate_policy(env, distractor, rl::as_action_fn(snap, false), episodes, seed);
  EvalRow row;
  row.step = step;
  row.return_mean = ev.mean();
  row.return_std = ev.stddev();
  double d = 0.0, i = 0.0;
  long n = 0;
  for (const auto& e : ev.episodes) {
    const TransitionScores s = score_transitions(e.observations, demo, imit);
    d += s.demo.sum();
    i += s.imit.sum();
    n += s.demo.size();
  }
  row.demo_logp = d / static_cast<double>(n);
  row.imit_logp = i / static_cast<double>(n);
  return row;
}

/// Phase 2: actor-learner loop with FORM reward labels and an online
/// imitator effect model. The demonstrator model is read-only and its
/// fingerprint is checked after the run.
inline FormResult form_train(const FormConfig& cfg, const density::EffectModel& demo,
                             const std::function<void(const EvalRow&)>& on_eval = {},
                             const std::function<void(const rl::LearnerStats&)>& on_step = {}) {
  const int obs_dim = cfg.env.obs_dim + cfg.distractor.n;
  require(demo.obs_dim() == obs_dim, "demonstrator model dimension does not match the augmented observation");
  require(cfg.imitator_warmup >= 0, "imitator_warmup must be >= 0");
  const std::uint64_t demo_hash = effect_model_hash(demo);

  density::EffectModelConfig ecfg = demo.config;
  ecfg.obs_dim = obs_dim;
  Rng init_rng = make_rng(cfg.seed, "init");
  FormResult res{rl::make_agent(obs_dim, cfg.env.action_dim, cfg.learner, init_rng),
                 density::make_effect_model(ecfg, init_rng),
                 {}};
  density::EffectTrainer imit_trainer(res.imitator);
  Rng imit_rng = make_rng(cfg.seed, "imitator");

  auto update_imitator = [&](const std::vector<const Mat*>& trajs) {
    const auto windows = density::sample_windows(trajs, ecfg, ecfg.batch_size, imit_rng);
    try {
      imit_trainer.step(windows, imit_rng);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("imitator model update ") + std::to_string(imit_trainer.steps()) + ": " +
                           e.what());
    }
  };
  auto batch_ptrs = [](const std::vector<rl::RolloutPtr>& batch) {
    std::vector<const Mat*> out;
    out.reserve(batch.size());
    for (const auto& r : batch) out.push_back(&r->observations);
    return out;
  };

  rl::LoopHooks hooks;
  hooks.label = [&](const std::vector<rl::RolloutPtr>& batch) {
    if (cfg.zero_reward_control) return label_rewards(batch, res.imitator, res.imitator);
    return label_rewards(batch, demo, res.imitator);
  };
  hooks.warmup = [&](rl::ReplayBuffer& replay, Rng&) {
    const auto all = replay.snapshot();
    std::vector<const Mat*> trajs;
    for (const auto& r : all) trajs.push_back(&r->observations);
    for (long i = 0; i < cfg.imitator_warmup; ++i) update_imitator(trajs);
  };
  auto imitator_hook = [&](long, const std::vector<rl::RolloutPtr>& batch, Rng&) { update_imitator(batch_ptrs(batch)); };
  if (cfg.imitator_before_policy)
    hooks.before_update = imitator_hook;
  else
    hooks.after_update = imitator_hook;
  const std::uint64_t eval_seed = derive_seed(cfg.seed, "eval");
  hooks.on_eval = [&](long step, const rl::Agent& agent) {
    const EvalRow row = cfg.zero_reward_control
                            ? evaluate_form(cfg.env, cfg.distractor, agent.policy, res.imitator, res.imitator,
                                            cfg.eval_episodes, eval_seed, step)
                            : evaluate_form(cfg.env, cfg.distractor, agent.policy, demo, res.imitator,
                                            cfg.eval_episodes, eval_seed, step);
    res.evals.push_back(row);
    if (on_eval) on_eval(row);
  };
  hooks.on_step = on_step;
  hooks.eval_interval = cfg.eval_interval;

  rl::ReplayBuffer replay(cfg.learner.replay_capacity);
  rl::ActorSpec actors{cfg.env, cfg.distractor, derive_seed(cfg.seed, "actors")};
  Rng learner_rng = make_rng(cfg.seed, "learner");
  rl::run_learner(res.agent, replay, actors, cfg.learner, hooks, learner_rng);

  if (effect_model_hash(demo) != demo_hash)
    throw StructuralError("demonstrator model changed during imitation");
  return res;
}

}  // namespace formlab::form
