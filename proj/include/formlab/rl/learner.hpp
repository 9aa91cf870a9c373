#pragma once

#include <atomic>
#include <functional>
#include <thread>

#include "formlab/envs/rollout.hpp"
#include "formlab/rl/critic.hpp"
#include "formlab/rl/mpo.hpp"
#include "formlab/rl/replay.hpp"
#include "formlab/rl/retrace.hpp"

namespace formlab::rl {

struct LearnerConfig {
  PolicyConfig policy;
  CriticConfig critic;
  MpoConfig mpo;
  double critic_lr = 1e-4;
  double gamma = 0.99;
  double retrace_lambda = 1.0;
  int batch_rollouts = 64;
  int mpo_states = 0;      // states per MPO step, 0 = every state in the batch
  int value_samples = 1;   // policy samples for the bootstrap value E_pi Q
  int target_period = 200;
  long steps = 200000;
  int initial_episodes = 16;        // collected before the first update
  double episodes_per_step = 0.25;  // actor throughput in synchronous mode
  int actors = 1;                   // >1 runs actor threads (not bit-reproducible)
  std::size_t replay_capacity = 10000;

  void validate() const {
    mpo.validate();
    require(batch_rollouts > 0 && steps >= 0 && target_period > 0, "learner sizes must be positive");
    require(value_samples >= 1 && actors >= 1 && initial_episodes >= 1, "learner counts must be >= 1");
    require(episodes_per_step > 0, "episodes_per_step must be > 0");
  }
};

/// Per-rollout rewards (length T each), computed when a batch is consumed.
using RewardLabeler = std::function<std::vector<Vec>(const std::vector<RolloutPtr>& batch)>;

struct LearnerStats {
  long step = 0;
  double critic_loss = 0.0;
  double reward_mean = 0.0;
  MpoStats mpo;
};

/// Policy, critic, their target copies and optimizer state.
struct Agent {
  GaussianPolicy policy;
  GaussianPolicy target_policy;
  Critic critic;
  Critic target_critic;
  nn::AdamState policy_opt;
  nn::ConcatAdam critic_opt;
  MpoDuals duals;

  void sync_targets() {
    target_policy = policy;
    target_critic = critic;
  }
};

inline Agent make_agent(int obs_dim, int action_dim, const LearnerConfig& cfg, Rng& rng) {
  Agent a{make_policy(obs_dim, action_dim, cfg.policy, rng),
          {},
          make_critic(obs_dim, action_dim, cfg.critic, rng),
          {},
          nn::AdamState(nn::AdamConfig{.learning_rate = cfg.mpo.policy_lr}),
          nn::ConcatAdam(nn::AdamConfig{.learning_rate = cfg.critic_lr}),
          MpoDuals(cfg.mpo)};
  a.sync_targets();
  return a;
}

/// Retrace critic targets for a batch, using the target networks.
/// Returns one column block per rollout, concatenated (B*T).
inline Vec batch_retrace_targets(const Agent& agent, const std::vector<RolloutPtr>& batch,
                                 const std::vector<Vec>& rewards, const LearnerConfig& cfg, Rng& rng) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index T = batch.front()->length();
  const Eigen::Index D = batch.front()->observations.rows();
  const int A = agent.policy.action_dim;
  Mat obs(D, B * (T + 1)), acts(A, B * T), obs_t(D, B * T);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& r = *batch[static_cast<std::size_t>(b)];
    require(r.length() == T && r.behavior_logp.size() == T, "replay rollouts must share a length and carry logp");
    obs.middleCols(b * (T + 1), T + 1) = r.observations;
    obs_t.middleCols(b * T, T) = r.observations.leftCols(T);
    acts.middleCols(b * T, T) = r.actions;
  }
  const Vec pi_logp = agent.target_policy.log_prob_batch(obs_t, acts);
  const Vec q = agent.target_critic.q(obs_t, acts);

  // v(x) = mean over value_samples draws of Q_target(x, a ~ pi_target).
  const GaussianHead h = agent.target_policy.head(obs);
  const int S = cfg.value_samples;
  const Eigen::Index n = obs.cols();
  Mat va(A, n * S);
  std::vector<int> idx(static_cast<std::size_t>(n * S));
  for (Eigen::Index i = 0; i < n; ++i)
    for (int s = 0; s < S; ++s) {
      idx[static_cast<std::size_t>(i * S + s)] = static_cast<int>(i);
      for (int d = 0; d < A; ++d) va(d, i * S + s) = h.mean(d, i) + h.scale(d, i) * standard_normal(rng);
    }
  const Vec vq = agent.target_critic.q(obs, idx, va);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = vq.segment(i * S, S).mean();

  Vec targets(B * T);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& r = *batch[static_cast<std::size_t>(b)];
    targets.segment(b * T, T) =
        retrace_targets(q.segment(b * T, T), v.segment(b * (T + 1), T + 1), rewards[static_cast<std::size_t>(b)],
                        pi_logp.segment(b * T, T), r.behavior_logp, cfg.retrace_lambda, cfg.gamma);
  }
  return targets;
}

/// One learner update on a labeled batch: critic regression onto Retrace
/// targets, then an MPO policy step. Targets are refreshed every
/// target_period updates.
inline LearnerStats learner_step(Agent& agent, long step, const std::vector<RolloutPtr>& batch,
                                 const std::vector<Vec>& rewards, const LearnerConfig& cfg, Rng& rng) {
  LearnerStats st;
  st.step = step;
  double rsum = 0.0;
  long rcount = 0;
  for (const auto& r : rewards) {
    if (!r.allFinite()) throw NumericalError("non-finite reward label at learner step " + std::to_string(step));
    rsum += r.sum();
    rcount += r.size();
  }
  st.reward_mean = rsum / static_cast<double>(std::max(1L, rcount));

  const Vec targets = batch_retrace_targets(agent, batch, rewards, cfg, rng);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index T = batch.front()->length();
  const Eigen::Index D = batch.front()->observations.rows();
  Mat obs_t(D, B * T), acts(agent.policy.action_dim, B * T);
  for (Eigen::Index b = 0; b < B; ++b) {
    obs_t.middleCols(b * T, T) = batch[static_cast<std::size_t>(b)]->observations.leftCols(T);
    acts.middleCols(b * T, T) = batch[static_cast<std::size_t>(b)]->actions;
  }
  try {
    st.critic_loss = critic_update(agent.critic, obs_t, acts, targets, agent.critic_opt);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("critic update at learner step ") + std::to_string(step) + ": " + e.what());
  }

  Mat states;
  if (cfg.mpo_states > 0 && cfg.mpo_states < obs_t.cols()) {
    states.resize(D, cfg.mpo_states);
    std::uniform_int_distribution<Eigen::Index> pick(0, obs_t.cols() - 1);
    for (int i = 0; i < cfg.mpo_states; ++i) states.col(i) = obs_t.col(pick(rng));
  } else {
    states = obs_t;
  }
  const Critic& tq = agent.target_critic;
  QFunction qfn = [&tq](const Mat& s, const std::vector<int>& index, const Mat& a) { return tq.q(s, index, a); };
  try {
    st.mpo = mpo_update(agent.policy, agent.target_policy, states, qfn, cfg.mpo, agent.duals, agent.policy_opt, rng);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("policy update at learner step ") + std::to_string(step) + ": " + e.what());
  }
  if ((step + 1) % cfg.target_period == 0) agent.sync_targets();
  return st;
}

/// Hooks into the actor-learner loop.
struct LoopHooks {
  RewardLabeler label;
  /// Called with the sampled batch before it is labeled.
  std::function<void(long step, const std::vector<RolloutPtr>& batch, Rng& rng)> before_update;
  /// Called after each policy update with the consumed batch (imitator-model
  /// or discriminator updates go here).
  std::function<void(long step, const std::vector<RolloutPtr>& batch, Rng& rng)> after_update;
  /// Called before the first update and then every eval_interval updates.
  std::function<void(long step, const Agent& agent)> on_eval;
  /// Called once when the initial episodes are in the buffer.
  std::function<void(ReplayBuffer& replay, Rng& rng)> warmup;
  std::function<void(const LearnerStats&)> on_step;
  long eval_interval = 0;
};

/// Actor side: runs imitation-phase episodes with the given policy snapshot.
struct ActorSpec {
  envs::EnvSpec env;
  envs::DistractorSpec distractor;
  std::uint64_t seed = 0;
};

inline RolloutPtr act_episode(const ActorSpec& a, std::shared_ptr<const GaussianPolicy> policy, int actor, long episode) {
  const std::uint64_t s = derive_seed(a.seed, "actor/" + std::to_string(actor) + "/" + std::to_string(episode));
  return std::make_shared<const envs::Trajectory>(
      envs::run_episode(a.env, a.distractor, envs::Phase::imitation, as_action_fn(policy, true), s, true));
}

/// Actor-learner loop. With one actor, acting and learning interleave on the
/// calling thread and the whole run is bit-reproducible from the seeds.
/// With several actors, actor threads push complete rollouts concurrently
/// using policy snapshots taken at episode start.
inline void run_learner(Agent& agent, ReplayBuffer& replay, const ActorSpec& actors, const LearnerConfig& cfg,
                        const LoopHooks& hooks, Rng& rng) {
  cfg.validate();
  require(static_cast<bool>(hooks.label), "run_learner needs a reward labeler");
  long episode = 0;
  auto snapshot = [&] { return std::make_shared<const GaussianPolicy>(agent.policy); };

  for (int i = 0; i < cfg.initial_episodes; ++i) replay.push(act_episode(actors, snapshot(), 0, episode++));
  if (hooks.warmup) hooks.warmup(replay, rng);
  if (hooks.on_eval) hooks.on_eval(0, agent);

  std::atomic<bool> stop{false};
  std::mutex snap_mu;
  std::shared_ptr<const GaussianPolicy> shared_snapshot = snapshot();
  std::vector<std::thread> threads;
  if (cfg.actors > 1) {
    for (int k = 0; k < cfg.actors; ++k) {
      threads.emplace_back([&, k] {
        long ep = 0;
        while (!stop.load()) {
          std::shared_ptr<const GaussianPolicy> p;
          {
            std::lock_guard<std::mutex> lock(snap_mu);
            p = shared_snapshot;
          }
          replay.push(act_episode(actors, p, k + 1, ep++));
        }
      });
    }
  }
  struct Joiner {
    std::atomic<bool>& stop;
    std::vector<std::thread>& threads;
    ~Joiner() {
      stop = true;
      for (auto& t : threads) t.join();
    }
  } joiner{stop, threads};

  double debt = 0.0;
  for (long step = 0; step < cfg.steps; ++step) {
    if (cfg.actors == 1) {
      debt += cfg.episodes_per_step;
      while (debt >= 1.0) {
        replay.push(act_episode(actors, snapshot(), 0, episode++));
        debt -= 1.0;
      }
    }
    const auto batch = replay.sample(static_cast<std::size_t>(cfg.batch_rollouts), rng);
    if (hooks.before_update) hooks.before_update(step, batch, rng);
    const auto rewards = hooks.label(batch);
    const LearnerStats st = learner_step(agent, step, batch, rewards, cfg, rng);
    if (hooks.on_step) hooks.on_step(st);
    if (hooks.after_update) hooks.after_update(step, batch, rng);
    if (cfg.actors > 1) {
      auto p = snapshot();
      std::lock_guard<std::mutex> lock(snap_mu);
      shared_snapshot = std::move(p);
    }
    if (hooks.on_eval && hooks.eval_interval > 0 && ((step + 1) % hooks.eval_interval == 0 || step + 1 == cfg.steps))
      hooks.on_eval(step + 1, agent);
  }
}

struct EvalResult {
  std::vector<envs::Trajectory> episodes;
  Vec returns;
  double mean() const { return returns.mean(); }
  /// Sample standard deviation (0 for a single episode).
  double stddev() const {
    if (returns.size() < 2) return 0.0;
    return std::sqrt((returns.array() - mean()).square().sum() / static_cast<double>(returns.size() - 1));
  }
};

/// Deterministic (mean-action) evaluation episodes with imitation-phase
/// distractor draws.
inline EvalResult evaluate_policy(const envs::EnvSpec& env, const envs::DistractorSpec& distractor,
                                  const envs::ActionFn& policy, int episodes, std::uint64_t seed) {
  EvalResult r;
  r.returns.resize(episodes);
  for (int i = 0; i < episodes; ++i) {
    r.episodes.push_back(envs::run_episode(env, distractor, envs::Phase::imitation, policy,
                                           derive_seed(seed, "eval/" + std::to_string(i))));
    r.returns(i) = r.episodes.back().task_return();
  }
  return r;
}

}  // namespace formlab::rl
