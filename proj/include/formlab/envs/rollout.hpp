#pragma once

#include <functional>
#include <string>

#include "formlab/envs/distractor.hpp"
#include "formlab/envs/env.hpp"

namespace formlab::envs {

/// One fixed-length episode. Observations are augmented with the episode's
/// distractor pattern; task rewards are kept apart from observations.
struct Trajectory {
  std::string env;
  std::uint64_t seed = 0;
  long pattern_id = -1;  // pool index, -1 for a freely drawn pattern
  std::uint64_t pattern_bits = 0;
  Mat observations;      // (D + N) x (T + 1)
  Mat actions;           // A x T
  Vec rewards;           // T
  Vec behavior_logp;     // T; empty for expert data
  long clipped_actions = 0;

  int length() const { return static_cast<int>(actions.cols()); }
  double task_return() const { return rewards.sum(); }
};

/// Maps an (augmented) observation to an action. Stochastic policies draw
/// from `rng` and report log mu(a|x) through `logp` when it is non-null.
using ActionFn = std::function<Vec(const Vec& obs, Rng& rng, double* logp)>;

/// Sub-seeds for the environment noise, the distractor draw and the policy
/// are derived from `seed` with fixed labels.
inline Trajectory run_episode(const EnvSpec& spec, const DistractorSpec& distractor, Phase phase, const ActionFn& policy,
                              std::uint64_t seed, bool record_logp = false) {
  spec.validate();
  Rng pattern_rng = make_rng(seed, "pattern");
  Rng policy_rng = make_rng(seed, "policy");
  const Pattern pat = sample_pattern(distractor, phase, pattern_rng);
  const Vec b = pattern_vector(pat.bits, distractor.n);

  Trajectory tr;
  tr.env = spec.name();
  tr.seed = seed;
  tr.pattern_id = pat.pool_index;
  tr.pattern_bits = pat.bits;
  const int T = spec.episode_length;
  tr.observations.resize(spec.obs_dim + distractor.n, T + 1);
  tr.actions.resize(spec.action_dim, T);
  tr.rewards.resize(T);
  if (record_logp) tr.behavior_logp.resize(T);

  EnvState st = reset(spec, derive_seed(seed, "env"));
  tr.observations.col(0) = augment(observe(spec, st), b);
  for (int t = 0; t < T; ++t) {
    double lp = 0.0;
    const Vec a = policy(tr.observations.col(t), policy_rng, record_logp ? &lp : nullptr);
    const StepResult r = step(spec, st, a);
    if (!r.observation.allFinite()) throw StructuralError("non-finite observation at step " + std::to_string(t));
    tr.actions.col(t) = a;
    tr.rewards(t) = r.reward;
    if (record_logp) tr.behavior_logp(t) = lp;
    tr.observations.col(t + 1) = augment(r.observation, b);
  }
  tr.clipped_actions = st.clipped_actions;
  return tr;
}

}  // namespace formlab::envs
