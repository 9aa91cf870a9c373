#pragma once

#include <concepts>
#include <vector>

#include "formlab/rl/replay.hpp"

namespace formlab::form {

/// Anything that scores raw next-step transitions column by column.
template <class M>
concept TransitionDensity = requires(const M& m, const Mat& a, const Mat& b) {
  { m.log_prob(a, b) } -> std::convertible_to<Vec>;
};

/// Per-step log-likelihoods of both models along one observation sequence
/// (dim x T+1). Entry t scores x_{t+1} given x_t.
struct TransitionScores {
  Vec demo;
  Vec imit;
};

template <TransitionDensity Demo, TransitionDensity Imit>
TransitionScores score_transitions(const Mat& observations, const Demo& demo, const Imit& imit) {
  require(observations.cols() >= 2, "need at least one transition to score");
  const Eigen::Index T = observations.cols() - 1;
  const Mat prev = observations.leftCols(T), next = observations.rightCols(T);
  return {demo.log_prob(prev, next), imit.log_prob(prev, next)};
}

/// r_t = log p_D(x_{t+1} | x_t) - log p_I(x_{t+1} | x_t), attached to the
/// action taken at t. The x_0 term is dropped, so an episode of T actions
/// carries T rewards.
template <TransitionDensity Demo, TransitionDensity Imit>
Vec form_rewards(const Mat& observations, const Demo& demo, const Imit& imit) {
  const TransitionScores s = score_transitions(observations, demo, imit);
  return s.demo - s.imit;
}

template <TransitionDensity Demo, TransitionDensity Imit>
double rho_form(const Mat& observations, const Demo& demo, const Imit& imit) {
  return form_rewards(observations, demo, imit).sum();
}

/// Labels a replay batch at consumption time. Pure: no RNG, no state.
template <TransitionDensity Demo, TransitionDensity Imit>
std::vector<Vec> label_rewards(const std::vector<rl::RolloutPtr>& batch, const Demo& demo, const Imit& imit) {
  std::vector<Vec> out;
  out.reserve(batch.size());
  for (const auto& r : batch) out.push_back(form_rewards(r->observations, demo, imit));
  return out;
}

}  // namespace formlab::form
