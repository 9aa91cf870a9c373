#pragma once

#include <vector>

#include "formlab/nn/adam.hpp"
#include "formlab/rl/gaussian_policy.hpp"

namespace formlab::rl {

/// Score-function estimate (1/B) sum_b (R_b - baseline) * score_b, where
/// score_b = sum_t grad log pi(a_t | x_t) for episode b and the baseline is
/// the batch-mean return when enabled.
inline Vec score_function_gradient(const std::vector<Vec>& scores, const Vec& returns, bool use_baseline) {
  require(!scores.empty() && static_cast<Eigen::Index>(scores.size()) == returns.size(),
          "score_function_gradient: one return per episode");
  const double b = use_baseline ? returns.mean() : 0.0;
  Vec g = Vec::Zero(scores.front().size());
  for (std::size_t i = 0; i < scores.size(); ++i) g += (returns(static_cast<Eigen::Index>(i)) - b) * scores[i];
  return g / static_cast<double>(scores.size());
}

/// sum_t grad log pi(a_t | x_t) over one trajectory.
inline Vec episode_score(const GaussianPolicy& policy, const envs::Trajectory& tr) {
  Vec grad;
  policy.log_prob_batch(tr.observations.leftCols(tr.length()), tr.actions, nullptr, &grad);
  return grad;
}

/// One ascent step along the baselined score-function estimator.
inline Vec reinforce_update(GaussianPolicy& policy, const std::vector<envs::Trajectory>& episodes, const Vec& returns,
                            nn::AdamState& opt) {
  std::vector<Vec> scores;
  for (const auto& e : episodes) scores.push_back(episode_score(policy, e));
  const Vec g = score_function_gradient(scores, returns, true);
  opt.step(policy.net.mutable_params(), Vec(-g));
  return g;
}

}  // namespace formlab::rl
