#pragma once

#include <cmath>

#include "formlab/common/error.hpp"
#include "formlab/common/types.hpp"

namespace formlab::rl {

/// Retrace targets for one rollout of length L.
///   q(t)   = Q(x_t, a_t), t < L
///   v(t)   = E_pi Q(x_t, .), t <= L (v(L) bootstraps the rollout end)
///   c(t)   = lambda * min(1, exp(pi_logp(t) - mu_logp(t)))
///   Q_ret(L-1) = r(L-1) + gamma * v(L)
///   Q_ret(t)   = r(t) + gamma * (v(t+1) + c(t+1) * (Q_ret(t+1) - q(t+1)))
inline Vec retrace_targets(const Vec& q, const Vec& v, const Vec& rewards, const Vec& pi_logp, const Vec& mu_logp,
                           double lambda = 1.0, double gamma = 0.99) {
  const Eigen::Index L = rewards.size();
  require(L > 0, "retrace on an empty rollout");
  require(q.size() == L && v.size() == L + 1 && pi_logp.size() == L && mu_logp.size() == L,
          "retrace: sequence lengths disagree");
  Vec out(L);
  out(L - 1) = rewards(L - 1) + gamma * v(L);
  for (Eigen::Index t = L - 2; t >= 0; --t) {
    const double c = lambda * std::min(1.0, std::exp(pi_logp(t + 1) - mu_logp(t + 1)));
    out(t) = rewards(t) + gamma * (v(t + 1) + c * (out(t + 1) - q(t + 1)));
  }
  return out;
}

}  // namespace formlab::rl
