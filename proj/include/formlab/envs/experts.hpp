#pragma once

#include "formlab/envs/lqr.hpp"
#include "formlab/envs/rollout.hpp"

namespace formlab::envs {

/// LQR feedback for lingauss, a = -K x.
inline Mat lingauss_gain(const EnvSpec& s) {
  require(s.kind == EnvKind::lingauss, "lingauss_gain on a non-lingauss spec");
  return solve_lqr(s.a_dyn, s.b_dyn, s.q_cost, s.r_cost).k;
}

/// Linearized point-mass dynamics in error coordinates e = [p - g, v].
inline LqrSolution point_mass_lqr(const EnvSpec& s) {
  const double c = 1.0 - s.dt * s.damping;
  const Mat i2 = Mat::Identity(2, 2);
  Mat a = Mat::Zero(4, 4), b = Mat::Zero(4, 2);
  a.block(0, 0, 2, 2) = i2;
  a.block(0, 2, 2, 2) = s.dt * c * i2;
  a.block(2, 2, 2, 2) = c * i2;
  b.block(0, 0, 2, 2) = s.dt * s.dt * s.gain * i2;
  b.block(2, 0, 2, 2) = s.dt * s.gain * i2;
  Mat q = Mat::Identity(4, 4);
  q(2, 2) = q(3, 3) = 0.1;
  return solve_lqr(a, b, q, 0.1 * i2);
}

/// Joint targets reaching `target`, choosing the elbow branch nearest to the
/// current configuration.
inline Vec reacher_inverse_kinematics(const EnvSpec& s, const Vec& target, double th1, double th2) {
  const double r2 = target.squaredNorm();
  const double c2 = std::clamp((r2 - s.link1 * s.link1 - s.link2 * s.link2) / (2 * s.link1 * s.link2), -1.0, 1.0);
  Vec best(2);
  double best_dist = 1e300;
  for (double sign : {1.0, -1.0}) {
    const double q2 = sign * std::acos(c2);
    const double q1 = std::atan2(target(1), target(0)) - std::atan2(s.link2 * std::sin(q2), s.link1 + s.link2 * std::cos(q2));
    const double d = std::abs(wrap_angle(q1 - th1)) + std::abs(wrap_angle(q2 - th2));
    if (d < best_dist) {
      best_dist = d;
      best << wrap_angle(q1), wrap_angle(q2);
    }
  }
  return best;
}

/// Hand-designed experts acting on the environment part of the observation
/// (distractor dims, if any, are ignored).
inline ActionFn make_expert(const EnvSpec& s) {
  switch (s.kind) {
    case EnvKind::lingauss: {
      const Mat k = lingauss_gain(s);
      const int d = s.obs_dim;
      return [k, d](const Vec& obs, Rng&, double* logp) {
        if (logp) *logp = 0.0;
        return Vec((-k * obs.head(d)).cwiseMax(-1.0).cwiseMin(1.0));
      };
    }
    case EnvKind::point_mass: {
      const Mat k = point_mass_lqr(s).k;
      return [k](const Vec& obs, Rng&, double* logp) {
        if (logp) *logp = 0.0;
        Vec e(4);
        e << obs(0) - obs(4), obs(1) - obs(5), obs(2), obs(3);
        return Vec((-k * e).cwiseMax(-1.0).cwiseMin(1.0));
      };
    }
    case EnvKind::reacher2: {
      const EnvSpec spec = s;
      return [spec](const Vec& obs, Rng&, double* logp) {
        if (logp) *logp = 0.0;
        const double th1 = obs(0), th2 = obs(1);
        const Vec target = reacher_fingertip(spec, th1, th2) + obs.segment(2, 2);
        const Vec goal = reacher_inverse_kinematics(spec, target, th1, th2);
        Vec a(2);
        for (int j = 0; j < 2; ++j) a(j) = 3.0 * wrap_angle(goal(j) - obs(j)) - 0.6 * obs(4 + j);
        return Vec(a.cwiseMax(-1.0).cwiseMin(1.0));
      };
    }
  }
  throw StructuralError("no expert for environment");
}

}  // namespace formlab::envs
