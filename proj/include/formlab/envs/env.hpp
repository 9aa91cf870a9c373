#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "formlab/common/error.hpp"
#include "formlab/common/rng.hpp"
#include "formlab/common/types.hpp"

namespace formlab::envs {

enum class EnvKind { lingauss, point_mass, reacher2 };

inline std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::lingauss: return "lingauss";
    case EnvKind::point_mass: return "point_mass";
    case EnvKind::reacher2: return "reacher2";
  }
  return "lingauss";
}

inline EnvKind env_kind_from_string(const std::string& s) {
  if (s == "lingauss") return EnvKind::lingauss;
  if (s == "point_mass") return EnvKind::point_mass;
  if (s == "reacher2") return EnvKind::reacher2;
  throw StructuralError("unknown environment '" + s + "'");
}

/// Static description of an environment. Episodes always last exactly
/// `episode_length` steps; actions live in [-1, 1]^action_dim.
///
/// lingauss:   x' = a_dyn x + b_dyn a + noise, reward -(x'Qx + a'Ra).
/// point_mass: obs [p(2), v(2), goal(2)], v' = (1 - dt*damping) v + dt*gain*a,
///             p' = p + dt v', reward exp(-|p-g|^2/width) - vel_cost |v|^2.
/// reacher2:   obs [theta(2), to_target(2), theta_dot(2)], per-joint
///             double-integrator with damping, reward exp(-|d|^2/width).
struct EnvSpec {
  EnvKind kind = EnvKind::lingauss;
  int obs_dim = 4;
  int action_dim = 2;
  int episode_length = 100;
  double noise_std = 0.01;

  // lingauss
  Mat a_dyn;
  Mat b_dyn;
  Mat q_cost;
  Mat r_cost;
  double init_bound = 1.0;

  // point_mass / reacher2
  double dt = 0.1;
  double damping = 0.5;
  double gain = 1.0;
  double reward_width = 0.05;
  double velocity_cost = 0.01;
  double velocity_bound = 0.2;  // reset box for velocities
  double link1 = 0.5;
  double link2 = 0.4;

  std::string name() const { return to_string(kind); }

  void validate() const {
    require(obs_dim > 0 && action_dim > 0, "env dims must be positive");
    require(episode_length > 0, "episode_length must be positive");
    require(noise_std >= 0, "noise_std must be >= 0");
    if (kind == EnvKind::lingauss) {
      require(a_dyn.rows() == obs_dim && a_dyn.cols() == obs_dim, "lingauss a_dyn must be obs_dim x obs_dim");
      require(b_dyn.rows() == obs_dim && b_dyn.cols() == action_dim, "lingauss b_dyn must be obs_dim x action_dim");
      require(q_cost.rows() == obs_dim && q_cost.cols() == obs_dim, "lingauss q_cost shape");
      require(r_cost.rows() == action_dim && r_cost.cols() == action_dim, "lingauss r_cost shape");
    } else if (kind == EnvKind::point_mass) {
      require(obs_dim == 6 && action_dim == 2, "point_mass has obs_dim 6 and action_dim 2");
    } else {
      require(obs_dim == 6 && action_dim == 2, "reacher2 has obs_dim 6 and action_dim 2");
    }
  }
};

inline EnvSpec lingauss_spec() {
  EnvSpec s;
  s.kind = EnvKind::lingauss;
  s.obs_dim = 4;
  s.action_dim = 2;
  // Two lightly damped oscillators, actuated on their velocity coordinates.
  Mat blk(2, 2);
  blk << 1.0, 0.1, -0.1, 0.98;
  s.a_dyn = Mat::Zero(4, 4);
  s.a_dyn.block(0, 0, 2, 2) = blk;
  s.a_dyn.block(2, 2, 2, 2) = blk;
  s.b_dyn = Mat::Zero(4, 2);
  s.b_dyn(1, 0) = 0.1;
  s.b_dyn(3, 1) = 0.1;
  s.q_cost = Mat::Identity(4, 4);
  s.r_cost = 0.1 * Mat::Identity(2, 2);
  return s;
}

inline EnvSpec point_mass_spec() {
  EnvSpec s;
  s.kind = EnvKind::point_mass;
  s.obs_dim = 6;
  s.action_dim = 2;
  s.dt = 0.1;
  s.damping = 0.5;
  s.gain = 1.0;
  s.reward_width = 0.05;
  s.velocity_cost = 0.01;
  s.velocity_bound = 0.2;
  return s;
}

inline EnvSpec reacher2_spec() {
  EnvSpec s;
  s.kind = EnvKind::reacher2;
  s.obs_dim = 6;
  s.action_dim = 2;
  s.dt = 0.05;
  s.damping = 1.0;
  s.gain = 10.0;
  s.reward_width = 0.02;
  s.velocity_cost = 0.0;
  s.velocity_bound = 0.0;
  return s;
}

inline EnvSpec make_spec(EnvKind kind) {
  switch (kind) {
    case EnvKind::lingauss: return lingauss_spec();
    case EnvKind::point_mass: return point_mass_spec();
    case EnvKind::reacher2: return reacher2_spec();
  }
  return lingauss_spec();
}

inline EnvSpec make_spec(const std::string& name) { return make_spec(env_kind_from_string(name)); }

inline double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

/// Mutable episode state. Holds its own noise generator so that stepping is
/// reproducible given the reset seed and the action sequence.
struct EnvState {
  Vec state;     // lingauss: x; point_mass: [p, v, g]; reacher2: [theta, theta_dot, target]
  int t = 0;
  long clipped_actions = 0;
  Rng rng;
};

struct StepResult {
  Vec observation;
  double reward = 0.0;
};

inline Vec reacher_fingertip(const EnvSpec& s, double th1, double th2) {
  Vec p(2);
  p << s.link1 * std::cos(th1) + s.link2 * std::cos(th1 + th2), s.link1 * std::sin(th1) + s.link2 * std::sin(th1 + th2);
  return p;
}

inline Vec observe(const EnvSpec& s, const EnvState& st) {
  if (s.kind != EnvKind::reacher2) return st.state;
  const Vec tip = reacher_fingertip(s, st.state(0), st.state(1));
  Vec o(6);
  o << st.state(0), st.state(1), st.state(4) - tip(0), st.state(5) - tip(1), st.state(2), st.state(3);
  return o;
}

/// Initial states are uniform over a fixed box:
///   lingauss   x in [-init_bound, init_bound]^D
///   point_mass p, g in [-1, 1]^2, v in [-velocity_bound, velocity_bound]^2
///   reacher2   theta in [-pi, pi)^2, zero velocity, target = fingertip of
///              independently drawn joint angles (always reachable)
inline EnvState reset(const EnvSpec& s, std::uint64_t seed) {
  s.validate();
  EnvState st;
  st.rng = Rng(seed);
  switch (s.kind) {
    case EnvKind::lingauss:
      st.state.resize(s.obs_dim);
      for (int i = 0; i < s.obs_dim; ++i) st.state(i) = uniform(st.rng, -s.init_bound, s.init_bound);
      break;
    case EnvKind::point_mass:
      st.state.resize(6);
      for (int i = 0; i < 2; ++i) st.state(i) = uniform(st.rng, -1, 1);
      for (int i = 2; i < 4; ++i) st.state(i) = uniform(st.rng, -s.velocity_bound, s.velocity_bound);
      for (int i = 4; i < 6; ++i) st.state(i) = uniform(st.rng, -1, 1);
      break;
    case EnvKind::reacher2: {
      st.state = Vec::Zero(6);
      st.state(0) = uniform(st.rng, -std::numbers::pi, std::numbers::pi);
      st.state(1) = uniform(st.rng, -std::numbers::pi, std::numbers::pi);
      const double a = uniform(st.rng, -std::numbers::pi, std::numbers::pi);
      const double b = uniform(st.rng, -std::numbers::pi, std::numbers::pi);
      st.state.tail(2) = reacher_fingertip(s, a, b);
      break;
    }
  }
  return st;
}

/// Task reward of taking `a` in the current state. Used for expert
/// training and evaluation only; imitators never see it.
inline double task_reward(const EnvSpec& s, const EnvState& st, const Vec& a) {
  switch (s.kind) {
    case EnvKind::lingauss:
      return -(st.state.dot(s.q_cost * st.state) + a.dot(s.r_cost * a));
    case EnvKind::point_mass: {
      const double d2 = (st.state.head(2) - st.state.tail(2)).squaredNorm();
      return std::exp(-d2 / s.reward_width) - s.velocity_cost * st.state.segment(2, 2).squaredNorm();
    }
    case EnvKind::reacher2: {
      const Vec tip = reacher_fingertip(s, st.state(0), st.state(1));
      return std::exp(-(st.state.tail(2) - tip).squaredNorm() / s.reward_width);
    }
  }
  return 0.0;
}

/// Clips to the action box, counting clipped calls. Non-finite actions are
/// a caller bug, not something to clamp.
inline Vec clip_action(const EnvSpec& s, EnvState& st, const Vec& a) {
  require(a.size() == s.action_dim, "action has " + std::to_string(a.size()) + " entries, expected " +
                                        std::to_string(s.action_dim));
  if (!a.allFinite()) throw StructuralError("non-finite action at step " + std::to_string(st.t));
  Vec c = a.cwiseMax(-1.0).cwiseMin(1.0);
  if (c != a) ++st.clipped_actions;
  return c;
}

inline StepResult step(const EnvSpec& s, EnvState& st, const Vec& action) {
  require(st.t < s.episode_length, "step called past the end of the episode");
  const Vec a = clip_action(s, st, action);
  StepResult r;
  r.reward = task_reward(s, st, a);
  auto noise = [&](int n) {
    Vec e(n);
    for (int i = 0; i < n; ++i) e(i) = s.noise_std * standard_normal(st.rng);
    return e;
  };
  switch (s.kind) {
    case EnvKind::lingauss:
      st.state = s.a_dyn * st.state + s.b_dyn * a + noise(s.obs_dim);
      break;
    case EnvKind::point_mass: {
      Vec v = (1.0 - s.dt * s.damping) * st.state.segment(2, 2) + s.dt * s.gain * a;
      Vec p = st.state.head(2) + s.dt * v;
      const Vec e = noise(4);
      st.state.head(2) = p + e.head(2);
      st.state.segment(2, 2) = v + e.tail(2);
      break;
    }
    case EnvKind::reacher2: {
      Vec w = (1.0 - s.dt * s.damping) * st.state.segment(2, 2) + s.dt * s.gain * a;
      const Vec e = noise(4);
      st.state(0) = wrap_angle(st.state(0) + s.dt * w(0) + e(0));
      st.state(1) = wrap_angle(st.state(1) + s.dt * w(1) + e(1));
      st.state.segment(2, 2) = w + e.tail(2);
      break;
    }
  }
  ++st.t;
  r.observation = observe(s, st);
  return r;
}

/// Closed-form lingauss transition density log N(x'; A x + B a, noise^2 I),
/// with `a` clipped exactly as step() would.
inline double lingauss_log_density(const EnvSpec& s, const Vec& x, const Vec& a, const Vec& x_next) {
  require(s.kind == EnvKind::lingauss && s.noise_std > 0, "closed-form density needs a noisy lingauss spec");
  const Vec mean = s.a_dyn * x + s.b_dyn * a.cwiseMax(-1.0).cwiseMin(1.0);
  const double var = s.noise_std * s.noise_std;
  return -0.5 * (x_next - mean).squaredNorm() / var - 0.5 * s.obs_dim * std::log(2.0 * std::numbers::pi * var);
}

}  // namespace formlab::envs
