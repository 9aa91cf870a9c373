#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "formlab/common/error.hpp"
#include "formlab/common/rng.hpp"
#include "formlab/common/types.hpp"

namespace formlab::verify {

/// Enumerable finite-horizon MDP with a tabular softmax policy
/// pi(a|s) = softmax(theta(s, :)).
struct TinyMdp {
  int states = 2;
  int actions = 2;
  int horizon = 2;
  Vec initial;                  // S
  std::vector<Mat> transition;  // per action: S x S, row s is P(. | s, a)

  void validate() const {
    if (states < 1 || states > 4 || actions < 1 || actions > 3 || horizon < 1 || horizon > 4)
      throw StructuralError("TinyMdp limited to 4 states, 3 actions, horizon 4");
    require(initial.size() == states && std::abs(initial.sum() - 1.0) < 1e-12, "TinyMdp initial distribution");
    require(static_cast<int>(transition.size()) == actions, "TinyMdp needs one transition matrix per action");
    for (const Mat& p : transition) {
      require(p.rows() == states && p.cols() == states, "TinyMdp transition shape");
      for (int s = 0; s < states; ++s)
        require(std::abs(p.row(s).sum() - 1.0) < 1e-12 && (p.row(s).array() >= 0).all(),
                "TinyMdp transition rows must be distributions");
    }
  }
};

/// Random stochastic row vector with entries bounded away from zero.
inline Vec random_distribution(int n, Rng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(rng, 0.1, 1.0);
  return v / v.sum();
}

inline TinyMdp random_tiny_mdp(Rng& rng) {
  TinyMdp m;
  m.states = std::uniform_int_distribution<int>(2, 4)(rng);
  m.actions = std::uniform_int_distribution<int>(2, 3)(rng);
  m.horizon = std::uniform_int_distribution<int>(2, 4)(rng);
  m.initial = random_distribution(m.states, rng);
  for (int a = 0; a < m.actions; ++a) {
    Mat p(m.states, m.states);
    for (int s = 0; s < m.states; ++s) p.row(s) = random_distribution(m.states, rng).transpose();
    m.transition.push_back(p);
  }
  return m;
}

/// Tabular conditional q(s' | s) over states, rows are distributions.
using TabularDensity = Mat;

inline Mat softmax_policy(const Mat& theta) {
  Mat pi(theta.rows(), theta.cols());
  for (Eigen::Index s = 0; s < theta.rows(); ++s) {
    const Vec z = theta.row(s).transpose();
    const Vec e = (z.array() - z.maxCoeff()).exp();
    pi.row(s) = (e / e.sum()).transpose();
  }
  return pi;
}

struct TinyTrajectory {
  std::vector<int> states;   // horizon + 1
  std::vector<int> actions;  // horizon
  double prob = 0.0;
};

/// Every (s_0, a_0, ..., s_H) sequence with its probability under theta.
inline std::vector<TinyTrajectory> enumerate_trajectories(const TinyMdp& mdp, const Mat& theta) {
  mdp.validate();
  require(theta.rows() == mdp.states && theta.cols() == mdp.actions, "theta must be S x A");
  const Mat pi = softmax_policy(theta);
  std::vector<TinyTrajectory> out;
  TinyTrajectory cur;
  std::function<void(int, double)> rec = [&](int t, double p) {
    if (t == mdp.horizon) {
      cur.prob = p;
      out.push_back(cur);
      return;
    }
    const int s = cur.states.back();
    for (int a = 0; a < mdp.actions; ++a)
      for (int s2 = 0; s2 < mdp.states; ++s2) {
        cur.actions.push_back(a);
        cur.states.push_back(s2);
        rec(t + 1, p * pi(s, a) * mdp.transition[static_cast<std::size_t>(a)](s, s2));
        cur.actions.pop_back();
        cur.states.pop_back();
      }
  };
  for (int s0 = 0; s0 < mdp.states; ++s0) {
    cur.states = {s0};
    cur.actions.clear();
    rec(0, mdp.initial(s0));
  }
  return out;
}

/// d/dtheta sum_t log pi(a_t | s_t), flattened row-major over (s, a).
inline Vec score(const TinyTrajectory& tr, const Mat& pi) {
  const Eigen::Index A = pi.cols();
  Vec g = Vec::Zero(pi.size());
  for (std::size_t t = 0; t < tr.actions.size(); ++t) {
    const int s = tr.states[t];
    for (Eigen::Index b = 0; b < A; ++b) g(s * A + b) += (b == tr.actions[t] ? 1.0 : 0.0) - pi(s, b);
  }
  return g;
}

inline Mat unflatten(const Vec& v, int rows, int cols) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = v(r * cols + c);
  return m;
}

inline Vec flatten(const Mat& m) {
  Vec v(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
  return v;
}

/// Central differences of f at theta, one coordinate at a time.
inline Vec finite_difference_gradient(const Mat& theta, const std::function<double(const Mat&)>& f, double eps = 1e-6) {
  const Vec base = flatten(theta);
  Vec g(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Vec up = base, down = base;
    up(i) += eps;
    down(i) -= eps;
    g(i) = (f(unflatten(up, static_cast<int>(theta.rows()), static_cast<int>(theta.cols()))) -
            f(unflatten(down, static_cast<int>(theta.rows()), static_cast<int>(theta.cols())))) /
           (2.0 * eps);
  }
  return g;
}

/// max over trajectories and coordinates of
/// | grad p(tau) (finite differences) - p(tau) * grad sum_t log pi(a_t|s_t) |.
inline double check_pathwise_identity(const TinyMdp& mdp, const Mat& theta, double eps = 1e-6) {
  const auto base = enumerate_trajectories(mdp, theta);
  const Mat pi = softmax_policy(theta);
  const Vec flat = flatten(theta);
  const int S = mdp.states, A = mdp.actions;
  // Finite differences of every trajectory probability at once.
  Mat fd(static_cast<Eigen::Index>(base.size()), flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Vec up = flat, down = flat;
    up(i) += eps;
    down(i) -= eps;
    const auto pu = enumerate_trajectories(mdp, unflatten(up, S, A));
    const auto pd = enumerate_trajectories(mdp, unflatten(down, S, A));
    for (std::size_t k = 0; k < base.size(); ++k)
      fd(static_cast<Eigen::Index>(k), i) = (pu[k].prob - pd[k].prob) / (2.0 * eps);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    const Vec rhs = base[k].prob * score(base[k], pi);
    worst = std::max(worst, (fd.row(static_cast<Eigen::Index>(k)).transpose() - rhs).cwiseAbs().maxCoeff());
  }
  return worst;
}

/// rho = sum_t log q_D(s_{t+1}|s_t) - log q_I(s_{t+1}|s_t).
inline double tabular_rho(const TinyTrajectory& tr, const TabularDensity& demo, const TabularDensity& imit) {
  double r = 0.0;
  for (std::size_t t = 0; t + 1 < tr.states.size(); ++t)
    r += std::log(demo(tr.states[t], tr.states[t + 1])) - std::log(imit(tr.states[t], tr.states[t + 1]));
  return r;
}

/// J(theta) = E_tau[rho(tau)] by exhaustive enumeration.
inline double form_objective(const TinyMdp& mdp, const Mat& theta, const TabularDensity& demo,
                             const TabularDensity& imit) {
  double j = 0.0;
  for (const auto& tr : enumerate_trajectories(mdp, theta)) j += tr.prob * tabular_rho(tr, demo, imit);
  return j;
}

/// E_tau[rho(tau) * sum_t grad log pi(a_t|s_t)] by exhaustive enumeration.
inline Vec form_score_gradient(const TinyMdp& mdp, const Mat& theta, const TabularDensity& demo,
                               const TabularDensity& imit) {
  const Mat pi = softmax_policy(theta);
  Vec g = Vec::Zero(theta.size());
  for (const auto& tr : enumerate_trajectories(mdp, theta)) g += tr.prob * tabular_rho(tr, demo, imit) * score(tr, pi);
  return g;
}

/// The imitator's own effect density, q_I(s'|s) = sum_a pi(a|s) P(s'|s,a).
inline TabularDensity imitator_marginal(const TinyMdp& mdp, const Mat& theta) {
  const Mat pi = softmax_policy(theta);
  Mat q = Mat::Zero(mdp.states, mdp.states);
  for (int s = 0; s < mdp.states; ++s)
    for (int a = 0; a < mdp.actions; ++a) q.row(s) += pi(s, a) * mdp.transition[static_cast<std::size_t>(a)].row(s);
  return q;
}

struct FormGradientCheck {
  double score_residual = 0.0;     // fixed models: score-function vs finite differences
  double vanishing_residual = 0.0; // self-model: finite differences with q_I(theta) vs score-function at fixed q_I
  double vanishing_integral = 0.0; // |E[sum_t grad log q_I(s_{t+1}|s_t)]| with q_I the imitator's own marginal
};

inline FormGradientCheck check_form_gradient(const TinyMdp& mdp, const TabularDensity& demo, const TabularDensity& imit,
                                             const Mat& theta, double eps = 1e-6) {
  FormGradientCheck r;
  const Vec exhaustive = form_score_gradient(mdp, theta, demo, imit);
  const Vec fd = finite_difference_gradient(
      theta, [&](const Mat& th) { return form_objective(mdp, th, demo, imit); }, eps);
  r.score_residual = (exhaustive - fd).cwiseAbs().maxCoeff();

  // With the imitator model equal to the imitator's own marginal, the
  // derivative through q_I integrates to zero, so differentiating J with
  // q_I moving must agree with the score estimator holding q_I fixed.
  const TabularDensity self = imitator_marginal(mdp, theta);
  const Vec held = form_score_gradient(mdp, theta, demo, self);
  const Vec moving = finite_difference_gradient(
      theta, [&](const Mat& th) { return form_objective(mdp, th, demo, imitator_marginal(mdp, th)); }, eps);
  r.vanishing_residual = (held - moving).cwiseAbs().maxCoeff();

  // E_tau[sum_t d/dtheta log q_I(s_{t+1}|s_t)] via per-entry finite
  // differences of log q_I.
  const Vec flat = flatten(theta);
  Vec integral = Vec::Zero(flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Vec up = flat, down = flat;
    up(i) += eps;
    down(i) -= eps;
    const Mat qu = imitator_marginal(mdp, unflatten(up, mdp.states, mdp.actions));
    const Mat qd = imitator_marginal(mdp, unflatten(down, mdp.states, mdp.actions));
    for (const auto& tr : enumerate_trajectories(mdp, theta))
      for (std::size_t t = 0; t + 1 < tr.states.size(); ++t) {
        const int s = tr.states[t], s2 = tr.states[t + 1];
        integral(i) += tr.prob * (std::log(qu(s, s2)) - std::log(qd(s, s2))) / (2.0 * eps);
      }
  }
  r.vanishing_integral = integral.cwiseAbs().maxCoeff();
  return r;
}

}  // namespace formlab::verify
