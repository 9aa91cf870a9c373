#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "formlab/common/error.hpp"
#include "formlab/common/types.hpp"

namespace formlab::envs {

struct LqrSolution {
  Mat p;  // stabilizing solution of the discrete algebraic Riccati equation
  Mat k;  // optimal feedback, a = -k x
  int iterations = 0;
};

inline double spectral_radius(const Mat& m) {
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Discrete-time infinite-horizon LQR by the structure-preserving doubling
/// algorithm:
///   W = I + G H,  A <- A W^-1 A,  G <- G + A W^-1 G A',  H <- H + A' H W^-1 A
/// starting from (A, B R^-1 B', Q); H converges quadratically to P.
inline LqrSolution solve_lqr(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double tol = 1e-12,
                             int max_iter = 200) {
  const Eigen::Index n = a.rows();
  require(a.cols() == n && b.rows() == n && q.rows() == n && q.cols() == n, "solve_lqr: shape mismatch");
  require(r.rows() == b.cols() && r.cols() == b.cols(), "solve_lqr: R must be m x m");
  Eigen::FullPivLU<Mat> r_lu(r);
  if (!r_lu.isInvertible()) throw StructuralError("solve_lqr: R is singular");

  Mat ak = a;
  Mat g = b * r_lu.solve(b.transpose());
  Mat h = q;
  const Mat eye = Mat::Identity(n, n);
  LqrSolution out;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::PartialPivLU<Mat> w(eye + g * h);
    const Mat w_inv_a = w.solve(ak);
    const Mat w_inv_g = w.solve(g);
    const Mat h_next = h + ak.transpose() * h * w_inv_a;
    g = g + ak * w_inv_g * ak.transpose();
    ak = ak * w_inv_a;
    const double delta = (h_next - h).norm();
    h = h_next;
    out.iterations = it;
    if (!h.allFinite()) break;
    if (delta <= tol * std::max(1.0, h.norm())) break;
  }
  if (!h.allFinite()) throw StructuralError("solve_lqr: Riccati iteration diverged (system not stabilizable?)");
  out.p = 0.5 * (h + h.transpose());
  out.k = (r + b.transpose() * out.p * b).ldlt().solve(b.transpose() * out.p * a);
  if (spectral_radius(a - b * out.k) >= 1.0)
    throw StructuralError("solve_lqr: closed loop is not stable (system not stabilizable?)");
  return out;
}

}  // namespace formlab::envs
