#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "formlab/common/error.hpp"
#include "formlab/common/rng.hpp"
#include "formlab/common/types.hpp"

namespace formlab::density {

inline constexpr int kMixtureComponents = 4;
inline constexpr double kScaleBias = 1e-4;

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Effective mixture scale: softplus(raw) + 1e-4, hence always > 1e-4.
inline double effective_scale(double raw) { return softplus(raw) + kScaleBias; }

/// Head output of an effect model for one conditioning input.
/// means and raw_scales hold one column per component.
struct GmmOutput {
  Vec logits;      // K
  Mat means;       // D x K
  Mat raw_scales;  // D x K

  int dim() const { return static_cast<int>(means.rows()); }
  int components() const { return static_cast<int>(logits.size()); }

  /// Head vector layout: [logits (K) | means (K*D, component-major) | raw scales (K*D)].
  static int head_size(int dim, int k = kMixtureComponents) { return k + 2 * k * dim; }

  static GmmOutput from_head(const Eigen::Ref<const Vec>& head, int dim, int k = kMixtureComponents) {
    require(head.size() == head_size(dim, k), "GMM head size mismatch");
    GmmOutput g;
    g.logits = head.head(k);
    g.means = Eigen::Map<const Mat>(head.data() + k, dim, k);
    g.raw_scales = Eigen::Map<const Mat>(head.data() + k + k * dim, dim, k);
    return g;
  }

  Vec to_head() const {
    const int k = components(), d = dim();
    Vec h(head_size(d, k));
    h.head(k) = logits;
    Eigen::Map<Mat>(h.data() + k, d, k) = means;
    Eigen::Map<Mat>(h.data() + k + k * d, d, k) = raw_scales;
    return h;
  }

  Mat scales() const { return raw_scales.unaryExpr([](double r) { return effective_scale(r); }); }

  Vec mixture_weights() const {
    Vec w = (logits.array() - logits.maxCoeff()).exp();
    return w / w.sum();
  }

  Vec mixture_mean() const { return means * mixture_weights(); }
};

namespace detail {
inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}
}  // namespace detail

/// log sum_k softmax(logits)_k prod_d N(target_d; mean_kd, scale_kd^2),
/// evaluated in log space. When `d_head` is non-null it receives the
/// gradient of the *negative* log-probability with respect to the head
/// vector (layout of GmmOutput::head_size).
inline double gmm_log_prob_head(const Eigen::Ref<const Vec>& head, const Eigen::Ref<const Vec>& target,
                                Eigen::Ref<Vec> d_head, bool want_grad, int k = kMixtureComponents) {
  const int d = static_cast<int>(target.size());
  require(head.size() == GmmOutput::head_size(d, k), "gmm_log_prob: head/target dimension mismatch");
  const double* logits = head.data();
  const double* means = head.data() + k;
  const double* raws = head.data() + k + k * d;
  static constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 log(2 pi)

  double lmax = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) lmax = std::max(lmax, logits[c]);
  double lse_logits = 0.0;
  for (int c = 0; c < k; ++c) lse_logits += std::exp(logits[c] - lmax);
  lse_logits = lmax + std::log(lse_logits);

  Vec comp(k);
  for (int c = 0; c < k; ++c) {
    double lp = logits[c] - lse_logits;
    for (int i = 0; i < d; ++i) {
      const double s = effective_scale(raws[c * d + i]);
      const double z = (target(i) - means[c * d + i]) / s;
      lp += -0.5 * z * z - std::log(s) - kHalfLog2Pi;
    }
    comp(c) = lp;
  }
  const double total = detail::log_sum_exp(comp);
  if (!want_grad) return total;

  for (int c = 0; c < k; ++c) {
    const double resp = std::isfinite(comp(c)) ? std::exp(comp(c) - total) : 0.0;
    const double prior = std::exp(logits[c] - lse_logits);
    d_head(c) = prior - resp;
    for (int i = 0; i < d; ++i) {
      const double raw = raws[c * d + i];
      const double s = effective_scale(raw);
      const double diff = target(i) - means[c * d + i];
      d_head(k + c * d + i) = -resp * diff / (s * s);
      const double d_scale = -resp * (diff * diff / (s * s * s) - 1.0 / s);
      d_head(k + k * d + c * d + i) = d_scale * sigmoid(raw);
    }
  }
  return total;
}

inline double gmm_log_prob(const GmmOutput& out, const Vec& target) {
  require(out.dim() == target.size(), "gmm_log_prob: dimension mismatch");
  Vec head = out.to_head();
  Vec unused;
  return gmm_log_prob_head(head, target, unused, false, out.components());
}

/// Categorical draw over components, then a diagonal Gaussian draw.
inline Vec gmm_sample(const GmmOutput& out, Rng& rng) {
  const Vec w = out.mixture_weights();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  int c = 0;
  double acc = w(0);
  while (r > acc && c + 1 < out.components()) acc += w(++c);
  Vec x(out.dim());
  for (int i = 0; i < out.dim(); ++i)
    x(i) = out.means(i, c) + effective_scale(out.raw_scales(i, c)) * standard_normal(rng);
  return x;
}

}  // namespace formlab::density
