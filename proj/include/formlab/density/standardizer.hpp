#pragma once

#include <cmath>

#include "formlab/common/error.hpp"
#include "formlab/common/types.hpp"

namespace formlab::density {

/// Per-dimension running mean/variance, exponentially decayed per batch.
/// The first batch initializes the statistics directly.
class Standardizer {
 public:
  static constexpr double kDecay = 0.99;
  static constexpr double kVarianceFloor = 1e-8;

  Standardizer() = default;
  explicit Standardizer(int dim) : mean_(Vec::Zero(dim)), var_(Vec::Ones(dim)) {}
  Standardizer(Vec mean, Vec var, long count) : mean_(std::move(mean)), var_(std::move(var)), count_(count) {
    require(mean_.size() == var_.size(), "standardizer mean/variance size mismatch");
    var_ = var_.cwiseMax(kVarianceFloor);
  }

  int dim() const { return static_cast<int>(mean_.size()); }
  long count() const { return count_; }
  const Vec& mean() const { return mean_; }
  const Vec& variance() const { return var_; }
  Vec stddev() const { return var_.cwiseSqrt(); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  /// `batch` holds one observation per column.
  void update(const Mat& batch) {
    require(batch.rows() == dim(), "standardizer update: dimension mismatch");
    require(batch.cols() > 0, "standardizer update: empty batch");
    if (frozen_) return;
    const Vec bm = batch.rowwise().mean();
    const Vec bv = (batch.colwise() - bm).array().square().rowwise().mean();
    if (count_ == 0) {
      mean_ = bm;
      var_ = bv;
    } else {
      mean_ = kDecay * mean_ + (1.0 - kDecay) * bm;
      var_ = kDecay * var_ + (1.0 - kDecay) * bv;
    }
    var_ = var_.cwiseMax(kVarianceFloor);
    ++count_;
  }

  Vec standardize(const Vec& x) const {
    check_ready(x.size());
    return (x - mean_).cwiseQuotient(stddev());
  }

  Mat standardize(const Mat& x) const {
    check_ready(x.rows());
    return ((x.colwise() - mean_).array().colwise() / stddev().array()).matrix();
  }

  Vec unstandardize(const Vec& y) const {
    check_ready(y.size());
    return y.cwiseProduct(stddev()) + mean_;
  }

  /// Sum of log standard deviations: the log-Jacobian of unstandardize.
  double log_det_scale() const { return 0.5 * var_.array().log().sum(); }

 private:
  void check_ready(Eigen::Index n) const {
    if (count_ == 0) throw StructuralError("standardize called before any standardizer update");
    require(n == dim(), "standardize: dimension mismatch");
  }

  Vec mean_;
  Vec var_;
  long count_ = 0;
  bool frozen_ = false;
};

}  // namespace formlab::density
