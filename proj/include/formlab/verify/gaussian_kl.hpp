#pragma once

#include <cmath>

#include "formlab/common/error.hpp"
#include "formlab/common/types.hpp"

namespace formlab::verify {

/// KL(N(m1, diag v1) || N(m2, diag v2)).
inline double gaussian_kl(const Vec& m1, const Vec& v1, const Vec& m2, const Vec& v2) {
  require(m1.size() == v1.size() && m1.size() == m2.size() && m1.size() == v2.size(),
          "gaussian_kl: dimension mismatch");
  if ((v1.array() <= 0).any() || (v2.array() <= 0).any()) throw StructuralError("gaussian_kl: variances must be > 0");
  double kl = 0.0;
  for (Eigen::Index d = 0; d < m1.size(); ++d) {
    const double diff = m2(d) - m1(d);
    kl += 0.5 * (v1(d) / v2(d) + diff * diff / v2(d) - 1.0 + std::log(v2(d) / v1(d)));
  }
  return kl;
}

}  // namespace formlab::verify
