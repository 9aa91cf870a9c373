#pragma once

#include <Eigen/Dense>

namespace formlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;

}  // namespace formlab
