#pragma once

#include <Eigen/Dense>

namespace eks {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace eks
