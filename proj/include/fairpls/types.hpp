#pragma once

#include <Eigen/Dense>

namespace fairpls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace fairpls
