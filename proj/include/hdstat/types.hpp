#pragma once

#include <Eigen/Dense>

namespace hdstat {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace hdstat
