#pragma once

#include <Eigen/Dense>

namespace coge {

// Row-major keeps node rows contiguous, which is the access pattern of
// every aggregation and cost computation in the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace coge
