#pragma once

#include <Eigen/Dense>

namespace cmes {

struct CholeskyFactor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

// Lower Cholesky factor of A + jitter*I. Tries jitter 0, then 1e-10 up to max_jitter
// by decades, each scaled by the mean diagonal when that exceeds one. Throws
// NumericalError when every attempt fails.
CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& a, double max_jitter = 1e-6);

}  // namespace cmes
