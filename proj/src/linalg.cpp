#include "cmes/linalg.hpp"

#include "cmes/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmes {

CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& a, double max_jitter) {
  const Eigen::Index n = a.rows();
  if (n == 0) return {Eigen::MatrixXd(0, 0), 0.0};
  const double scale = std::max(1.0, a.diagonal().mean());
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite() &&
        (llt.matrixLLT().diagonal().array() > 0.0).all()) {
      return {llt.matrixL(), jitter * scale};
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > max_jitter * (1.0 + 1e-9)) break;
  }
  throw NumericalError("matrix of size " + std::to_string(n) +
                       " is not positive definite after jitter " + std::to_string(max_jitter));
}

}  // namespace cmes
