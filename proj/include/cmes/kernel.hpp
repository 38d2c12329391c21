#pragma once

#include <Eigen/Dense>

namespace cmes {

// k(x, y) = sigma2_lin * x.y + sigma2_rbf * exp(-0.5 * sum_i (x_i - y_i)^2 / l_i^2)
struct KernelSpec {
  double sigma2_lin = 0.0;
  double sigma2_rbf = 1.0;
  Eigen::VectorXd lengthscales;

  int dim() const { return static_cast<int>(lengthscales.size()); }
  void validate() const;
  static KernelSpec rbf(int d, double lengthscale, double variance = 1.0);
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Cross-covariance between the rows of a and the rows of b.
Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// k(X_i, x) for every row of X.
Eigen::VectorXd kernel_column(const KernelSpec& spec, const Eigen::MatrixXd& x_rows, const Eigen::VectorXd& x);

}  // namespace cmes
