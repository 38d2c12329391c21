#include "cmes/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace cmes {

void KernelSpec::validate() const {
  if (!(sigma2_lin >= 0.0) || !(sigma2_rbf >= 0.0))
    throw std::invalid_argument("kernel weights must be non-negative");
  if (lengthscales.size() == 0) throw std::invalid_argument("kernel needs at least one lengthscale");
  if (!(lengthscales.array() > 0.0).all()) throw std::invalid_argument("lengthscales must be positive");
}

KernelSpec KernelSpec::rbf(int d, double lengthscale, double variance) {
  return KernelSpec{0.0, variance, Eigen::VectorXd::Constant(d, lengthscale)};
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != spec.lengthscales.size() || y.size() != spec.lengthscales.size())
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  const double r2 = ((x - y).array() / spec.lengthscales.array()).square().sum();
  return spec.sigma2_lin * x.dot(y) + spec.sigma2_rbf * std::exp(-0.5 * r2);
}

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index d = spec.lengthscales.size();
  if (a.cols() != d || b.cols() != d) throw std::invalid_argument("gram: dimension mismatch");
  // Pairwise differences rather than the |a|^2 - 2ab + |b|^2 expansion, so that
  // coincident points give exactly exp(0).
  const Eigen::MatrixXd as = a * spec.lengthscales.array().inverse().matrix().asDiagonal();
  const Eigen::MatrixXd bs_t = (b * spec.lengthscales.array().inverse().matrix().asDiagonal()).transpose();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        const double diff = as(i, c) - bs_t(c, j);
        r2 += diff * diff;
      }
      k(i, j) = spec.sigma2_rbf * std::exp(-0.5 * r2);
    }
  }
  if (spec.sigma2_lin != 0.0) k.noalias() += spec.sigma2_lin * a * b.transpose();
  return k;
}

Eigen::VectorXd kernel_column(const KernelSpec& spec, const Eigen::MatrixXd& x_rows, const Eigen::VectorXd& x) {
  const Eigen::Index n = x_rows.rows();
  if (x.size() != spec.lengthscales.size() || (n > 0 && x_rows.cols() != x.size()))
    throw std::invalid_argument("kernel_column: dimension mismatch");
  Eigen::VectorXd k(n);
  const Eigen::ArrayXd inv_l2 = spec.lengthscales.array().square().inverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd diff = x_rows.row(i).transpose().array() - x.array();
    double v = spec.sigma2_rbf * std::exp(-0.5 * (diff.square() * inv_l2).sum());
    if (spec.sigma2_lin != 0.0) v += spec.sigma2_lin * x_rows.row(i).dot(x);
    k(i) = v;
  }
  return k;
}

}  // namespace cmes
