#pragma once

// Reference computations used by the unit and acceptance tests. They avoid the
// library's factorization and quadrature code paths on purpose.

#include "cmes/acquisition.hpp"
#include "cmes/gp.hpp"
#include "cmes/rng.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace cmes::testing {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double rbf_lin(const KernelSpec& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += std::pow((a(i) - b(i)) / k.lengthscales(i), 2);
  return k.sigma2_lin * a.dot(b) + k.sigma2_rbf * std::exp(-0.5 * s);
}

struct DenseOracle {
  double mean = 0.0;
  double var = 0.0;
};

// Posterior by explicit inverse of the noisy Gram matrix on independently standardized outputs.
inline DenseOracle dense_posterior(const KernelSpec& k, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   double noise, const Eigen::VectorXd& q, bool standardize = true) {
  const Eigen::Index n = x.rows();
  double shift = 0.0, scale = 1.0;
  if (standardize) {
    shift = y.mean();
    scale = std::max(std::sqrt((y.array() - shift).square().mean()), 1e-8);
  }
  const Eigen::VectorXd ys = (y.array() - shift) / scale;
  Eigen::MatrixXd a(n, n);
  Eigen::VectorXd kq(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kq(i) = rbf_lin(k, x.row(i).transpose(), q);
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rbf_lin(k, x.row(i).transpose(), x.row(j).transpose());
    a(i, i) += noise;
  }
  const Eigen::MatrixXd inv = a.fullPivLu().inverse();
  return {shift + scale * kq.dot(inv * ys), scale * scale * (rbf_lin(k, q, q) - kq.dot(inv * kq))};
}

inline double dense_log_evidence(const KernelSpec& k, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 double noise) {
  const Eigen::Index n = x.rows();
  const double shift = y.mean();
  const double scale = std::max(std::sqrt((y.array() - shift).square().mean()), 1e-8);
  const Eigen::VectorXd ys = (y.array() - shift) / scale;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rbf_lin(k, x.row(i).transpose(), x.row(j).transpose());
  a.diagonal().array() += noise;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  return -0.5 * ys.dot(lu.solve(ys)) - 0.5 * std::log(lu.determinant()) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// Adaptive Gauss-Kronrod integral of -p log p of a Gaussian restricted to [a, b], with p
// renormalised by mass.
inline double truncated_entropy_quadrature(double mu, double sigma, double a, double b, double mass) {
  auto integrand = [&](double t) {
    const double p = phi((t - mu) / sigma) / (sigma * mass);
    return p > 0.0 ? -p * std::log(p) : 0.0;
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, a, b, 15, 1e-13);
}

// Entropy of an independent 2-D Gaussian restricted to the complement of the orthant
// [t1, inf) x [t2, inf), by nested adaptive Gauss-Kronrod over three rectangles.
inline double complement_entropy_2d(double mu1, double s1, double t1, double mu2, double s2, double t2) {
  const double lo1 = mu1 - 14.0 * s1, hi1 = mu1 + 14.0 * s1;
  const double lo2 = mu2 - 14.0 * s2, hi2 = mu2 + 14.0 * s2;
  const double c1 = std::clamp(t1, lo1, hi1), c2 = std::clamp(t2, lo2, hi2);
  const double mass = 1.0 - upper_tail((t1 - mu1) / s1) * upper_tail((t2 - mu2) / s2);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto cell = [&](double a1, double b1, double a2, double b2) {
    if (!(b1 > a1) || !(b2 > a2)) return 0.0;
    auto outer = [&](double u) {
      const double pu = phi((u - mu1) / s1) / s1;
      auto inner = [&](double v) {
        const double p = pu * phi((v - mu2) / s2) / s2 / mass;
        return p > 0.0 ? -p * std::log(p) : 0.0;
      };
      return GK::integrate(inner, a2, b2, 12, 1e-13);
    };
    return GK::integrate(outer, a1, b1, 12, 1e-13);
  };
  return cell(lo1, c1, lo2, c2) + cell(lo1, c1, c2, hi2) + cell(c1, hi1, lo2, c2);
}

inline Eigen::MatrixXd uniform_points(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double lo = 0.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = u(rng);
  return x;
}

// Random marginal state: sd in [0.05, 3], means in [-3, 3], thresholds near the means.
inline OutputMarginals random_marginals(std::mt19937_64& rng, int C) {
  std::uniform_real_distribution<double> mu(-3.0, 3.0), sd(0.05, 3.0), shift(-2.0, 2.0);
  OutputMarginals m;
  m.mu_f = mu(rng);
  m.sd_f = sd(rng);
  for (int c = 0; c < C; ++c) {
    m.mu_g.push_back(mu(rng));
    m.sd_g.push_back(sd(rng));
    m.z.push_back(m.mu_g.back() + shift(rng) * m.sd_g.back());
  }
  return m;
}

}  // namespace cmes::testing
