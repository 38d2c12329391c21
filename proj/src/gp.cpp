#include "cmes/gp.hpp"

#include "cmes/errors.hpp"
#include "cmes/linalg.hpp"
#include "cmes/normal.hpp"
#include "cmes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmes {

Standardizer Standardizer::fit(const Eigen::VectorXd& y) {
  if (y.size() == 0) return {};
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  return {mean, std::max(std::sqrt(var), kScaleFloor)};
}

GpModel::GpModel(KernelSpec kernel, Eigen::MatrixXd inputs, Eigen::VectorXd raw_outputs, double noise_var,
                 std::optional<Standardizer> standardizer)
    : GpModel(std::move(kernel), inputs, raw_outputs, Eigen::VectorXd::Constant(raw_outputs.size(), noise_var),
              standardizer ? *standardizer : Standardizer::fit(raw_outputs)) {
  if (!(noise_var >= 0.0)) throw std::invalid_argument("noise variance must be non-negative");
}

GpModel::GpModel(KernelSpec kernel, Eigen::MatrixXd inputs, Eigen::VectorXd raw_outputs, Eigen::VectorXd noise_vars,
                 Standardizer standardizer)
    : kernel_(std::move(kernel)),
      inputs_(std::move(inputs)),
      raw_(std::move(raw_outputs)),
      noise_(std::move(noise_vars)),
      standardizer_(standardizer) {
  kernel_.validate();
  if (inputs_.rows() != raw_.size() || noise_.size() != raw_.size())
    throw std::invalid_argument("GpModel: inputs, outputs and noise lengths differ");
  if (inputs_.rows() > 0 && inputs_.cols() != kernel_.dim())
    throw std::invalid_argument("GpModel: input dimension does not match kernel");
  if (inputs_.rows() == 0) inputs_.resize(0, kernel_.dim());
  if (!(standardizer_.scale > 0.0)) throw std::invalid_argument("GpModel: standardizer scale must be positive");
  ys_ = (raw_.array() - standardizer_.shift) / standardizer_.scale;
  factorize();
}

GpModel GpModel::prior(KernelSpec kernel, Standardizer standardizer) {
  const int d = kernel.dim();
  return GpModel(std::move(kernel), Eigen::MatrixXd(0, d), Eigen::VectorXd(0), Eigen::VectorXd(0), standardizer);
}

void GpModel::factorize() {
  const Eigen::Index n = inputs_.rows();
  if (n == 0) {
    chol_.resize(0, 0);
    alpha_.resize(0);
    return;
  }
  Eigen::MatrixXd k = gram(kernel_, inputs_, inputs_);
  k.diagonal() += noise_;
  CholeskyFactor cf = cholesky_with_jitter(k);
  chol_ = std::move(cf.lower);
  jitter_ = cf.jitter;
  const auto l = chol_.triangularView<Eigen::Lower>();
  alpha_ = chol_.transpose().triangularView<Eigen::Upper>().solve(l.solve(ys_));
}

double GpModel::prior_variance(const Eigen::VectorXd& x) const {
  return standardizer_.scale * standardizer_.scale * kernel_eval(kernel_, x, x);
}

PosteriorGaussian GpModel::posterior(const Eigen::VectorXd& x) const {
  const double kxx = kernel_eval(kernel_, x, x);
  const double s2 = standardizer_.scale * standardizer_.scale;
  if (size() == 0) return {standardizer_.shift, s2 * kxx};
  const Eigen::VectorXd k = kernel_column(kernel_, inputs_, x);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  const double mean_s = k.dot(alpha_);
  const double var_s = std::max(kxx - v.squaredNorm(), 0.0);
  return {standardizer_.to_raw(mean_s), s2 * var_s};
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> GpModel::joint_posterior(const Eigen::MatrixXd& x_rows) const {
  if (x_rows.rows() < 1) throw std::invalid_argument("joint_posterior needs at least one point");
  const double s2 = standardizer_.scale * standardizer_.scale;
  Eigen::MatrixXd cov = gram(kernel_, x_rows, x_rows);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(x_rows.rows());
  if (size() > 0) {
    const Eigen::MatrixXd kxs = gram(kernel_, inputs_, x_rows);
    const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(kxs);
    mean = kxs.transpose() * alpha_;
    cov.noalias() -= v.transpose() * v;
  }
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal() = cov.diagonal().cwiseMax(0.0);
  mean = (mean.array() * standardizer_.scale + standardizer_.shift).matrix();
  return {mean, s2 * cov};
}

double GpModel::log_marginal_likelihood() const {
  const Eigen::Index n = size();
  if (n == 0) throw std::invalid_argument("log marginal likelihood needs at least one observation");
  return -0.5 * ys_.dot(alpha_) - chol_.diagonal().array().log().sum() -
         static_cast<double>(n) * normal::kLogSqrt2Pi;
}

GpModel GpModel::with_kernel(const KernelSpec& kernel) const {
  return GpModel(kernel, inputs_, raw_, noise_, standardizer_);
}

GpModel GpModel::condition_on_fantasies(const Eigen::MatrixXd& xq, const Eigen::VectorXd& hq) const {
  if (xq.rows() != hq.size()) throw std::invalid_argument("fantasy points and values differ in count");
  if (xq.rows() == 0) return *this;
  const Eigen::Index n = size(), q = xq.rows();
  Eigen::MatrixXd x(n + q, dim());
  x.topRows(n) = inputs_;
  x.bottomRows(q) = xq;
  Eigen::VectorXd y(n + q), noise(n + q);
  y << raw_, hq;
  noise << noise_, Eigen::VectorXd::Zero(q);
  return GpModel(kernel_, std::move(x), std::move(y), std::move(noise), standardizer_);
}

HyperBounds HyperBounds::for_domain(const Box& domain) {
  HyperBounds b;
  b.ls_lower = 0.1 * domain.width();
  b.ls_upper = 10.0 * domain.width();
  return b;
}

KernelSpec default_kernel(const Box& domain) {
  const HyperBounds b = HyperBounds::for_domain(domain);
  KernelSpec k;
  k.sigma2_lin = 0.1;
  k.sigma2_rbf = 1.0;
  k.lengthscales = (0.3 * domain.width()).cwiseMax(b.ls_lower).cwiseMin(b.ls_upper);
  return k;
}

namespace {

// Log-space box for each free parameter: [lin, rbf, l_1..l_d].
struct LogBox {
  Eigen::VectorXd lo, hi;
};

LogBox log_box(const HyperBounds& b, int d) {
  LogBox box{Eigen::VectorXd(2 + d), Eigen::VectorXd(2 + d)};
  box.lo(0) = std::log(std::max(b.lin_lower, kWeightFloor));
  box.hi(0) = std::log(std::max(b.lin_upper, kWeightFloor));
  box.lo(1) = std::log(std::max(b.rbf_lower, kWeightFloor));
  box.hi(1) = std::log(std::max(b.rbf_upper, kWeightFloor));
  for (int i = 0; i < d; ++i) {
    box.lo(2 + i) = std::log(b.ls_lower(i));
    box.hi(2 + i) = std::log(b.ls_upper(i));
  }
  return box;
}

KernelSpec from_theta(const Eigen::VectorXd& theta, const HyperBounds& b) {
  const int d = static_cast<int>(theta.size()) - 2;
  KernelSpec k;
  // Collapsed bounds are honoured exactly, including a collapsed zero.
  k.sigma2_lin = b.lin_lower == b.lin_upper ? b.lin_lower : std::exp(theta(0));
  k.sigma2_rbf = b.rbf_lower == b.rbf_upper ? b.rbf_lower : std::exp(theta(1));
  k.lengthscales.resize(d);
  for (int i = 0; i < d; ++i)
    k.lengthscales(i) = b.ls_lower(i) == b.ls_upper(i) ? b.ls_lower(i) : std::exp(theta(2 + i));
  return k;
}

Eigen::VectorXd to_theta(const KernelSpec& k, const LogBox& box) {
  Eigen::VectorXd t(2 + k.dim());
  t(0) = std::log(std::max(k.sigma2_lin, kWeightFloor));
  t(1) = std::log(std::max(k.sigma2_rbf, kWeightFloor));
  for (int i = 0; i < k.dim(); ++i) t(2 + i) = std::log(k.lengthscales(i));
  return t.cwiseMax(box.lo).cwiseMin(box.hi);
}

double evaluate_lml(const GpModel& model, const KernelSpec& spec) {
  try {
    const double v = model.with_kernel(spec).log_marginal_likelihood();
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

FitResult fit_hyperparameters(const GpModel& model, const HyperBounds& bounds, std::uint64_t seed,
                              int n_random_starts) {
  if (model.size() < 2) throw std::invalid_argument("hyperparameter fitting needs at least two observations");
  const int d = model.dim();
  if (bounds.ls_lower.size() != d || bounds.ls_upper.size() != d)
    throw std::invalid_argument("lengthscale bounds do not match model dimension");
  const LogBox box = log_box(bounds, d);
  const Eigen::Index p = box.lo.size();
  const Eigen::ArrayXi free = (box.hi.array() > box.lo.array()).cast<int>();

  std::vector<Eigen::VectorXd> starts{to_theta(model.kernel(), box)};
  Rng rng = substream(seed, {tag(Stream::Hyperparameters)});
  for (int s = 0; s < n_random_starts; ++s) {
    Eigen::VectorXd t(p);
    for (Eigen::Index i = 0; i < p; ++i) t(i) = box.lo(i) + uniform01(rng) * (box.hi(i) - box.lo(i));
    starts.push_back(t);
  }

  FitResult best{model.kernel(), -std::numeric_limits<double>::infinity(), false, ""};
  const KernelSpec& current = model.kernel();
  const bool current_in_bounds =
      current.sigma2_lin >= bounds.lin_lower && current.sigma2_lin <= bounds.lin_upper &&
      current.sigma2_rbf >= bounds.rbf_lower && current.sigma2_rbf <= bounds.rbf_upper &&
      (current.lengthscales.array() >= bounds.ls_lower.array()).all() &&
      (current.lengthscales.array() <= bounds.ls_upper.array()).all();
  if (current_in_bounds) {
    const double v = evaluate_lml(model, current);
    if (std::isfinite(v)) best = {current, v, true, ""};
  }
  for (const Eigen::VectorXd& start : starts) {
    Eigen::VectorXd theta = start;
    double value = evaluate_lml(model, from_theta(theta, bounds));
    if (std::isfinite(value)) {
      double step = 1.0;
      int evals = 0;
      while (step > 1e-3 && evals < 400) {
        bool improved = false;
        for (Eigen::Index i = 0; i < p; ++i) {
          if (!free(i)) continue;
          for (double dir : {1.0, -1.0}) {
            Eigen::VectorXd trial = theta;
            trial(i) = std::clamp(theta(i) + dir * step, box.lo(i), box.hi(i));
            if (trial(i) == theta(i)) continue;
            const double v = evaluate_lml(model, from_theta(trial, bounds));
            ++evals;
            if (v > value) {
              value = v;
              theta = trial;
              improved = true;
              break;
            }
          }
        }
        if (!improved) step *= 0.5;
      }
    }
    if (value > best.log_marginal_likelihood) {
      best.log_marginal_likelihood = value;
      best.spec = from_theta(theta, bounds);
      best.ok = true;
    }
  }
  if (!best.ok) {
    best.spec = model.kernel();
    best.warning = "all hyperparameter starts failed numerically; keeping previous kernel";
  }
  return best;
}

}  // namespace cmes
