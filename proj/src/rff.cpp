#include "cmes/rff.hpp"

#include "cmes/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cmes {

Eigen::VectorXd FeatureMap::features(const Eigen::VectorXd& x) const {
  Eigen::VectorXd phi(num_features());
  const int dc = num_cosine();
  if (dc > 0) {
    const double s = std::sqrt(2.0 * rbf_weight / dc);
    phi.head(dc) = s * (frequencies * x + phases).array().cos().matrix();
  }
  if (include_linear) phi.tail(input_dim()) = std::sqrt(linear_weight) * x;
  return phi;
}

Eigen::MatrixXd FeatureMap::features_rows(const Eigen::MatrixXd& x_rows) const {
  Eigen::MatrixXd phi(x_rows.rows(), num_features());
  const int dc = num_cosine();
  if (dc > 0) {
    const double s = std::sqrt(2.0 * rbf_weight / dc);
    Eigen::MatrixXd arg = x_rows * frequencies.transpose();
    arg.rowwise() += phases.transpose();
    phi.leftCols(dc) = s * arg.array().cos().matrix();
  }
  if (include_linear) phi.rightCols(input_dim()) = std::sqrt(linear_weight) * x_rows;
  return phi;
}

FeatureMap build_feature_map(const KernelSpec& spec, int num_features, Rng& rng) {
  spec.validate();
  if (num_features < 1) throw std::invalid_argument("feature count must be positive");
  const int d = spec.dim();
  FeatureMap map;
  map.frequencies = standard_normal_matrix(rng, num_features, d);
  for (int j = 0; j < d; ++j) map.frequencies.col(j) /= spec.lengthscales(j);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  map.phases.resize(num_features);
  for (int i = 0; i < num_features; ++i) map.phases(i) = phase(rng);
  map.rbf_weight = spec.sigma2_rbf;
  map.include_linear = spec.sigma2_lin > 0.0;
  map.linear_weight = spec.sigma2_lin;
  return map;
}

LinearWeightPosterior weight_posterior(const GpModel& model, const FeatureMap& map) {
  const int m = map.num_features();
  LinearWeightPosterior post;
  post.standardizer = model.standardizer();
  if (model.size() == 0) {
    post.mean = Eigen::VectorXd::Zero(m);
    post.factor = Eigen::MatrixXd::Identity(m, m);
    return post;
  }
  // Dual form: with A = Phi Phi^T + Lambda (n x n),
  // mean = Phi^T A^-1 y and covariance = I - Phi^T A^-1 Phi.
  const Eigen::MatrixXd phi = map.features_rows(model.inputs());
  Eigen::MatrixXd a = phi * phi.transpose();
  a.diagonal() += model.noise_vars();
  const CholeskyFactor ca = cholesky_with_jitter(a);
  const auto l = ca.lower.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd b = l.solve(phi);
  post.mean = b.transpose() * l.solve(model.standardized_outputs());
  Eigen::MatrixXd cov = -b.transpose() * b;
  cov.diagonal().array() += 1.0;
  cov = 0.5 * (cov + cov.transpose());
  post.factor = cholesky_with_jitter(cov).lower;
  return post;
}

SamplePath::SamplePath(std::shared_ptr<const FeatureMap> map, Eigen::VectorXd weights, Standardizer standardizer)
    : map_(std::move(map)), weights_(std::move(weights)), standardizer_(standardizer) {
  if (!map_) throw std::invalid_argument("sample path needs a feature map");
  if (weights_.size() != map_->num_features()) throw std::invalid_argument("weights do not match feature map");
  const int dc = map_->num_cosine();
  const double s = dc > 0 ? std::sqrt(2.0 * map_->rbf_weight / dc) : 0.0;
  cos_weights_ = s * weights_.head(dc);
}

double SamplePath::eval(const Eigen::VectorXd& x) const {
  const FeatureMap& m = *map_;
  double v = cos_weights_.dot((m.frequencies * x + m.phases).array().cos().matrix());
  if (m.include_linear) v += std::sqrt(m.linear_weight) * weights_.tail(m.input_dim()).dot(x);
  return standardizer_.to_raw(v);
}

double SamplePath::eval_with_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  const FeatureMap& m = *map_;
  const Eigen::ArrayXd arg = (m.frequencies * x + m.phases).array();
  double v = cos_weights_.dot(arg.cos().matrix());
  grad = -m.frequencies.transpose() * (cos_weights_.array() * arg.sin()).matrix();
  if (m.include_linear) {
    const double s = std::sqrt(m.linear_weight);
    v += s * weights_.tail(m.input_dim()).dot(x);
    grad += s * weights_.tail(m.input_dim());
  }
  grad *= standardizer_.scale;
  return standardizer_.to_raw(v);
}

Eigen::VectorXd SamplePath::grad(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g;
  eval_with_grad(x, g);
  return g;
}

Eigen::VectorXd SamplePath::eval_rows(const Eigen::MatrixXd& x_rows) const {
  constexpr Eigen::Index kChunk = 1024;
  Eigen::VectorXd s(x_rows.rows());
  for (Eigen::Index r = 0; r < x_rows.rows(); r += kChunk) {
    const Eigen::Index m = std::min(kChunk, x_rows.rows() - r);
    s.segment(r, m).noalias() = map_->features_rows(x_rows.middleRows(r, m)) * weights_;
  }
  return (s.array() * standardizer_.scale + standardizer_.shift).matrix();
}

SamplePath draw_sample_path(const LinearWeightPosterior& post, std::shared_ptr<const FeatureMap> map, Rng& rng) {
  const Eigen::VectorXd z = standard_normal_vector(rng, post.mean.size());
  Eigen::VectorXd w = post.mean + post.factor.triangularView<Eigen::Lower>() * z;
  return SamplePath(std::move(map), std::move(w), post.standardizer);
}

SamplePath mean_path(const LinearWeightPosterior& post, std::shared_ptr<const FeatureMap> map) {
  return SamplePath(std::move(map), post.mean, post.standardizer);
}

}  // namespace cmes
