#pragma once

#include "cmes/gp.hpp"
#include "cmes/kernel.hpp"
#include "cmes/rng.hpp"

#include <Eigen/Dense>

#include <memory>

namespace cmes {

inline constexpr int kDefaultRffFeatures = 500;

// phi(x) = [sqrt(2 s_rbf / D) cos(W x + b), sqrt(s_lin) x], so E[phi(x).phi(y)] = k(x, y).
struct FeatureMap {
  Eigen::MatrixXd frequencies;  // D x d, rows ~ N(0, diag(1 / l^2))
  Eigen::VectorXd phases;       // D, uniform on [0, 2 pi)
  double rbf_weight = 0.0;
  bool include_linear = false;
  double linear_weight = 0.0;

  int input_dim() const { return static_cast<int>(frequencies.cols()); }
  int num_cosine() const { return static_cast<int>(frequencies.rows()); }
  int num_features() const { return num_cosine() + (include_linear ? input_dim() : 0); }
  Eigen::VectorXd features(const Eigen::VectorXd& x) const;
  // Rows are points; result is n x num_features.
  Eigen::MatrixXd features_rows(const Eigen::MatrixXd& x_rows) const;
};

FeatureMap build_feature_map(const KernelSpec& spec, int num_features, Rng& rng);

// Gaussian posterior of the weights of f(x) = omega . phi(x) on the standardized scale,
// prior omega ~ N(0, I), per-observation noise taken from the model.
struct LinearWeightPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd factor;  // lower triangular, factor * factor^T = covariance
  Standardizer standardizer;
};

LinearWeightPosterior weight_posterior(const GpModel& model, const FeatureMap& map);

// A fixed weight vector over a shared feature map; values in raw output units.
class SamplePath {
 public:
  SamplePath(std::shared_ptr<const FeatureMap> map, Eigen::VectorXd weights, Standardizer standardizer);

  double eval(const Eigen::VectorXd& x) const;
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
  double eval_with_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
  Eigen::VectorXd eval_rows(const Eigen::MatrixXd& x_rows) const;

  const FeatureMap& feature_map() const { return *map_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Standardizer& standardizer() const { return standardizer_; }

 private:
  std::shared_ptr<const FeatureMap> map_;
  Eigen::VectorXd weights_;
  Standardizer standardizer_;
  Eigen::VectorXd cos_weights_;  // weights of the cosine block times the feature scale
};

SamplePath draw_sample_path(const LinearWeightPosterior& post, std::shared_ptr<const FeatureMap> map, Rng& rng);
SamplePath mean_path(const LinearWeightPosterior& post, std::shared_ptr<const FeatureMap> map);

}  // namespace cmes
