#pragma once

#include "cmes/box.hpp"
#include "cmes/kernel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cmes {

// Affine map between raw outputs and the zero-mean, unit-variance scale the GP works on.
struct Standardizer {
  double shift = 0.0;
  double scale = 1.0;

  static constexpr double kScaleFloor = 1e-8;
  // Empirical mean and population standard deviation (floored).
  static Standardizer fit(const Eigen::VectorXd& y);
  static Standardizer identity() { return {}; }
  double to_standard(double y) const { return (y - shift) / scale; }
  double to_raw(double s) const { return shift + scale * s; }
};

struct PosteriorGaussian {
  double mean = 0.0;
  double var = 0.0;
};

inline constexpr double kDefaultNoiseVar = 1e-6;

// Exact GP regression on standardized outputs. Immutable once built.
class GpModel {
 public:
  GpModel(KernelSpec kernel, Eigen::MatrixXd inputs, Eigen::VectorXd raw_outputs,
          double noise_var = kDefaultNoiseVar, std::optional<Standardizer> standardizer = std::nullopt);
  // Per-observation noise variances on the standardized scale.
  GpModel(KernelSpec kernel, Eigen::MatrixXd inputs, Eigen::VectorXd raw_outputs, Eigen::VectorXd noise_vars,
          Standardizer standardizer);
  static GpModel prior(KernelSpec kernel, Standardizer standardizer = Standardizer::identity());

  const KernelSpec& kernel() const { return kernel_; }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& raw_outputs() const { return raw_; }
  const Eigen::VectorXd& standardized_outputs() const { return ys_; }
  const Eigen::VectorXd& noise_vars() const { return noise_; }
  const Standardizer& standardizer() const { return standardizer_; }
  // Lower factor of (K + diag(noise) + jitter I) on the standardized scale.
  const Eigen::MatrixXd& factor() const { return chol_; }
  double jitter() const { return jitter_; }
  Eigen::Index size() const { return inputs_.rows(); }
  int dim() const { return kernel_.dim(); }

  double prior_variance(const Eigen::VectorXd& x) const;
  PosteriorGaussian posterior(const Eigen::VectorXd& x) const;
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> joint_posterior(const Eigen::MatrixXd& x_rows) const;
  double log_marginal_likelihood() const;

  // Same data and standardizer, different kernel.
  GpModel with_kernel(const KernelSpec& kernel) const;
  // Appends noiseless latent values at xq (raw units); the standardizer is kept.
  GpModel condition_on_fantasies(const Eigen::MatrixXd& xq, const Eigen::VectorXd& hq) const;

 private:
  void factorize();

  KernelSpec kernel_;
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd raw_;
  Eigen::VectorXd noise_;
  Standardizer standardizer_;
  Eigen::VectorXd ys_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

// Objective model, constraint models and thresholds z_c (raw units).
struct ModelBundle {
  GpModel objective;
  std::vector<GpModel> constraints;
  std::vector<double> thresholds;

  std::size_t num_constraints() const { return constraints.size(); }
  const GpModel& model(std::size_t j) const { return j == 0 ? objective : constraints[j - 1]; }
};

struct HyperBounds {
  double lin_lower = 0.0;
  double lin_upper = 1.0;
  double rbf_lower = 0.0;
  double rbf_upper = 1.0;
  Eigen::VectorXd ls_lower;
  Eigen::VectorXd ls_upper;

  // Weights in [0, 1]; lengthscales in [0.1 s_i, 10 s_i] with s_i the domain width.
  static HyperBounds for_domain(const Box& domain);
};

struct FitResult {
  KernelSpec spec;
  double log_marginal_likelihood = 0.0;
  bool ok = true;
  std::string warning;
};

// Multi-start compass search on log-parameters: the model's current spec plus
// n_random_starts log-uniform draws. Zero lower bounds on the weights are searched
// down to kWeightFloor.
inline constexpr double kWeightFloor = 1e-6;
FitResult fit_hyperparameters(const GpModel& model, const HyperBounds& bounds, std::uint64_t seed,
                              int n_random_starts = 7);

// Default starting spec for a domain: lin 0.1, rbf 1, lengthscale 0.3 s_i clipped into bounds.
KernelSpec default_kernel(const Box& domain);

}  // namespace cmes
