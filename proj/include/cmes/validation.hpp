#pragma once

#include "cmes/acquisition.hpp"
#include "cmes/gp.hpp"
#include "cmes/max_value.hpp"
#include "cmes/parallel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cmes {

// One-dimensional state on 200 grid points of [0, 1] in which every constraint has
// the same posterior and the smallest constraint gamma over the grid is exactly -0.84.
struct ToyState {
  ModelBundle bundle;
  Eigen::MatrixXd grid;  // 200 x 1
  Eigen::Index center = 99;
};

inline constexpr int kToyGridSize = 200;
inline constexpr double kToyGamma = -0.84;

ToyState make_toy_state(int C);

struct KdeMiConfig {
  int n_outer = 500;
  int n_inner = 2000;
  std::uint64_t seed = 0;
  // Grid points whose log Pr(g_c >= z_c) falls below this for some c are never feasible
  // in practice and are dropped from the max.
  double active_log_prob = -30.0;
  int bins = 512;
  Exec exec = Exec::Parallel;
};

struct KdeMiEstimate {
  Eigen::VectorXd mi;          // clamped at 0
  Eigen::VectorXd raw;         // before clamping
  Eigen::VectorXd bandwidth;   // mean conditional bandwidth per point
  double reference_bandwidth = 0.0;
  double reference_feasible_fraction = 0.0;
  int n_outer = 0;
  int n_inner = 0;
  int empty_continuous = 0;    // (point, outer draw) pairs with fewer than two finite samples
  std::vector<std::string> diagnostics;
};

// Mutual information between h_x and f* at every grid point by nested Monte Carlo:
// conditional max-value samples come from a shared pool of joint grid draws moved onto
// h_x by rank-one conditioning; the discrete part compares Pr(f* = -inf) and the
// continuous part compares Gaussian-kernel density estimates (Silverman bandwidth) with
// order-64 Gauss-Legendre quadrature on mean +- 6 sd.
KdeMiEstimate kde_mi_oracle(const ModelBundle& bundle, const Eigen::MatrixXd& grid, const KdeMiConfig& cfg);

// Gaussian kernel density estimate with bandwidth 1.06 sd n^(-1/5), linearly binned.
class BinnedKde {
 public:
  BinnedKde(const std::vector<double>& samples, int bins);
  double bandwidth() const { return h_; }
  double log_density(double t) const;

 private:
  double lo_ = 0.0, width_ = 1.0, h_ = 1.0;
  double n_ = 0.0;
  std::vector<double> weights_;
};

struct NegativityCurve {
  int C = 0;
  Eigen::VectorXd cmes;
  Eigen::VectorXd cmes_ibo;
  Eigen::VectorXd kde_mi;
  Eigen::Index argmax_ibo = -1;
  Eigen::Index argmax_kde = -1;
  double min_cmes = 0.0;
  double min_ibo = 0.0;
  double correlation = 0.0;
};

struct NegativityConfig {
  int K = 100;
  std::uint64_t seed = 3;
  bool with_kde = true;
  KdeMiConfig kde;
  Exec exec = Exec::Parallel;
};

struct NegativityReport {
  std::vector<NegativityCurve> curves;
  bool pass = true;
  std::vector<std::string> lines;
};

// Checks: min CMES < 0 for C in {6, 7}; min CMES >= 0 for C = 4; CMES-IBO >= 0 always;
// CMES-IBO argmax equals the KDE-MI argmax.
NegativityReport demo_negativity(const std::vector<int>& C_values, const NegativityConfig& cfg);
void write_negativity_csv(const NegativityCurve& curve, const Eigen::MatrixXd& grid, const std::string& path);

struct TheoremConfig {
  int n_samples = 100000;
  int n_replicates = 10000;
  std::vector<int> K_values{1, 10, 100};
  std::vector<double> xi_values{0.5, 1.0, 2.0};
  std::uint64_t seed = 0;
  double variance_bound = 2.0;
};

struct TheoremPointResult {
  Eigen::VectorXd x;
  double variance = 0.0;
  double mean = 0.0;
  double infeasible_fraction = 0.0;
  // tail[k][i] for K_values[k], xi_values[i]
  std::vector<std::vector<double>> tail;
  std::vector<std::vector<double>> bound;
};

struct TheoremReport {
  std::vector<TheoremPointResult> points;
  bool variance_ok = true;
  bool concentration_ok = true;
  std::vector<std::string> violations;
};

// Draws n_samples max values from the joint posterior on sample_grid plus any x not already on it,
// then checks the variance of -log Zb(f*) at each x and the Chebyshev tail 2 / (K xi^2) of the
// K-sample average (replicates resampled from the drawn max values), with 3 Monte Carlo standard errors of slack.
TheoremReport check_theorem_bounds(const ModelBundle& bundle, const Eigen::MatrixXd& sample_grid,
                                   const Eigen::MatrixXd& x_list, const TheoremConfig& cfg);

// n max values from joint grid draws, generated in blocks with one substream per block.
std::vector<MaxValueSample> draw_grid_max_values(const JointGridSampler& sampler, int n, std::uint64_t seed,
                                                 Exec exec = Exec::Parallel);

struct AGammaReport {
  double a_zero = 0.0;
  double a_minus_084 = 0.0;
  double a_minus_30 = 0.0;
  bool pass = false;
};

AGammaReport check_a_gamma();

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace cmes
