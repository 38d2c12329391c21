#pragma once

#include "cmes/box.hpp"
#include "cmes/gp.hpp"
#include "cmes/max_value.hpp"
#include "cmes/parallel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace cmes {

inline constexpr double kSdFloor = 1e-9;
inline constexpr double kZBarFloor = 1e-16;

// Posterior means and standard deviations of every output at one point, plus thresholds.
struct OutputMarginals {
  double mu_f = 0.0;
  double sd_f = 1.0;
  std::vector<double> mu_g;
  std::vector<double> sd_g;
  std::vector<double> z;

  std::size_t num_constraints() const { return mu_g.size(); }
};

// Standard deviations are floored at kSdFloor.
OutputMarginals output_marginals(const ModelBundle& bundle, const Eigen::VectorXd& x);

struct GammaStats {
  double gamma_f = 0.0;  // -inf exactly when fstar is -inf
  std::vector<double> gamma_g;
};

GammaStats gamma_stats(const OutputMarginals& m, MaxValueSample fstar);

struct ZBarValue {
  double z = 0.0;
  double z_bar = 1.0;
  double log_z = 0.0;
  bool floored = false;  // z_bar was raised to kZBarFloor
};

// Z = (1 - Phi(gamma_f)) prod_c (1 - Phi(gamma_gc)) and its complement, from summed log tails.
ZBarValue z_bar(const GammaStats& g);
ZBarValue z_bar(const OutputMarginals& m, MaxValueSample fstar);
ZBarValue z_bar(const ModelBundle& bundle, const Eigen::VectorXd& x, MaxValueSample fstar);

// Per-sample terms.
double cmes_ibo_term(const GammaStats& g);
double cmes_term(const GammaStats& g);

struct AcquisitionValue {
  double value = 0.0;
  int floored = 0;  // samples whose z_bar hit the floor
};

AcquisitionValue cmes_ibo_detailed(const OutputMarginals& m, std::span<const MaxValueSample> samples);
AcquisitionValue cmes_detailed(const OutputMarginals& m, std::span<const MaxValueSample> samples);

double cmes_ibo(const OutputMarginals& m, std::span<const MaxValueSample> samples);
double pi_lower_bound(const OutputMarginals& m, std::span<const MaxValueSample> samples);
double cmes(const OutputMarginals& m, std::span<const MaxValueSample> samples);

double cmes_ibo(const ModelBundle& bundle, const Eigen::VectorXd& x, const SampleSet& samples);
double pi_lower_bound(const ModelBundle& bundle, const Eigen::VectorXd& x, const SampleSet& samples);
double cmes(const ModelBundle& bundle, const Eigen::VectorXd& x, const SampleSet& samples);

// One sampled max value with the bundle conditioned on that sample's fantasy outputs
// at the pending points.
struct FantasyEntry {
  MaxValueSample fstar;
  ModelBundle conditioned;
};

struct FantasySet {
  std::vector<FantasyEntry> entries;
  Eigen::MatrixXd pending;  // rows are the pending batch points
};

FantasySet build_fantasy_set(const ModelBundle& bundle, const SampleSet& samples, const Eigen::MatrixXd& pending,
                             Exec exec = Exec::Parallel);

double parallel_cmes_ibo(const FantasySet& fantasies, const Eigen::VectorXd& x);
double parallel_cmes(const FantasySet& fantasies, const Eigen::VectorXd& x);

// Expected improvement over best_feasible times the feasibility probability; without a
// feasible incumbent only the feasibility probability.
double expected_improvement(double mu, double sd, double best);
double feasibility_probability(const OutputMarginals& m);
double eic(const OutputMarginals& m, std::optional<double> best_feasible);
double eic(const ModelBundle& bundle, const Eigen::VectorXd& x, std::optional<double> best_feasible);

// Thompson selection: the sampled constrained argmax, or the minimiser of total sampled
// violation when the sampled feasible region is empty.
Eigen::VectorXd tsc_select(const PathBundle& paths, const Box& domain, const SolverConfig& cfg, Rng& rng);

}  // namespace cmes
