#pragma once

#include "cmes/box.hpp"
#include "cmes/gp.hpp"
#include "cmes/parallel.hpp"
#include "cmes/rff.hpp"
#include "cmes/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace cmes {

// Sampled constrained optimum: a finite value, or negative infinity when the sampled
// feasible region is empty.
class MaxValueSample {
 public:
  static MaxValueSample finite(double v);
  static MaxValueSample negative_infinity() { return MaxValueSample(-std::numeric_limits<double>::infinity()); }

  bool is_finite() const { return value_ > -std::numeric_limits<double>::infinity(); }
  // The stored value; -inf for the infeasible case.
  double value() const { return value_; }
  bool operator==(const MaxValueSample&) const = default;

 private:
  explicit MaxValueSample(double v) : value_(v) {}
  double value_;
};

inline constexpr double kFeasibilityTolerance = 1e-9;

struct PathBundle {
  SamplePath objective;
  std::vector<SamplePath> constraints;
  std::vector<double> thresholds;

  std::size_t num_constraints() const { return constraints.size(); }
  // min_c (g_c(x) - z_c); +inf without constraints.
  double margin(const Eigen::VectorXd& x) const;
  bool feasible(const Eigen::VectorXd& x, double tol = kFeasibilityTolerance) const;
};

struct SolverConfig {
  int restarts = 10;
  int pool = 500;
  int max_steps = 100;
  double feasibility_tolerance = kFeasibilityTolerance;
};

struct PathMaxResult {
  MaxValueSample value = MaxValueSample::negative_infinity();
  std::optional<Eigen::VectorXd> argmax;
  // Best objective-path value among every feasible point evaluated.
  double best_visited = -std::numeric_limits<double>::infinity();
};

PathMaxResult solve_constrained_path_max(const PathBundle& paths, const Box& domain, const SolverConfig& cfg,
                                         Rng& rng);

// Point minimising sum_c max(0, z_c - g_c(x)), found by multi-start descent.
Eigen::VectorXd minimize_total_violation(const PathBundle& paths, const Box& domain, const SolverConfig& cfg,
                                         Rng& rng);

// One joint draw of every output at the points of a finite domain; rows are functions
// (objective first), columns are grid points.
struct GridDraw {
  std::shared_ptr<const Eigen::MatrixXd> grid;
  Eigen::MatrixXd values;
};

struct SampleEntry {
  MaxValueSample fstar = MaxValueSample::negative_infinity();
  std::shared_ptr<const PathBundle> paths;  // continuous domains
  std::optional<GridDraw> grid_draw;        // finite domains
  std::optional<Eigen::VectorXd> argmax;
};

struct SampleSet {
  std::vector<SampleEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<MaxValueSample> values() const;
};

struct SamplerConfig {
  int rff_features = kDefaultRffFeatures;
  SolverConfig solver;
};

// Per-function feature maps and weight posteriors shared by the K draws of one call.
struct PathModel {
  std::vector<std::shared_ptr<const FeatureMap>> maps;
  std::vector<LinearWeightPosterior> posteriors;
  std::vector<double> thresholds;
};

PathModel build_path_model(const ModelBundle& bundle, int rff_features, std::uint64_t seed);
PathBundle draw_path_bundle(const PathModel& model, Rng& rng);

// K independent path bundles, each solved for its constrained maximum. Draw k uses the
// substream (seed, MaxValue, k), so the result does not depend on exec.
SampleSet sample_max_values(const ModelBundle& bundle, int K, const Box& domain, const SamplerConfig& cfg,
                            std::uint64_t seed, Exec exec = Exec::Parallel);

// Joint multivariate normal draws of all outputs over a finite grid (rows are points).
class JointGridSampler {
 public:
  JointGridSampler(const ModelBundle& bundle, Eigen::MatrixXd grid);

  Eigen::Index grid_size() const { return grid_->rows(); }
  std::size_t num_functions() const { return means_.size(); }
  const std::shared_ptr<const Eigen::MatrixXd>& grid() const { return grid_; }
  const Eigen::VectorXd& mean(std::size_t j) const { return means_[j]; }
  const Eigen::MatrixXd& factor(std::size_t j) const { return factors_[j]; }
  const std::vector<double>& thresholds() const { return thresholds_; }

  GridDraw draw(Rng& rng) const;
  // Objective maximum over the points where every drawn constraint meets its threshold.
  std::pair<MaxValueSample, Eigen::Index> max_value(const GridDraw& draw) const;

 private:
  std::shared_ptr<const Eigen::MatrixXd> grid_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> factors_;
  std::vector<double> thresholds_;
};

inline constexpr Eigen::Index kMaxJointGridPoints = 20000;

SampleSet sample_max_values_finite_domain(const ModelBundle& bundle, int K, const Eigen::MatrixXd& grid,
                                          std::uint64_t seed, Exec exec = Exec::Parallel);

// Output vectors (objective, constraints) of the retained draw at each row of xq.
std::vector<Eigen::VectorXd> fantasy_outputs(const SampleEntry& entry, const Eigen::MatrixXd& xq);

}  // namespace cmes
