#pragma once

#include "cmes/box.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cmes {

using Evaluator = std::function<double(const Eigen::VectorXd&)>;

struct GroundTruth {
  double f_star = 0.0;
  double min_f = 0.0;
  Eigen::VectorXd x_star;
  std::string provenance;
};

struct Problem {
  std::string name;
  Box domain;
  Evaluator objective;
  std::vector<Evaluator> constraints;
  std::vector<double> thresholds;
  std::optional<GroundTruth> ground_truth;
  int default_n_init = 5;

  int dim() const { return domain.dim(); }
  std::size_t num_constraints() const { return constraints.size(); }
  bool feasible(const Eigen::VectorXd& x) const;
  // (f, g_1, ..., g_C) at x.
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
};

// Dense-grid ground truth: max of f over feasible grid points and min of f over the grid.
// Optionally polished by local search from the best feasible grid point.
GroundTruth grid_ground_truth(const Problem& p, int per_axis, bool refine);

Problem gardner1();
Problem gardner2();
Problem gramacy();

struct Hartmann6Tables {
  static const Eigen::Vector4d& alpha();
  static const Eigen::Matrix<double, 4, 6>& A();
  static const Eigen::Matrix<double, 4, 6>& P();
};
double hartmann6_value(const Eigen::VectorXd& x);
// Constraint 1 - |x - center|; center defaults to the domain center.
Problem hartmann6(std::optional<Eigen::VectorXd> center = std::nullopt);

struct SyntheticInfo {
  std::uint64_t accepted_seed = 0;
  int reseeds = 0;
  double feasible_fraction = 0.0;
};

// Objective and C constraints are fixed 2000-feature random Fourier prior draws of a
// unit-variance RBF GP. Seeds whose grid feasible set is empty are replaced by derived ones.
Problem gp_synthetic(std::uint64_t seed, int d = 2, int C = 10, double lengthscale = 0.2, double threshold = -0.75,
                     SyntheticInfo* info = nullptr);

// One constraint min_c (g_c - z_c) with threshold 0; ground truth carried over.
Problem single_constraint_transform(const Problem& p);

std::vector<std::string> problem_names();
// Names: gardner1, gardner2, gramacy, hartmann6, gp-synthetic[:seed], and any of those
// with the suffix "-single" for the single-constraint transform.
Problem problem_by_name(const std::string& name);

}  // namespace cmes
