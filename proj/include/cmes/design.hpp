#pragma once

#include "cmes/box.hpp"
#include "cmes/parallel.hpp"
#include "cmes/rng.hpp"

#include <Eigen/Dense>

#include <functional>

namespace cmes {

// n points (rows), exactly one in each of the n equal strata of every axis.
Eigen::MatrixXd latin_hypercube(int n, const Box& domain, Rng& rng);

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct AcqOptConfig {
  int grid_1d = 401;       // grid points for d = 1
  int grid_2d = 41;        // points per axis for d = 2
  int restarts = 20;       // local refinements (top grid points for d <= 2, best pool points for d > 2)
  int pool = 1000;         // Latin hypercube pool for d > 2
  int refine_evals = 200;  // pattern-search budget per refinement
  double min_step = 1e-4;  // smallest pattern step in unit coordinates
};

struct ArgMax {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::Index index = -1;  // row of the winning candidate on finite domains
};

// Continuous box: coarse grid (d <= 2) or Latin hypercube pool (d > 2), then pattern
// search from the best starts. The result is never worse than any start.
ArgMax maximize_acquisition(const Objective& acq, const Box& domain, const AcqOptConfig& cfg, Rng& rng,
                            Exec exec = Exec::Parallel);

// Exhaustive search over the rows of candidates; ties go to the lowest index.
ArgMax maximize_over_candidates(const Objective& acq, const Eigen::MatrixXd& candidates, Exec exec = Exec::Parallel);

// Compass search in unit coordinates starting from x0 with value v0.
ArgMax pattern_search(const Objective& acq, const Box& domain, const Eigen::VectorXd& x0, double v0, double step,
                      const AcqOptConfig& cfg);

}  // namespace cmes
