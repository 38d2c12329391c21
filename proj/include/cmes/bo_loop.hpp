#pragma once

#include "cmes/acquisition.hpp"
#include "cmes/benchmarks.hpp"
#include "cmes/box.hpp"
#include "cmes/design.hpp"
#include "cmes/gp.hpp"
#include "cmes/max_value.hpp"
#include "cmes/parallel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cmes {

enum class Method { CmesIbo, Cmes, Eic, Tsc, Random };

std::string method_name(Method m);
// Accepts cmes-ibo, cmes, eic, tsc, random; throws invalid_argument otherwise.
Method parse_method(const std::string& s);

struct BoConfig {
  Method method = Method::CmesIbo;
  int K = 10;
  int Q = 1;
  int T = 50;
  int n_init = 0;  // 0 selects the problem default
  int rff_features = kDefaultRffFeatures;
  int refit_period = 5;
  std::uint64_t seed = 0;
  AcqOptConfig acq_opt;
  SolverConfig solver;
  double feasibility_confidence = 0.95;
  int recommend_grid = 51;     // per axis for d <= 2
  int recommend_pool = 2000;   // Latin hypercube candidates for d > 2
  Exec exec = Exec::Parallel;

  void validate() const;
};

// What the optimizer needs to know about a problem without evaluating it.
struct ProblemDescriptor {
  std::string name;
  Box domain;
  std::vector<double> thresholds;
  int n_init = 5;

  std::size_t num_constraints() const { return thresholds.size(); }
  static ProblemDescriptor from_problem(const Problem& p);
};

struct Recommendation {
  Eigen::VectorXd point;
  bool feasible_by_rule = false;
  double predicted_mean = 0.0;
};

struct TraceRow {
  int iteration = 0;
  Eigen::MatrixXd queries;  // the batch evaluated to reach this iteration (empty for the initial design)
  Recommendation recommendation;
  std::optional<double> utility_gap;
  std::optional<double> best_observed_gap;
};

using UtilityGapTrace = std::vector<TraceRow>;

// Recommendation over a finite candidate set: highest posterior objective mean among the
// candidates with Pr(g_c >= z_c) >= confidence^(1/C) for every c; otherwise the candidate
// with the largest product of those probabilities, flagged infeasible. Ties go to the lowest index.
Recommendation recommend(const ModelBundle& bundle, const Eigen::MatrixXd& candidates, double confidence);
// Continuous domain: grid or Latin hypercube candidates plus the observed inputs, then
// a local polish of the winner under the same rule.
Recommendation recommend(const ModelBundle& bundle, const Box& domain, const BoConfig& cfg, Rng& rng);

// f* - f(x) when x is truly feasible, otherwise f* - min f.
double utility_gap(const Problem& problem, const Recommendation& rec);
// Same rule applied to the best truly feasible observation.
double best_observed_gap(const Problem& problem, const Eigen::MatrixXd& outputs);

// Ask/tell engine. The proposal at each step is a pure function of the configuration,
// the observed data, the kernel specs and the iteration counter.
class Optimizer {
 public:
  Optimizer(ProblemDescriptor descriptor, BoConfig cfg, std::optional<Problem> scorer = std::nullopt);

  // Restores a saved state; the caller guarantees consistency.
  struct State {
    int iteration = -1;  // -1 before the initial design is observed
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd outputs;  // columns: f, g_1..g_C
    std::vector<KernelSpec> kernels;
    std::optional<Eigen::MatrixXd> pending;
    UtilityGapTrace trace;
    std::vector<std::string> warnings;
  };
  Optimizer(ProblemDescriptor descriptor, BoConfig cfg, State state, std::optional<Problem> scorer = std::nullopt);

  // Next batch to evaluate: the initial design first, then Q points per iteration.
  // Throws StateError while a batch is pending.
  Eigen::MatrixXd ask();
  // Outputs for the pending batch, one row per point with C + 1 columns.
  // Throws StateError without a pending batch and invalid_argument on wrong shape.
  const TraceRow& tell(const Eigen::MatrixXd& outputs);

  const State& state() const { return state_; }
  const BoConfig& config() const { return cfg_; }
  const ProblemDescriptor& descriptor() const { return desc_; }
  int iteration() const { return state_.iteration; }
  bool has_pending() const { return state_.pending.has_value(); }
  ModelBundle bundle() const;
  Recommendation current_recommendation() const;

 private:
  Eigen::MatrixXd propose() const;
  void refit();

  ProblemDescriptor desc_;
  BoConfig cfg_;
  std::optional<Problem> scorer_;
  State state_;
};

// Acquisition-driven batch for one iteration (not used for Random).
Eigen::MatrixXd select_batch(const ModelBundle& bundle, const Eigen::MatrixXd& outputs, const Box& domain,
                             const BoConfig& cfg, int iteration);

struct RunResult {
  UtilityGapTrace trace;
  Optimizer::State state;
  bool completed = true;
  std::string error;
};

// Initial design plus cfg.T iterations. An evaluator failure stops the run and returns
// the partial trace with the error message.
RunResult run(const Problem& problem, const BoConfig& cfg);

}  // namespace cmes
