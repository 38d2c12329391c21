#include "cmes/bo_loop.hpp"

#include "cmes/errors.hpp"
#include "cmes/normal.hpp"
#include "cmes/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmes {

std::string method_name(Method m) {
  switch (m) {
    case Method::CmesIbo: return "cmes-ibo";
    case Method::Cmes: return "cmes";
    case Method::Eic: return "eic";
    case Method::Tsc: return "tsc";
    case Method::Random: return "random";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::CmesIbo, Method::Cmes, Method::Eic, Method::Tsc, Method::Random})
    if (method_name(m) == s) return m;
  throw std::invalid_argument("unknown method: " + s);
}

void BoConfig::validate() const {
  if (K < 1 || Q < 1 || T < 0 || n_init < 0 || rff_features < 1 || refit_period < 1)
    throw std::invalid_argument("BoConfig: counts must be positive (T and n_init may be 0)");
  if (!(feasibility_confidence > 0.0 && feasibility_confidence < 1.0))
    throw std::invalid_argument("BoConfig: feasibility confidence must lie in (0, 1)");
  if (recommend_grid < 2 || recommend_pool < 1) throw std::invalid_argument("BoConfig: recommendation set too small");
}

ProblemDescriptor ProblemDescriptor::from_problem(const Problem& p) {
  return {p.name, p.domain, p.thresholds, p.default_n_init};
}

namespace {

// log Pr(g_c >= z_c) for every constraint at x.
std::vector<double> log_feasibility(const OutputMarginals& m) {
  std::vector<double> out(m.num_constraints());
  for (std::size_t c = 0; c < m.num_constraints(); ++c) out[c] = normal::log_sf((m.z[c] - m.mu_g[c]) / m.sd_g[c]);
  return out;
}

struct RuleScore {
  bool qualifies = false;
  double mean = 0.0;
  double log_prob = 0.0;
};

RuleScore rule_score(const ModelBundle& bundle, const Eigen::VectorXd& x, double log_level) {
  const OutputMarginals m = output_marginals(bundle, x);
  RuleScore s{true, m.mu_f, 0.0};
  for (double lp : log_feasibility(m)) {
    s.log_prob += lp;
    if (lp < log_level) s.qualifies = false;
  }
  return s;
}

double log_rule_level(std::size_t C, double confidence) {
  return C == 0 ? -std::numeric_limits<double>::infinity() : std::log(confidence) / static_cast<double>(C);
}

}  // namespace

Recommendation recommend(const ModelBundle& bundle, const Eigen::MatrixXd& candidates, double confidence) {
  if (candidates.rows() < 1) throw std::invalid_argument("recommendation needs at least one candidate");
  const double level = log_rule_level(bundle.num_constraints(), confidence);
  Eigen::Index best_rule = -1, best_prob = 0;
  double best_mean = -std::numeric_limits<double>::infinity();
  double best_lp = -std::numeric_limits<double>::infinity();
  std::vector<RuleScore> scores(candidates.rows());
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    const RuleScore s = rule_score(bundle, candidates.row(i).transpose(), level);
    if (s.qualifies && s.mean > best_mean) {
      best_mean = s.mean;
      best_rule = i;
    }
    if (s.log_prob > best_lp) {
      best_lp = s.log_prob;
      best_prob = i;
    }
    scores[i] = s;
  }
  const Eigen::Index pick = best_rule >= 0 ? best_rule : best_prob;
  return {candidates.row(pick).transpose(), best_rule >= 0, scores[pick].mean};
}

Recommendation recommend(const ModelBundle& bundle, const Box& domain, const BoConfig& cfg, Rng& rng) {
  const int d = domain.dim();
  Eigen::MatrixXd pool = d <= 2 ? regular_grid(domain, cfg.recommend_grid) : latin_hypercube(cfg.recommend_pool, domain, rng);
  const Eigen::MatrixXd& observed = bundle.objective.inputs();
  Eigen::MatrixXd candidates(observed.rows() + pool.rows(), d);
  candidates << observed, pool;
  Recommendation rec = recommend(bundle, candidates, cfg.feasibility_confidence);
  if (!rec.feasible_by_rule) return rec;

  const double level = log_rule_level(bundle.num_constraints(), cfg.feasibility_confidence);
  const Objective constrained_mean = [&](const Eigen::VectorXd& x) {
    const RuleScore s = rule_score(bundle, x, level);
    return s.qualifies ? s.mean : -std::numeric_limits<double>::infinity();
  };
  const double step = d <= 2 ? 0.5 / (cfg.recommend_grid - 1) : 0.05;
  const ArgMax polished = pattern_search(constrained_mean, domain, rec.point, rec.predicted_mean, step, cfg.acq_opt);
  if (polished.value > rec.predicted_mean) {
    rec.point = polished.x;
    rec.predicted_mean = polished.value;
  }
  return rec;
}

double utility_gap(const Problem& problem, const Recommendation& rec) {
  if (!problem.ground_truth) throw UnsupportedProblemError("problem " + problem.name + " has no ground truth");
  const GroundTruth& gt = *problem.ground_truth;
  if (problem.feasible(rec.point)) return gt.f_star - problem.objective(rec.point);
  return gt.f_star - gt.min_f;
}

double best_observed_gap(const Problem& problem, const Eigen::MatrixXd& outputs) {
  if (!problem.ground_truth) throw UnsupportedProblemError("problem " + problem.name + " has no ground truth");
  const GroundTruth& gt = *problem.ground_truth;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    bool ok = true;
    for (std::size_t c = 0; c < problem.num_constraints() && ok; ++c) ok = outputs(i, c + 1) >= problem.thresholds[c];
    if (ok) best = std::max(best, outputs(i, 0));
  }
  return std::isfinite(best) ? gt.f_star - best : gt.f_star - gt.min_f;
}

namespace {

ModelBundle make_bundle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const std::vector<KernelSpec>& kernels,
                        const std::vector<double>& thresholds) {
  ModelBundle b{GpModel(kernels[0], x, y.col(0)), {}, thresholds};
  for (std::size_t c = 0; c < thresholds.size(); ++c) b.constraints.emplace_back(kernels[c + 1], x, y.col(c + 1));
  return b;
}

std::optional<double> best_feasible_observation(const Eigen::MatrixXd& y, const std::vector<double>& z) {
  std::optional<double> best;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    bool ok = true;
    for (std::size_t c = 0; c < z.size() && ok; ++c) ok = y(i, c + 1) >= z[c];
    if (ok && (!best || y(i, 0) > *best)) best = y(i, 0);
  }
  return best;
}

Eigen::MatrixXd append_row(const Eigen::MatrixXd& m, const Eigen::VectorXd& r) {
  Eigen::MatrixXd out(m.rows() + 1, r.size());
  if (m.rows() > 0) out.topRows(m.rows()) = m;
  out.row(m.rows()) = r.transpose();
  return out;
}

}  // namespace

Eigen::MatrixXd select_batch(const ModelBundle& bundle, const Eigen::MatrixXd& outputs, const Box& domain,
                             const BoConfig& cfg, int iteration) {
  const std::uint64_t t = static_cast<std::uint64_t>(iteration);
  const int d = domain.dim();
  Eigen::MatrixXd batch(0, d);

  switch (cfg.method) {
    case Method::CmesIbo:
    case Method::Cmes: {
      const SampleSet samples = sample_max_values(bundle, cfg.K, domain, SamplerConfig{cfg.rff_features, cfg.solver},
                                                  derive_seed(cfg.seed, {tag(Stream::MaxValue), t}), cfg.exec);
      const std::vector<MaxValueSample> values = samples.values();
      const bool ibo = cfg.method == Method::CmesIbo;
      for (int q = 0; q < cfg.Q; ++q) {
        Rng rng = substream(cfg.seed, {tag(Stream::Acquisition), t, static_cast<std::uint64_t>(q)});
        Objective acq;
        FantasySet fantasies;
        if (q == 0) {
          acq = [&](const Eigen::VectorXd& x) {
            const OutputMarginals m = output_marginals(bundle, x);
            return ibo ? cmes_ibo(m, values) : cmes(m, values);
          };
        } else {
          fantasies = build_fantasy_set(bundle, samples, batch, cfg.exec);
          acq = [&](const Eigen::VectorXd& x) {
            return ibo ? parallel_cmes_ibo(fantasies, x) : parallel_cmes(fantasies, x);
          };
        }
        batch = append_row(batch, maximize_acquisition(acq, domain, cfg.acq_opt, rng, cfg.exec).x);
      }
      break;
    }
    case Method::Eic: {
      const std::optional<double> best = best_feasible_observation(outputs, bundle.thresholds);
      const double liar = outputs.col(0).minCoeff();
      ModelBundle current = bundle;
      for (int q = 0; q < cfg.Q; ++q) {
        Rng rng = substream(cfg.seed, {tag(Stream::Acquisition), t, static_cast<std::uint64_t>(q)});
        const Objective acq = [&](const Eigen::VectorXd& x) { return eic(current, x, best); };
        const Eigen::VectorXd x = maximize_acquisition(acq, domain, cfg.acq_opt, rng, cfg.exec).x;
        batch = append_row(batch, x);
        if (q + 1 < cfg.Q) {
          // Constant liar: the worst observed objective and the posterior constraint means.
          const Eigen::MatrixXd xq = x.transpose();
          ModelBundle next{current.objective.condition_on_fantasies(xq, Eigen::VectorXd::Constant(1, liar)), {},
                           current.thresholds};
          for (const GpModel& g : current.constraints)
            next.constraints.push_back(g.condition_on_fantasies(xq, Eigen::VectorXd::Constant(1, g.posterior(x).mean)));
          current = std::move(next);
        }
      }
      break;
    }
    case Method::Tsc: {
      const PathModel pm = build_path_model(bundle, cfg.rff_features, derive_seed(cfg.seed, {tag(Stream::Thompson), t}));
      for (int q = 0; q < cfg.Q; ++q) {
        Rng rng = substream(cfg.seed, {tag(Stream::Thompson), t, static_cast<std::uint64_t>(q)});
        const PathBundle paths = draw_path_bundle(pm, rng);
        batch = append_row(batch, tsc_select(paths, domain, cfg.solver, rng));
      }
      break;
    }
    case Method::Random: {
      Rng rng = substream(cfg.seed, {tag(Stream::RandomQuery), t});
      for (int q = 0; q < cfg.Q; ++q) {
        Eigen::VectorXd u(d);
        for (int i = 0; i < d; ++i) u(i) = uniform01(rng);
        batch = append_row(batch, domain.from_unit(u));
      }
      break;
    }
  }
  return batch;
}

Optimizer::Optimizer(ProblemDescriptor descriptor, BoConfig cfg, std::optional<Problem> scorer)
    : desc_(std::move(descriptor)), cfg_(cfg), scorer_(std::move(scorer)) {
  cfg_.validate();
  if (cfg_.n_init == 0) cfg_.n_init = desc_.n_init;
  const KernelSpec k0 = default_kernel(desc_.domain);
  state_.kernels.assign(desc_.num_constraints() + 1, k0);
  state_.inputs.resize(0, desc_.domain.dim());
  state_.outputs.resize(0, static_cast<Eigen::Index>(desc_.num_constraints()) + 1);
}

Optimizer::Optimizer(ProblemDescriptor descriptor, BoConfig cfg, State state, std::optional<Problem> scorer)
    : desc_(std::move(descriptor)), cfg_(cfg), scorer_(std::move(scorer)), state_(std::move(state)) {
  cfg_.validate();
  if (cfg_.n_init == 0) cfg_.n_init = desc_.n_init;
  if (state_.kernels.size() != desc_.num_constraints() + 1)
    throw std::invalid_argument("restored state has the wrong number of kernels");
}

ModelBundle Optimizer::bundle() const {
  if (state_.inputs.rows() == 0) throw StateError("no observations yet");
  return make_bundle(state_.inputs, state_.outputs, state_.kernels, desc_.thresholds);
}

Eigen::MatrixXd Optimizer::propose() const {
  if (state_.iteration < 0) {
    Rng rng = substream(cfg_.seed, {tag(Stream::InitialDesign)});
    return latin_hypercube(cfg_.n_init, desc_.domain, rng);
  }
  return select_batch(bundle(), state_.outputs, desc_.domain, cfg_, state_.iteration);
}

Eigen::MatrixXd Optimizer::ask() {
  if (state_.pending) throw StateError("a batch is already pending; tell its outputs first");
  state_.pending = propose();
  return *state_.pending;
}

void Optimizer::refit() {
  if (state_.inputs.rows() < 2) return;
  const HyperBounds bounds = HyperBounds::for_domain(desc_.domain);
  for (std::size_t j = 0; j < state_.kernels.size(); ++j) {
    const GpModel model(state_.kernels[j], state_.inputs, state_.outputs.col(static_cast<Eigen::Index>(j)));
    const FitResult r = fit_hyperparameters(
        model, bounds, derive_seed(cfg_.seed, {tag(Stream::Hyperparameters), static_cast<std::uint64_t>(state_.iteration), j}));
    state_.kernels[j] = r.spec;
    if (!r.warning.empty())
      state_.warnings.push_back("iteration " + std::to_string(state_.iteration) + ", function " + std::to_string(j) +
                                ": " + r.warning);
  }
}

Recommendation Optimizer::current_recommendation() const {
  Rng rng = substream(cfg_.seed, {tag(Stream::Recommendation), static_cast<std::uint64_t>(std::max(state_.iteration, 0))});
  return recommend(bundle(), desc_.domain, cfg_, rng);
}

const TraceRow& Optimizer::tell(const Eigen::MatrixXd& outputs) {
  if (!state_.pending) throw StateError("tell called without a pending batch; call ask first");
  const Eigen::MatrixXd xq = *state_.pending;
  const Eigen::Index width = static_cast<Eigen::Index>(desc_.num_constraints()) + 1;
  if (outputs.rows() != xq.rows() || outputs.cols() != width)
    throw std::invalid_argument("tell expects " + std::to_string(xq.rows()) + " rows of " + std::to_string(width) +
                                " values (objective then each constraint)");
  if (!outputs.allFinite()) throw std::invalid_argument("tell values must be finite");

  const bool initial = state_.iteration < 0;
  Eigen::MatrixXd x(state_.inputs.rows() + xq.rows(), desc_.domain.dim());
  x << state_.inputs, xq;
  Eigen::MatrixXd y(state_.outputs.rows() + outputs.rows(), width);
  y << state_.outputs, outputs;
  state_.inputs = std::move(x);
  state_.outputs = std::move(y);
  state_.iteration += 1;
  state_.pending.reset();
  if (state_.iteration % cfg_.refit_period == 0) refit();

  TraceRow row;
  row.iteration = state_.iteration;
  row.queries = initial ? Eigen::MatrixXd(0, desc_.domain.dim()) : xq;
  row.recommendation = current_recommendation();
  if (scorer_ && scorer_->ground_truth) {
    row.utility_gap = utility_gap(*scorer_, row.recommendation);
    row.best_observed_gap = best_observed_gap(*scorer_, state_.outputs);
  }
  state_.trace.push_back(std::move(row));
  return state_.trace.back();
}

RunResult run(const Problem& problem, const BoConfig& cfg) {
  Optimizer opt(ProblemDescriptor::from_problem(problem), cfg, problem);
  RunResult result;
  try {
    for (int step = 0; step <= cfg.T; ++step) {
      const Eigen::MatrixXd xq = opt.ask();
      Eigen::MatrixXd y(xq.rows(), static_cast<Eigen::Index>(problem.num_constraints()) + 1);
      for (Eigen::Index r = 0; r < xq.rows(); ++r) {
        const Eigen::VectorXd v = problem.evaluate(xq.row(r).transpose());
        if (!v.allFinite()) throw std::runtime_error("evaluator returned a non-finite value");
        y.row(r) = v.transpose();
      }
      opt.tell(y);
    }
  } catch (const std::exception& e) {
    result.completed = false;
    result.error = e.what();
  }
  result.state = opt.state();
  result.trace = opt.state().trace;
  return result;
}

}  // namespace cmes
