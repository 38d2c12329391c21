#include "cmes/max_value.hpp"

#include "cmes/design.hpp"
#include "cmes/errors.hpp"
#include "cmes/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cmes {

MaxValueSample MaxValueSample::finite(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("finite max-value sample must be a finite number");
  return MaxValueSample(v);
}

std::vector<MaxValueSample> SampleSet::values() const {
  std::vector<MaxValueSample> out;
  out.reserve(entries.size());
  for (const SampleEntry& e : entries) out.push_back(e.fstar);
  return out;
}

double PathBundle::margin(const Eigen::VectorXd& x) const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < constraints.size(); ++c) m = std::min(m, constraints[c].eval(x) - thresholds[c]);
  return m;
}

bool PathBundle::feasible(const Eigen::VectorXd& x, double tol) const { return margin(x) >= -tol; }

namespace {

constexpr double kMinStep = 1e-6;
constexpr double kMaxStep = 0.5;

struct PointEval {
  double f = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad_f;
  Eigen::VectorXd grad_margin;  // gradient of the active (smallest-margin) constraint
};

PointEval evaluate(const PathBundle& p, const Eigen::VectorXd& x) {
  PointEval e;
  e.f = p.objective.eval_with_grad(x, e.grad_f);
  e.grad_margin = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd g;
  for (std::size_t c = 0; c < p.constraints.size(); ++c) {
    const double m = p.constraints[c].eval_with_grad(x, g) - p.thresholds[c];
    if (m < e.margin) {
      e.margin = m;
      e.grad_margin = g;
    }
  }
  return e;
}

// Value of each pool row for every path: objective values and margins.
void evaluate_pool(const PathBundle& p, const Eigen::MatrixXd& pool, Eigen::VectorXd& f, Eigen::VectorXd& margin) {
  f = p.objective.eval_rows(pool);
  margin = Eigen::VectorXd::Constant(pool.rows(), std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < p.constraints.size(); ++c)
    margin = margin.cwiseMin((p.constraints[c].eval_rows(pool).array() - p.thresholds[c]).matrix());
}

struct Tracker {
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd argmax;
  double tol;

  void visit(const Eigen::VectorXd& x, double f, double margin) {
    if (margin >= -tol && f > best) {
      best = f;
      argmax = x;
    }
  }
};

// Steepest ascent in unit coordinates on a scalar with gradient, accepting a step only
// when accept(candidate) holds. Returns the final point.
template <class Value, class Accept>
Eigen::VectorXd ascend(const Box& domain, Eigen::VectorXd x, int max_steps, Value&& value_and_dir, Accept&& accept) {
  const Eigen::VectorXd w = domain.width();
  double alpha = 0.05;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<Eigen::VectorXd> dirs = value_and_dir(x);
    bool moved = false;
    for (Eigen::VectorXd& dir_x : dirs) {
      Eigen::VectorXd dir = dir_x.cwiseProduct(w);
      const double norm = dir.norm();
      if (!(norm > 0.0) || !std::isfinite(norm)) continue;
      dir /= norm;
      for (double a = alpha; a >= kMinStep; a *= 0.5) {
        const Eigen::VectorXd cand = domain.clamp(x + a * dir.cwiseProduct(w));
        if (cand == x) break;
        if (accept(cand)) {
          x = cand;
          alpha = std::min(2.0 * a, kMaxStep);
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    if (!moved) break;
  }
  return x;
}

Eigen::MatrixXd start_pool(const Box& domain, int n, Rng& rng) { return latin_hypercube(std::max(n, 1), domain, rng); }

}  // namespace

PathMaxResult solve_constrained_path_max(const PathBundle& paths, const Box& domain, const SolverConfig& cfg,
                                         Rng& rng) {
  if ((domain.width().array() <= 0.0).all()) throw std::invalid_argument("solver domain is degenerate");
  const double tol = cfg.feasibility_tolerance;
  Tracker tracker{-std::numeric_limits<double>::infinity(), Eigen::VectorXd(), tol};

  const Eigen::MatrixXd pool = start_pool(domain, cfg.pool, rng);
  Eigen::VectorXd pf, pm;
  evaluate_pool(paths, pool, pf, pm);
  std::vector<Eigen::Index> feasible, infeasible;
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    tracker.visit(pool.row(i).transpose(), pf(i), pm(i));
    (pm(i) >= -tol ? feasible : infeasible).push_back(i);
  }
  std::stable_sort(feasible.begin(), feasible.end(), [&](auto a, auto b) { return pf(a) > pf(b); });
  std::stable_sort(infeasible.begin(), infeasible.end(), [&](auto a, auto b) { return pm(a) > pm(b); });

  std::vector<Eigen::VectorXd> starts;
  for (Eigen::Index i : feasible) {
    if (static_cast<int>(starts.size()) >= cfg.restarts) break;
    starts.push_back(pool.row(i).transpose());
  }
  int restorations = 0;
  for (Eigen::Index i : infeasible) {
    if (static_cast<int>(starts.size()) >= cfg.restarts || restorations++ >= cfg.restarts) break;
    // Restoration: raise the smallest margin until the point becomes feasible.
    Eigen::VectorXd x = pool.row(i).transpose();
    double cur = pm(i);
    x = ascend(
        domain, x, cfg.max_steps,
        [&](const Eigen::VectorXd& p) {
          const PointEval e = evaluate(paths, p);
          cur = e.margin;
          if (cur >= -tol) return std::vector<Eigen::VectorXd>{};
          return std::vector<Eigen::VectorXd>{e.grad_margin};
        },
        [&](const Eigen::VectorXd& c) {
          const PointEval e = evaluate(paths, c);
          tracker.visit(c, e.f, e.margin);
          return e.margin > cur;
        });
    if (paths.margin(x) >= -tol) starts.push_back(x);
  }

  for (const Eigen::VectorXd& x0 : starts) {
    double cur_f = paths.objective.eval(x0);
    ascend(
        domain, x0, cfg.max_steps,
        [&](const Eigen::VectorXd& p) {
          const PointEval e = evaluate(paths, p);
          cur_f = e.f;
          std::vector<Eigen::VectorXd> dirs{e.grad_f};
          // Slide along the active constraint when the raw gradient points out of the region.
          const double gm2 = e.grad_margin.squaredNorm();
          const double dot = e.grad_f.dot(e.grad_margin);
          if (gm2 > 0.0 && dot < 0.0) dirs.push_back(e.grad_f - (dot / gm2) * e.grad_margin);
          return dirs;
        },
        [&](const Eigen::VectorXd& c) {
          const PointEval e = evaluate(paths, c);
          tracker.visit(c, e.f, e.margin);
          return e.margin >= -tol && e.f > cur_f;
        });
  }

  PathMaxResult out;
  out.best_visited = tracker.best;
  if (std::isfinite(tracker.best)) {
    out.value = MaxValueSample::finite(tracker.best);
    out.argmax = tracker.argmax;
  }
  return out;
}

Eigen::VectorXd minimize_total_violation(const PathBundle& paths, const Box& domain, const SolverConfig& cfg,
                                         Rng& rng) {
  auto violation = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    double v = 0.0;
    if (grad) grad->setZero(x.size());
    Eigen::VectorXd g;
    for (std::size_t c = 0; c < paths.constraints.size(); ++c) {
      const double gc = paths.constraints[c].eval_with_grad(x, g);
      if (gc < paths.thresholds[c]) {
        v += paths.thresholds[c] - gc;
        if (grad) *grad -= g;
      }
    }
    return v;
  };
  const Eigen::MatrixXd pool = start_pool(domain, cfg.pool, rng);
  Eigen::VectorXd pv = Eigen::VectorXd::Zero(pool.rows());
  for (std::size_t c = 0; c < paths.constraints.size(); ++c)
    pv += (paths.thresholds[c] - paths.constraints[c].eval_rows(pool).array()).cwiseMax(0.0).matrix();
  std::vector<Eigen::Index> order(pool.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pv(a) < pv(b); });

  Eigen::VectorXd best_x = pool.row(order[0]).transpose();
  double best_v = pv(order[0]);
  const int n = std::min<int>(cfg.restarts, static_cast<int>(order.size()));
  for (int r = 0; r < n && best_v > 0.0; ++r) {
    double cur = pv(order[r]);
    const Eigen::VectorXd x = ascend(
        domain, pool.row(order[r]).transpose(), cfg.max_steps,
        [&](const Eigen::VectorXd& p) {
          Eigen::VectorXd g;
          cur = violation(p, &g);
          if (cur <= 0.0) return std::vector<Eigen::VectorXd>{};
          return std::vector<Eigen::VectorXd>{-g};
        },
        [&](const Eigen::VectorXd& c) { return violation(c, nullptr) < cur; });
    const double v = violation(x, nullptr);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  return best_x;
}

PathModel build_path_model(const ModelBundle& bundle, int rff_features, std::uint64_t seed) {
  PathModel pm;
  pm.thresholds = bundle.thresholds;
  const std::size_t nf = bundle.num_constraints() + 1;
  for (std::size_t j = 0; j < nf; ++j) {
    Rng rng = substream(seed, {tag(Stream::Features), j});
    auto map = std::make_shared<const FeatureMap>(build_feature_map(bundle.model(j).kernel(), rff_features, rng));
    pm.posteriors.push_back(weight_posterior(bundle.model(j), *map));
    pm.maps.push_back(std::move(map));
  }
  return pm;
}

PathBundle draw_path_bundle(const PathModel& model, Rng& rng) {
  SamplePath f = draw_sample_path(model.posteriors[0], model.maps[0], rng);
  std::vector<SamplePath> g;
  for (std::size_t j = 1; j < model.maps.size(); ++j) g.push_back(draw_sample_path(model.posteriors[j], model.maps[j], rng));
  return PathBundle{std::move(f), std::move(g), model.thresholds};
}

SampleSet sample_max_values(const ModelBundle& bundle, int K, const Box& domain, const SamplerConfig& cfg,
                            std::uint64_t seed, Exec exec) {
  if (K < 1) throw std::invalid_argument("K must be at least 1");
  const PathModel pm = build_path_model(bundle, cfg.rff_features, seed);
  SampleSet set;
  set.entries.resize(K);
  parallel_for(exec, K, [&](std::int64_t k) {
    Rng rng = substream(seed, {tag(Stream::MaxValue), static_cast<std::uint64_t>(k)});
    auto paths = std::make_shared<const PathBundle>(draw_path_bundle(pm, rng));
    const PathMaxResult r = solve_constrained_path_max(*paths, domain, cfg.solver, rng);
    set.entries[k] = SampleEntry{r.value, std::move(paths), std::nullopt, r.argmax};
  });
  return set;
}

JointGridSampler::JointGridSampler(const ModelBundle& bundle, Eigen::MatrixXd grid)
    : grid_(std::make_shared<const Eigen::MatrixXd>(std::move(grid))), thresholds_(bundle.thresholds) {
  if (grid_->rows() < 1) throw std::invalid_argument("grid must contain at least one point");
  if (grid_->rows() > kMaxJointGridPoints)
    throw ResourceError("grid of " + std::to_string(grid_->rows()) + " points exceeds the joint-draw limit of " +
                        std::to_string(kMaxJointGridPoints));
  for (std::size_t j = 0; j <= bundle.num_constraints(); ++j) {
    auto [mean, cov] = bundle.model(j).joint_posterior(*grid_);
    Eigen::MatrixXd factor;
    try {
      factor = cholesky_with_jitter(cov).lower;
    } catch (const NumericalError&) {
      // Numerically rank-deficient covariance: symmetric square root with clamped spectrum.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
      factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    means_.push_back(std::move(mean));
    factors_.push_back(std::move(factor));
  }
}

GridDraw JointGridSampler::draw(Rng& rng) const {
  const Eigen::Index m = grid_size();
  GridDraw d{grid_, Eigen::MatrixXd(num_functions(), m)};
  for (std::size_t j = 0; j < num_functions(); ++j) {
    const Eigen::VectorXd z = standard_normal_vector(rng, m);
    d.values.row(j) = (means_[j] + factors_[j] * z).transpose();
  }
  return d;
}

std::pair<MaxValueSample, Eigen::Index> JointGridSampler::max_value(const GridDraw& draw) const {
  double best = -std::numeric_limits<double>::infinity();
  Eigen::Index arg = -1;
  for (Eigen::Index i = 0; i < draw.values.cols(); ++i) {
    bool ok = true;
    for (std::size_t c = 0; c < thresholds_.size() && ok; ++c)
      ok = draw.values(c + 1, i) >= thresholds_[c] - kFeasibilityTolerance;
    if (ok && draw.values(0, i) > best) {
      best = draw.values(0, i);
      arg = i;
    }
  }
  if (arg < 0) return {MaxValueSample::negative_infinity(), -1};
  return {MaxValueSample::finite(best), arg};
}

SampleSet sample_max_values_finite_domain(const ModelBundle& bundle, int K, const Eigen::MatrixXd& grid,
                                          std::uint64_t seed, Exec exec) {
  if (K < 1) throw std::invalid_argument("K must be at least 1");
  const JointGridSampler sampler(bundle, grid);
  SampleSet set;
  set.entries.resize(K);
  parallel_for(exec, K, [&](std::int64_t k) {
    Rng rng = substream(seed, {tag(Stream::MaxValue), static_cast<std::uint64_t>(k)});
    GridDraw d = sampler.draw(rng);
    auto [v, arg] = sampler.max_value(d);
    std::optional<Eigen::VectorXd> argmax;
    if (arg >= 0) argmax = sampler.grid()->row(arg).transpose();
    set.entries[k] = SampleEntry{v, nullptr, std::move(d), std::move(argmax)};
  });
  return set;
}

std::vector<Eigen::VectorXd> fantasy_outputs(const SampleEntry& entry, const Eigen::MatrixXd& xq) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(xq.rows());
  for (Eigen::Index r = 0; r < xq.rows(); ++r) {
    const Eigen::VectorXd x = xq.row(r).transpose();
    if (entry.paths) {
      const PathBundle& p = *entry.paths;
      Eigen::VectorXd h(p.num_constraints() + 1);
      h(0) = p.objective.eval(x);
      for (std::size_t c = 0; c < p.num_constraints(); ++c) h(c + 1) = p.constraints[c].eval(x);
      out.push_back(std::move(h));
    } else if (entry.grid_draw) {
      const Eigen::MatrixXd& grid = *entry.grid_draw->grid;
      Eigen::Index hit = -1;
      for (Eigen::Index i = 0; i < grid.rows() && hit < 0; ++i)
        if (grid.row(i).transpose() == x) hit = i;
      if (hit < 0) throw std::invalid_argument("fantasy point is not a point of the sampled grid");
      out.push_back(entry.grid_draw->values.col(hit));
    } else {
      throw std::invalid_argument("sample entry retains neither paths nor a grid draw");
    }
  }
  return out;
}

}  // namespace cmes
