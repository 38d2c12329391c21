#include "cmes/benchmarks.hpp"

#include "cmes/design.hpp"
#include "cmes/kernel.hpp"
#include "cmes/parallel.hpp"
#include "cmes/rff.hpp"
#include "cmes/rng.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace cmes {

bool Problem::feasible(const Eigen::VectorXd& x) const {
  for (std::size_t c = 0; c < constraints.size(); ++c)
    if (!(constraints[c](x) >= thresholds[c])) return false;
  return true;
}

Eigen::VectorXd Problem::evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(constraints.size() + 1);
  y(0) = objective(x);
  for (std::size_t c = 0; c < constraints.size(); ++c) y(c + 1) = constraints[c](x);
  return y;
}

namespace {

struct GridScan {
  double best = -std::numeric_limits<double>::infinity();
  Eigen::Index best_index = -1;
  double worst = std::numeric_limits<double>::infinity();
  Eigen::Index worst_index = -1;

  void add(Eigen::Index i, double f, bool feasible) {
    if (f < worst) {
      worst = f;
      worst_index = i;
    }
    if (feasible && f > best) {
      best = f;
      best_index = i;
    }
  }
  // Blocks are merged in index order, so ties keep the lowest index.
  void merge(const GridScan& o) {
    if (o.worst < worst) {
      worst = o.worst;
      worst_index = o.worst_index;
    }
    if (o.best_index >= 0 && o.best > best) {
      best = o.best;
      best_index = o.best_index;
    }
  }
};

GroundTruth finish_truth(const Problem& p, const GridScan& scan, int per_axis, bool refine) {
  if (scan.best_index < 0) throw std::runtime_error("problem " + p.name + " has no feasible grid point");
  GroundTruth gt;
  gt.x_star = grid_point(p.domain, per_axis, scan.best_index);
  gt.f_star = p.objective(gt.x_star);
  gt.min_f = p.objective(grid_point(p.domain, per_axis, scan.worst_index));
  gt.provenance = "dense grid " + std::to_string(per_axis) + "^" + std::to_string(p.dim());
  if (refine) {
    const Objective constrained = [&](const Eigen::VectorXd& x) {
      return p.feasible(x) ? p.objective(x) : -std::numeric_limits<double>::infinity();
    };
    AcqOptConfig cfg;
    cfg.refine_evals = 20000;
    cfg.min_step = 1e-9;
    const double step = 0.5 / (per_axis - 1);
    const ArgMax r = pattern_search(constrained, p.domain, gt.x_star, gt.f_star, step, cfg);
    if (r.value > gt.f_star) {
      gt.f_star = r.value;
      gt.x_star = r.x;
    }
    const Objective negated = [&](const Eigen::VectorXd& x) { return -p.objective(x); };
    const ArgMax lo = pattern_search(negated, p.domain, grid_point(p.domain, per_axis, scan.worst_index), -gt.min_f,
                                     step, cfg);
    gt.min_f = std::min(gt.min_f, -lo.value);
    gt.provenance += " + local refinement";
  }
  return gt;
}

}  // namespace

GroundTruth grid_ground_truth(const Problem& p, int per_axis, bool refine) {
  const Eigen::Index n = grid_size(p.dim(), per_axis);
  constexpr Eigen::Index kBlock = 4096;
  const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
  std::vector<GridScan> scans(blocks);
  parallel_for(Exec::Parallel, blocks, [&](std::int64_t b) {
    const Eigen::Index end = std::min(n, (b + 1) * kBlock);
    for (Eigen::Index i = b * kBlock; i < end; ++i) {
      const Eigen::VectorXd x = grid_point(p.domain, per_axis, i);
      scans[b].add(i, p.objective(x), p.feasible(x));
    }
  });
  GridScan all;
  for (const GridScan& s : scans) all.merge(s);
  return finish_truth(p, all, per_axis, refine);
}

namespace {

template <class Make>
const GroundTruth& cached_truth(const std::string& key, Make&& make) {
  static std::mutex mutex;
  static std::map<std::string, std::unique_ptr<GroundTruth>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_unique<GroundTruth>(make())).first;
  return *it->second;
}

}  // namespace

Problem gardner1() {
  Problem p;
  p.name = "gardner1";
  p.domain = Box::uniform(2, 0.0, 6.0);
  p.objective = [](const Eigen::VectorXd& x) { return -std::cos(2.0 * x(0)) * std::cos(x(1)) - std::sin(x(0)); };
  p.constraints = {[](const Eigen::VectorXd& x) {
    return -std::cos(x(0)) * std::cos(x(1)) + std::sin(x(0)) * std::sin(x(1)) + 0.5;
  }};
  p.thresholds = {0.0};
  p.ground_truth = cached_truth("gardner1", [&] { return grid_ground_truth(p, 2001, false); });
  return p;
}

Problem gardner2() {
  Problem p;
  p.name = "gardner2";
  p.domain = Box::uniform(2, 0.0, 6.0);
  p.objective = [](const Eigen::VectorXd& x) { return -std::sin(x(0)) - x(1); };
  p.constraints = {[](const Eigen::VectorXd& x) { return -std::sin(x(0)) * std::sin(x(1)) - 0.95; }};
  p.thresholds = {0.0};
  p.ground_truth = cached_truth("gardner2", [&] { return grid_ground_truth(p, 2001, false); });
  return p;
}

Problem gramacy() {
  Problem p;
  p.name = "gramacy";
  p.domain = Box::unit(2);
  p.objective = [](const Eigen::VectorXd& x) { return -x(0) - x(1); };
  p.constraints = {
      [](const Eigen::VectorXd& x) {
        return 0.5 * std::sin(2.0 * std::numbers::pi * (x(0) * x(0) - 2.0 * x(1))) + x(0) + 2.0 * x(1) - 1.5;
      },
      [](const Eigen::VectorXd& x) { return -x(0) * x(0) - x(1) * x(1) + 1.5; },
  };
  p.thresholds = {0.0, 0.0};
  p.ground_truth = cached_truth("gramacy", [&] { return grid_ground_truth(p, 2001, false); });
  return p;
}

const Eigen::Vector4d& Hartmann6Tables::alpha() {
  static const Eigen::Vector4d a(1.0, 1.2, 3.0, 3.2);
  return a;
}

const Eigen::Matrix<double, 4, 6>& Hartmann6Tables::A() {
  static const Eigen::Matrix<double, 4, 6> a = [] {
    Eigen::Matrix<double, 4, 6> m;
    m << 10, 3, 17, 3.5, 1.7, 8,  //
        0.05, 10, 17, 0.1, 8, 14,  //
        3, 3.5, 1.7, 10, 17, 8,    //
        17, 8, 0.05, 10, 0.1, 14;
    return m;
  }();
  return a;
}

const Eigen::Matrix<double, 4, 6>& Hartmann6Tables::P() {
  static const Eigen::Matrix<double, 4, 6> p = [] {
    Eigen::Matrix<double, 4, 6> m;
    m << 1312, 1696, 5569, 124, 8283, 5886,  //
        2329, 4135, 8307, 3736, 1004, 9991,  //
        2348, 1451, 3522, 2883, 3047, 6650,  //
        4047, 8828, 8732, 5743, 1091, 381;
    return Eigen::Matrix<double, 4, 6>(m * 1e-4);
  }();
  return p;
}

double hartmann6_value(const Eigen::VectorXd& x) {
  if (x.size() != 6) throw std::invalid_argument("hartmann6 expects a 6-vector");
  const auto& a = Hartmann6Tables::A();
  const auto& p = Hartmann6Tables::P();
  double v = 0.0;
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) s += a(i, j) * (x(j) - p(i, j)) * (x(j) - p(i, j));
    v += Hartmann6Tables::alpha()(i) * std::exp(-s);
  }
  return v;
}

Problem hartmann6(std::optional<Eigen::VectorXd> center) {
  Problem p;
  p.domain = Box::unit(6);
  const Eigen::VectorXd c = center ? *center : p.domain.center();
  if (c.size() != 6) throw std::invalid_argument("hartmann6 center must be a 6-vector");
  p.name = center ? "hartmann6-custom-center" : "hartmann6";
  p.objective = hartmann6_value;
  p.constraints = {[c](const Eigen::VectorXd& x) { return 1.0 - (x - c).norm(); }};
  p.thresholds = {0.0};
  p.default_n_init = 30;
  std::string key = "hartmann6";
  for (int i = 0; i < 6; ++i) key += ":" + std::to_string(c(i));
  p.ground_truth = cached_truth(key, [&] { return grid_ground_truth(p, 21, true); });
  return p;
}

namespace {

struct SyntheticFunctions {
  std::vector<SamplePath> paths;  // objective first
};

SyntheticFunctions synthetic_draw(std::uint64_t seed, int d, int C, double lengthscale) {
  SyntheticFunctions s;
  const KernelSpec spec = KernelSpec::rbf(d, lengthscale, 1.0);
  for (int j = 0; j <= C; ++j) {
    Rng rng = substream(seed, {tag(Stream::Problem), static_cast<std::uint64_t>(j)});
    auto map = std::make_shared<const FeatureMap>(build_feature_map(spec, 2000, rng));
    Eigen::VectorXd w = standard_normal_vector(rng, map->num_features());
    s.paths.emplace_back(map, std::move(w), Standardizer::identity());
  }
  return s;
}

int synthetic_grid(int d) { return d == 1 ? 2001 : d == 2 ? 201 : d == 3 ? 41 : 11; }

}  // namespace

Problem gp_synthetic(std::uint64_t seed, int d, int C, double lengthscale, double threshold, SyntheticInfo* info) {
  if (d < 1 || C < 0 || !(lengthscale > 0.0)) throw std::invalid_argument("invalid synthetic problem parameters");
  constexpr int kMaxReseeds = 100;
  const Box domain = Box::unit(d);
  const Eigen::MatrixXd grid = regular_grid(domain, synthetic_grid(d));
  for (int attempt = 0; attempt <= kMaxReseeds; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, {tag(Stream::Problem), 1000u + attempt});
    auto fns = std::make_shared<const SyntheticFunctions>(synthetic_draw(s, d, C, lengthscale));
    Eigen::Array<bool, Eigen::Dynamic, 1> feas = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(grid.rows(), true);
    for (int c = 1; c <= C; ++c) feas = feas && (fns->paths[c].eval_rows(grid).array() >= threshold);
    const Eigen::VectorXd fvals = fns->paths[0].eval_rows(grid);
    const double fraction = feas.cast<double>().mean();
    if (fraction == 0.0) continue;

    Problem p;
    p.name = "gp-synthetic:" + std::to_string(seed);
    p.domain = domain;
    p.objective = [fns](const Eigen::VectorXd& x) { return fns->paths[0].eval(x); };
    for (int c = 1; c <= C; ++c) p.constraints.push_back([fns, c](const Eigen::VectorXd& x) { return fns->paths[c].eval(x); });
    p.thresholds.assign(C, threshold);
    p.default_n_init = 5 * d;
    const std::string key = p.name + ":" + std::to_string(d) + ":" + std::to_string(C) + ":" +
                            std::to_string(lengthscale) + ":" + std::to_string(threshold);
    p.ground_truth = cached_truth(key, [&] {
      GridScan scan;
      for (Eigen::Index i = 0; i < grid.rows(); ++i) scan.add(i, fvals(i), feas(i));
      return finish_truth(p, scan, synthetic_grid(d), true);
    });
    if (info) *info = SyntheticInfo{s, attempt, fraction};
    return p;
  }
  throw std::runtime_error("no feasible synthetic problem found after reseeding");
}

Problem single_constraint_transform(const Problem& p) {
  if (p.num_constraints() < 1) throw std::invalid_argument("single-constraint transform needs C >= 1");
  Problem q = p;
  q.name = p.name + "-single";
  const std::vector<Evaluator> gs = p.constraints;
  const std::vector<double> zs = p.thresholds;
  q.constraints = {[gs, zs](const Eigen::VectorXd& x) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < gs.size(); ++c) m = std::min(m, gs[c](x) - zs[c]);
    return m;
  }};
  q.thresholds = {0.0};
  return q;
}

std::vector<std::string> problem_names() {
  return {"gardner1", "gardner2", "gramacy", "hartmann6", "gp-synthetic"};
}

Problem problem_by_name(const std::string& name) {
  const std::string suffix = "-single";
  if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
    return single_constraint_transform(problem_by_name(name.substr(0, name.size() - suffix.size())));
  if (name == "gardner1") return gardner1();
  if (name == "gardner2") return gardner2();
  if (name == "gramacy") return gramacy();
  if (name == "hartmann6") return hartmann6();
  const std::string synth = "gp-synthetic";
  if (name.rfind(synth, 0) == 0) {
    std::uint64_t seed = 0;
    if (name.size() > synth.size()) {
      if (name[synth.size()] != ':') throw std::invalid_argument("unknown problem: " + name);
      const std::string digits = name.substr(synth.size() + 1);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("unknown problem: " + name);
      seed = std::stoull(digits);
    }
    return gp_synthetic(seed);
  }
  throw std::invalid_argument("unknown problem: " + name);
}

}  // namespace cmes
