#include "cmes/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cmes {

Eigen::MatrixXd latin_hypercube(int n, const Box& domain, Rng& rng) {
  if (n < 1) throw std::invalid_argument("latin hypercube needs n >= 1");
  const int d = domain.dim();
  Eigen::MatrixXd pts(n, d);
  std::vector<int> perm(n);
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) {
      double u = (perm[i] + uniform01(rng)) / n;
      u = std::min(u, std::nextafter((perm[i] + 1.0) / n, 0.0));
      pts(i, j) = domain.lower(j) + u * (domain.upper(j) - domain.lower(j));
    }
  }
  return pts;
}

ArgMax maximize_over_candidates(const Objective& acq, const Eigen::MatrixXd& candidates, Exec exec) {
  if (candidates.rows() < 1) throw std::invalid_argument("candidate set is empty");
  Eigen::VectorXd values(candidates.rows());
  parallel_for(exec, candidates.rows(), [&](std::int64_t i) { values(i) = acq(candidates.row(i).transpose()); });
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (values(i) > values(best)) best = i;
  return {candidates.row(best).transpose(), values(best), best};
}

ArgMax pattern_search(const Objective& acq, const Box& domain, const Eigen::VectorXd& x0, double v0, double step,
                      const AcqOptConfig& cfg) {
  const int d = domain.dim();
  const Eigen::VectorXd w = domain.width();
  Eigen::VectorXd x = x0;
  double v = v0;
  int evals = 0;
  while (step >= cfg.min_step && evals < cfg.refine_evals) {
    bool improved = false;
    for (int i = 0; i < d && !improved; ++i) {
      if (w(i) == 0.0) continue;
      for (double dir : {1.0, -1.0}) {
        Eigen::VectorXd trial = x;
        trial(i) = std::clamp(x(i) + dir * step * w(i), domain.lower(i), domain.upper(i));
        if (trial(i) == x(i)) continue;
        const double tv = acq(trial);
        ++evals;
        if (tv > v) {
          x = trial;
          v = tv;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {x, v, -1};
}

ArgMax maximize_acquisition(const Objective& acq, const Box& domain, const AcqOptConfig& cfg, Rng& rng, Exec exec) {
  const int d = domain.dim();
  Eigen::MatrixXd starts;
  double step = 0.0;
  if (d == 1) {
    starts = regular_grid(domain, cfg.grid_1d);
    step = 0.5 / std::max(cfg.grid_1d - 1, 1);
  } else if (d == 2) {
    starts = regular_grid(domain, cfg.grid_2d);
    step = 0.5 / std::max(cfg.grid_2d - 1, 1);
  } else {
    starts = latin_hypercube(cfg.pool, domain, rng);
    step = 0.1;
  }
  Eigen::VectorXd values(starts.rows());
  parallel_for(exec, starts.rows(), [&](std::int64_t i) { values(i) = acq(starts.row(i).transpose()); });

  std::vector<Eigen::Index> order(starts.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
  const int n_refine = std::min<int>(cfg.restarts, static_cast<int>(order.size()));

  std::vector<ArgMax> refined(n_refine);
  parallel_for(exec, n_refine, [&](std::int64_t r) {
    const Eigen::Index i = order[r];
    refined[r] = pattern_search(acq, domain, starts.row(i).transpose(), values(i), step, cfg);
  });
  ArgMax best{starts.row(order[0]).transpose(), values(order[0]), -1};
  for (const ArgMax& a : refined)
    if (a.value > best.value) best = a;
  return best;
}

}  // namespace cmes
