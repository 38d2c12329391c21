#include "cmes/acquisition.hpp"

#include "cmes/normal.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace cmes {

OutputMarginals output_marginals(const ModelBundle& bundle, const Eigen::VectorXd& x) {
  OutputMarginals m;
  const PosteriorGaussian pf = bundle.objective.posterior(x);
  m.mu_f = pf.mean;
  m.sd_f = std::max(std::sqrt(pf.var), kSdFloor);
  for (std::size_t c = 0; c < bundle.num_constraints(); ++c) {
    const PosteriorGaussian pg = bundle.constraints[c].posterior(x);
    m.mu_g.push_back(pg.mean);
    m.sd_g.push_back(std::max(std::sqrt(pg.var), kSdFloor));
  }
  m.z = bundle.thresholds;
  return m;
}

GammaStats gamma_stats(const OutputMarginals& m, MaxValueSample fstar) {
  GammaStats g;
  g.gamma_f = fstar.is_finite() ? (fstar.value() - m.mu_f) / m.sd_f : -std::numeric_limits<double>::infinity();
  g.gamma_g.resize(m.num_constraints());
  for (std::size_t c = 0; c < m.num_constraints(); ++c) g.gamma_g[c] = (m.z[c] - m.mu_g[c]) / m.sd_g[c];
  return g;
}

ZBarValue z_bar(const GammaStats& g) {
  double log_z = normal::log_sf(g.gamma_f);
  for (double gc : g.gamma_g) log_z += normal::log_sf(gc);
  ZBarValue v;
  v.log_z = log_z;
  v.z = std::exp(log_z);
  v.z_bar = -std::expm1(log_z);
  if (!(v.z_bar >= kZBarFloor)) {
    v.z_bar = kZBarFloor;
    v.floored = true;
  }
  return v;
}

ZBarValue z_bar(const OutputMarginals& m, MaxValueSample fstar) { return z_bar(gamma_stats(m, fstar)); }

ZBarValue z_bar(const ModelBundle& bundle, const Eigen::VectorXd& x, MaxValueSample fstar) {
  return z_bar(output_marginals(bundle, x), fstar);
}

double cmes_ibo_term(const GammaStats& g) { return -std::log(z_bar(g).z_bar); }

double cmes_term(const GammaStats& g) {
  const ZBarValue zb = z_bar(g);
  double r = normal::tail_ratio(g.gamma_f);
  for (double gc : g.gamma_g) r += normal::tail_ratio(gc);
  const double weight = zb.z / (2.0 * zb.z_bar);
  // A zero Z cancels an infinite ratio: no truncation, no correction.
  const double correction = zb.z == 0.0 ? 0.0 : weight * r;
  return correction - std::log(zb.z_bar);
}

namespace {

template <class Term>
AcquisitionValue average_terms(const OutputMarginals& m, std::span<const MaxValueSample> samples, Term&& term) {
  if (samples.empty()) throw std::invalid_argument("acquisition needs at least one max-value sample");
  AcquisitionValue out;
  for (const MaxValueSample& s : samples) {
    const GammaStats g = gamma_stats(m, s);
    out.value += term(g);
    out.floored += z_bar(g).floored ? 1 : 0;
  }
  out.value /= static_cast<double>(samples.size());
  return out;
}

}  // namespace

AcquisitionValue cmes_ibo_detailed(const OutputMarginals& m, std::span<const MaxValueSample> samples) {
  return average_terms(m, samples, [](const GammaStats& g) { return cmes_ibo_term(g); });
}

AcquisitionValue cmes_detailed(const OutputMarginals& m, std::span<const MaxValueSample> samples) {
  return average_terms(m, samples, [](const GammaStats& g) { return cmes_term(g); });
}

double cmes_ibo(const OutputMarginals& m, std::span<const MaxValueSample> samples) {
  return cmes_ibo_detailed(m, samples).value;
}

double cmes(const OutputMarginals& m, std::span<const MaxValueSample> samples) {
  return cmes_detailed(m, samples).value;
}

double pi_lower_bound(const OutputMarginals& m, std::span<const MaxValueSample> samples) {
  return average_terms(m, samples, [](const GammaStats& g) { return z_bar(g).z; }).value;
}

double cmes_ibo(const ModelBundle& bundle, const Eigen::VectorXd& x, const SampleSet& samples) {
  const std::vector<MaxValueSample> v = samples.values();
  return cmes_ibo(output_marginals(bundle, x), v);
}

double pi_lower_bound(const ModelBundle& bundle, const Eigen::VectorXd& x, const SampleSet& samples) {
  const std::vector<MaxValueSample> v = samples.values();
  return pi_lower_bound(output_marginals(bundle, x), v);
}

double cmes(const ModelBundle& bundle, const Eigen::VectorXd& x, const SampleSet& samples) {
  const std::vector<MaxValueSample> v = samples.values();
  return cmes(output_marginals(bundle, x), v);
}

FantasySet build_fantasy_set(const ModelBundle& bundle, const SampleSet& samples, const Eigen::MatrixXd& pending,
                             Exec exec) {
  if (samples.size() == 0) throw std::invalid_argument("fantasy set needs at least one sample");
  FantasySet fs;
  fs.pending = pending;
  std::vector<std::optional<FantasyEntry>> slots(samples.size());
  parallel_for(exec, static_cast<std::int64_t>(samples.size()), [&](std::int64_t k) {
    const SampleEntry& e = samples.entries[k];
    if (pending.rows() == 0) {
      slots[k].emplace(FantasyEntry{e.fstar, bundle});
      return;
    }
    const std::vector<Eigen::VectorXd> h = fantasy_outputs(e, pending);
    auto column = [&](std::size_t j) {
      Eigen::VectorXd v(h.size());
      for (std::size_t r = 0; r < h.size(); ++r) v(r) = h[r](j);
      return v;
    };
    ModelBundle conditioned{bundle.objective.condition_on_fantasies(pending, column(0)), {}, bundle.thresholds};
    for (std::size_t c = 0; c < bundle.num_constraints(); ++c)
      conditioned.constraints.push_back(bundle.constraints[c].condition_on_fantasies(pending, column(c + 1)));
    slots[k].emplace(FantasyEntry{e.fstar, std::move(conditioned)});
  });
  fs.entries.reserve(slots.size());
  for (auto& s : slots) fs.entries.push_back(std::move(*s));
  return fs;
}

namespace {

template <class Term>
double average_fantasy(const FantasySet& fs, const Eigen::VectorXd& x, Term&& term) {
  if (fs.entries.empty()) throw std::invalid_argument("fantasy set is empty");
  double total = 0.0;
  for (const FantasyEntry& e : fs.entries) total += term(gamma_stats(output_marginals(e.conditioned, x), e.fstar));
  return total / static_cast<double>(fs.entries.size());
}

}  // namespace

double parallel_cmes_ibo(const FantasySet& fantasies, const Eigen::VectorXd& x) {
  return average_fantasy(fantasies, x, [](const GammaStats& g) { return cmes_ibo_term(g); });
}

double parallel_cmes(const FantasySet& fantasies, const Eigen::VectorXd& x) {
  return average_fantasy(fantasies, x, [](const GammaStats& g) { return cmes_term(g); });
}

double expected_improvement(double mu, double sd, double best) {
  const double s = std::max(sd, kSdFloor);
  const double u = (mu - best) / s;
  return std::max(s * (u * normal::cdf(u) + normal::pdf(u)), 0.0);
}

double feasibility_probability(const OutputMarginals& m) {
  double log_p = 0.0;
  for (std::size_t c = 0; c < m.num_constraints(); ++c) log_p += normal::log_sf((m.z[c] - m.mu_g[c]) / m.sd_g[c]);
  return std::exp(log_p);
}

double eic(const OutputMarginals& m, std::optional<double> best_feasible) {
  const double pf = feasibility_probability(m);
  if (!best_feasible) return pf;
  return expected_improvement(m.mu_f, m.sd_f, *best_feasible) * pf;
}

double eic(const ModelBundle& bundle, const Eigen::VectorXd& x, std::optional<double> best_feasible) {
  return eic(output_marginals(bundle, x), best_feasible);
}

Eigen::VectorXd tsc_select(const PathBundle& paths, const Box& domain, const SolverConfig& cfg, Rng& rng) {
  const PathMaxResult r = solve_constrained_path_max(paths, domain, cfg, rng);
  if (r.argmax) return *r.argmax;
  return minimize_total_violation(paths, domain, cfg, rng);
}

}  // namespace cmes
