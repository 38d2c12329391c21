#include "cmes/validation.hpp"

#include "cmes/normal.hpp"
#include "cmes/rng.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cmes {

namespace {

constexpr double kToyLengthscale = 0.08;
constexpr double kToyBumpWidth = 0.06;
constexpr double kDensityFloor = 1e-300;

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

ToyState make_toy_state(int C) {
  if (C < 0) throw std::invalid_argument("toy state needs C >= 0");
  const Eigen::MatrixXd grid = Eigen::VectorXd::LinSpaced(kToyGridSize, 0.0, 1.0);
  const Eigen::Index c = 99;
  std::vector<Eigen::Index> idx;
  for (int k = 95; k >= 30; k -= 5)
    if (c - k >= 0) idx.push_back(c - k);
  for (int k = 30; k <= 95; k += 5)
    if (c + k <= kToyGridSize - 2) idx.push_back(c + k);
  Eigen::MatrixXd x(idx.size(), 1);
  Eigen::VectorXd y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    x(i, 0) = grid(idx[i], 0);
    const double u = (x(i, 0) - grid(c, 0)) / kToyBumpWidth;
    y(i) = -2.0 + 2.0 * std::exp(-0.5 * u * u);
  }
  const KernelSpec k = KernelSpec::rbf(1, kToyLengthscale, 1.0);
  const GpModel model(k, x, y, kDefaultNoiseVar, Standardizer::identity());

  double z = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    const PosteriorGaussian p = model.posterior(grid.row(i).transpose());
    z = std::max(z, p.mean + kToyGamma * std::max(std::sqrt(p.var), kSdFloor));
  }
  return ToyState{ModelBundle{model, std::vector<GpModel>(C, model), std::vector<double>(C, z)}, grid, c};
}

BinnedKde::BinnedKde(const std::vector<double>& samples, int bins) {
  if (samples.size() < 2) throw std::invalid_argument("density estimate needs at least two samples");
  if (bins < 8) throw std::invalid_argument("density estimate needs at least 8 bins");
  n_ = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n_;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n_ - 1.0));
  if (!(sd > 0.0)) throw std::invalid_argument("density estimate needs non-constant samples");
  h_ = 1.06 * sd * std::pow(n_, -0.2);
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  lo_ = *mn - 5.0 * h_;
  const double hi = *mx + 5.0 * h_;
  width_ = (hi - lo_) / (bins - 1);

  std::vector<double> counts(bins, 0.0);
  for (double s : samples) {
    const double u = (s - lo_) / width_;
    const int b = std::clamp(static_cast<int>(std::floor(u)), 0, bins - 2);
    const double frac = u - b;
    counts[b] += 1.0 - frac;
    counts[b + 1] += frac;
  }
  const int reach = static_cast<int>(std::ceil(5.0 * h_ / width_));
  std::vector<double> kern(reach + 1);
  for (int k = 0; k <= reach; ++k) kern[k] = normal::pdf(k * width_ / h_);
  weights_.assign(bins, 0.0);
  for (int b = 0; b < bins; ++b) {
    if (counts[b] == 0.0) continue;
    const int lo = std::max(0, b - reach), hi_b = std::min(bins - 1, b + reach);
    for (int t = lo; t <= hi_b; ++t) weights_[t] += counts[b] * kern[std::abs(t - b)];
  }
  for (double& w : weights_) w /= n_ * h_;
}

double BinnedKde::log_density(double t) const {
  const double u = (t - lo_) / width_;
  const int last = static_cast<int>(weights_.size()) - 1;
  double d = 0.0;
  if (u >= 0.0 && u <= last) {
    const int b = std::min(static_cast<int>(std::floor(u)), last - 1);
    const double frac = u - b;
    d = (1.0 - frac) * weights_[b] + frac * weights_[b + 1];
  }
  return std::log(std::max(d, kDensityFloor));
}

namespace {

struct Pool {
  // Per function: active-point values (a x n_inner) and values at every grid point (m x n_inner).
  std::vector<Eigen::MatrixXd> active;
  std::vector<Eigen::MatrixXd> full;
};

// Largest objective value over active points whose constraints all clear their thresholds,
// after shifting sample s of every function j by delta[j] * kappa[j].
double conditioned_max(const Pool& pool, const std::vector<Eigen::VectorXd>& kappa, const std::vector<double>& z,
                       Eigen::Index s, const double* delta) {
  const Eigen::Index a = pool.active[0].rows();
  const double* f = pool.active[0].col(s).data();
  const double* kf = kappa[0].data();
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < a; ++k) {
    const double v = f[k] + delta[0] * kf[k];
    if (v <= best) continue;
    bool ok = true;
    for (std::size_t c = 0; c < z.size() && ok; ++c)
      ok = pool.active[c + 1](k, s) + delta[c + 1] * kappa[c + 1](k) >= z[c];
    if (ok) best = v;
  }
  return best;
}

double bernoulli_kl(double p1, double p0) {
  double t = 0.0;
  if (p1 > 0.0) t += p1 * std::log(p1 / p0);
  if (p1 < 1.0) t += (1.0 - p1) * std::log((1.0 - p1) / (1.0 - p0));
  return t;
}

}  // namespace

KdeMiEstimate kde_mi_oracle(const ModelBundle& bundle, const Eigen::MatrixXd& grid, const KdeMiConfig& cfg) {
  if (cfg.n_outer < 1 || cfg.n_inner < 2) throw std::invalid_argument("KDE-MI needs n_outer >= 1 and n_inner >= 2");
  const Eigen::Index m = grid.rows();
  const std::size_t nf = bundle.num_constraints() + 1;
  const int n_in = cfg.n_inner, n_out = cfg.n_outer;

  std::vector<Eigen::VectorXd> mean(nf);
  std::vector<Eigen::MatrixXd> cov(nf);
  for (std::size_t j = 0; j < nf; ++j) std::tie(mean[j], cov[j]) = bundle.model(j).joint_posterior(grid);

  std::vector<Eigen::Index> act;
  for (Eigen::Index i = 0; i < m; ++i) {
    bool keep = true;
    for (std::size_t c = 0; c < bundle.num_constraints() && keep; ++c) {
      const double sd = std::max(std::sqrt(cov[c + 1](i, i)), kSdFloor);
      keep = normal::log_sf((bundle.thresholds[c] - mean[c + 1](i)) / sd) > cfg.active_log_prob;
    }
    if (keep) act.push_back(i);
  }

  KdeMiEstimate est;
  est.n_outer = n_out;
  est.n_inner = n_in;
  est.mi = Eigen::VectorXd::Zero(m);
  est.raw = Eigen::VectorXd::Zero(m);
  est.bandwidth = Eigen::VectorXd::Zero(m);
  est.diagnostics.push_back("active points: " + std::to_string(act.size()) + " of " + std::to_string(m));
  if (act.empty()) {
    est.diagnostics.push_back("no grid point can be feasible; f* is -inf with certainty");
    return est;
  }

  const JointGridSampler sampler(bundle, grid);
  Pool pool;
  for (std::size_t j = 0; j < nf; ++j) {
    Rng rng = substream(cfg.seed, {tag(Stream::Validation), 1, j});
    Eigen::MatrixXd full = sampler.factor(j) * standard_normal_matrix(rng, m, n_in);
    full.colwise() += sampler.mean(j);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(act.size()), n_in);
    for (std::size_t k = 0; k < act.size(); ++k) a.row(k) = full.row(act[k]);
    pool.active.push_back(std::move(a));
    pool.full.push_back(std::move(full));
  }
  Rng outer_rng = substream(cfg.seed, {tag(Stream::Validation), 2});
  const Eigen::MatrixXd outer = standard_normal_matrix(outer_rng, n_out, static_cast<Eigen::Index>(nf));

  // Reference distribution of f*.
  const std::vector<Eigen::VectorXd> zero_kappa(nf, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(act.size())));
  const std::vector<double> zero_delta(nf, 0.0);
  std::vector<double> ref_finite;
  for (int s = 0; s < n_in; ++s) {
    const double v = conditioned_max(pool, zero_kappa, bundle.thresholds, s, zero_delta.data());
    if (v > -std::numeric_limits<double>::infinity()) ref_finite.push_back(v);
  }
  const double p0_raw = static_cast<double>(ref_finite.size()) / n_in;
  est.reference_feasible_fraction = p0_raw;
  const double p0 = std::clamp(p0_raw, 0.5 / n_in, 1.0 - 0.5 / n_in);
  std::optional<BinnedKde> ref_kde;
  if (ref_finite.size() >= 2) {
    try {
      ref_kde.emplace(ref_finite, cfg.bins);
      est.reference_bandwidth = ref_kde->bandwidth();
    } catch (const std::invalid_argument&) {
      est.diagnostics.push_back("reference max values are constant; continuous part skipped");
    }
  }

  std::vector<int> empty(m, 0);
  parallel_for(cfg.exec, m, [&](std::int64_t xi) {
    std::vector<Eigen::VectorXd> kappa(nf);
    std::vector<double> sd_x(nf);
    for (std::size_t j = 0; j < nf; ++j) {
      const double vxx = cov[j](xi, xi);
      sd_x[j] = std::sqrt(std::max(vxx, 0.0));
      kappa[j].resize(static_cast<Eigen::Index>(act.size()));
      for (std::size_t k = 0; k < act.size(); ++k) kappa[j](k) = vxx > 0.0 ? cov[j](act[k], xi) / vxx : 0.0;
    }
    double total = 0.0, bw_sum = 0.0;
    int bw_count = 0;
    std::vector<double> finite;
    finite.reserve(n_in);
    std::vector<double> delta(nf);
    for (int o = 0; o < n_out; ++o) {
      finite.clear();
      for (int s = 0; s < n_in; ++s) {
        for (std::size_t j = 0; j < nf; ++j)
          delta[j] = mean[j](xi) + sd_x[j] * outer(o, static_cast<Eigen::Index>(j)) - pool.full[j](xi, s);
        const double v = conditioned_max(pool, kappa, bundle.thresholds, s, delta.data());
        if (v > -std::numeric_limits<double>::infinity()) finite.push_back(v);
      }
      const double p1 = static_cast<double>(finite.size()) / n_in;
      double term = bernoulli_kl(p1, p0);
      bool continuous = false;
      if (finite.size() >= 2 && ref_kde) {
        try {
          const BinnedKde kde(finite, cfg.bins);
          double mu = 0.0;
          for (double v : finite) mu += v;
          mu /= finite.size();
          double ss = 0.0;
          for (double v : finite) ss += (v - mu) * (v - mu);
          const double sd = std::sqrt(ss / (finite.size() - 1.0));
          const double kl = boost::math::quadrature::gauss<double, 64>::integrate(
              [&](double t) {
                const double lp = kde.log_density(t);
                return std::exp(lp) * (lp - ref_kde->log_density(t));
              },
              mu - 6.0 * sd, mu + 6.0 * sd);
          term += p1 * kl;
          bw_sum += kde.bandwidth();
          ++bw_count;
          continuous = true;
        } catch (const std::invalid_argument&) {
        }
      }
      if (!continuous && p1 > 0.0) ++empty[xi];
      total += term;
    }
    est.raw(xi) = total / n_out;
    est.mi(xi) = std::max(est.raw(xi), 0.0);
    est.bandwidth(xi) = bw_count > 0 ? bw_sum / bw_count : 0.0;
  });
  for (int e : empty) est.empty_continuous += e;
  if (est.empty_continuous > 0)
    est.diagnostics.push_back(std::to_string(est.empty_continuous) +
                              " outer draws had too few distinct finite max values; continuous part set to 0");
  return est;
}

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("correlation needs equal-length vectors");
  const Eigen::ArrayXd da = a.array() - a.mean(), db = b.array() - b.mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  return denom > 0.0 ? (da * db).sum() / denom : 0.0;
}

NegativityReport demo_negativity(const std::vector<int>& C_values, const NegativityConfig& cfg) {
  NegativityReport rep;
  for (int C : C_values) {
    if (C < 4 || C > 7) throw std::invalid_argument("demo_negativity supports C in {4, 5, 6, 7}");
    const ToyState toy = make_toy_state(C);
    const SampleSet samples = sample_max_values_finite_domain(
        toy.bundle, cfg.K, toy.grid, derive_seed(cfg.seed, {tag(Stream::Validation), static_cast<std::uint64_t>(C)}),
        cfg.exec);
    const std::vector<MaxValueSample> values = samples.values();
    NegativityCurve cv;
    cv.C = C;
    cv.cmes.resize(kToyGridSize);
    cv.cmes_ibo.resize(kToyGridSize);
    for (Eigen::Index i = 0; i < kToyGridSize; ++i) {
      const OutputMarginals m = output_marginals(toy.bundle, toy.grid.row(i).transpose());
      cv.cmes(i) = cmes(m, values);
      cv.cmes_ibo(i) = cmes_ibo(m, values);
    }
    cv.min_cmes = cv.cmes.minCoeff();
    cv.min_ibo = cv.cmes_ibo.minCoeff();
    cv.cmes_ibo.maxCoeff(&cv.argmax_ibo);

    std::ostringstream line;
    line << "C=" << C << " min CMES " << fmt(cv.min_cmes) << " min CMES-IBO " << fmt(cv.min_ibo)
         << " argmax CMES-IBO " << cv.argmax_ibo;
    bool ok = cv.min_ibo >= 0.0;
    if (C >= 6) ok = ok && cv.min_cmes < 0.0;
    if (C == 4) ok = ok && cv.min_cmes >= 0.0;
    if (cfg.with_kde) {
      KdeMiConfig kc = cfg.kde;
      kc.seed = derive_seed(cfg.kde.seed, {static_cast<std::uint64_t>(C)});
      const KdeMiEstimate kde = kde_mi_oracle(toy.bundle, toy.grid, kc);
      cv.kde_mi = kde.mi;
      cv.kde_mi.maxCoeff(&cv.argmax_kde);
      cv.correlation = pearson_correlation(cv.kde_mi, cv.cmes_ibo);
      line << " argmax KDE-MI " << cv.argmax_kde << " corr " << fmt(cv.correlation, 4);
      ok = ok && cv.argmax_kde == cv.argmax_ibo;
    }
    line << (ok ? " ok" : " FAILED");
    rep.pass = rep.pass && ok;
    rep.lines.push_back(line.str());
    rep.curves.push_back(std::move(cv));
  }
  return rep;
}

void write_negativity_csv(const NegativityCurve& curve, const Eigen::MatrixXd& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "index,x,cmes,cmes_ibo,kde_mi\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    out << i << ',' << grid(i, 0) << ',' << curve.cmes(i) << ',' << curve.cmes_ibo(i) << ',';
    if (curve.kde_mi.size() == grid.rows()) out << curve.kde_mi(i);
    out << '\n';
  }
}

std::vector<MaxValueSample> draw_grid_max_values(const JointGridSampler& sampler, int n, std::uint64_t seed,
                                                 Exec exec) {
  constexpr int kBlock = 1000;
  const int blocks = (n + kBlock - 1) / kBlock;
  std::vector<MaxValueSample> out(n, MaxValueSample::negative_infinity());
  const Eigen::Index m = sampler.grid_size();
  parallel_for(exec, blocks, [&](std::int64_t b) {
    const int start = static_cast<int>(b) * kBlock;
    const int count = std::min(kBlock, n - start);
    Rng rng = substream(seed, {tag(Stream::Validation), 3, static_cast<std::uint64_t>(b)});
    std::vector<Eigen::MatrixXd> vals;
    for (std::size_t j = 0; j < sampler.num_functions(); ++j) {
      Eigen::MatrixXd v = sampler.factor(j) * standard_normal_matrix(rng, m, count);
      v.colwise() += sampler.mean(j);
      vals.push_back(std::move(v));
    }
    for (int s = 0; s < count; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        if (vals[0](i, s) <= best) continue;
        bool ok = true;
        for (std::size_t c = 0; c < sampler.thresholds().size() && ok; ++c)
          ok = vals[c + 1](i, s) >= sampler.thresholds()[c] - kFeasibilityTolerance;
        if (ok) best = vals[0](i, s);
      }
      if (best > -std::numeric_limits<double>::infinity()) out[start + s] = MaxValueSample::finite(best);
    }
  });
  return out;
}

TheoremReport check_theorem_bounds(const ModelBundle& bundle, const Eigen::MatrixXd& sample_grid,
                                   const Eigen::MatrixXd& x_list, const TheoremConfig& cfg) {
  if (cfg.n_samples < 2 || cfg.n_replicates < 1) throw std::invalid_argument("theorem check needs samples");
  // Test points missing from the grid join it, so each draw is a maximum over a set containing x.
  std::vector<Eigen::Index> extra;
  for (Eigen::Index p = 0; p < x_list.rows(); ++p) {
    bool present = false;
    for (Eigen::Index i = 0; i < sample_grid.rows() && !present; ++i) present = sample_grid.row(i) == x_list.row(p);
    for (Eigen::Index e : extra) present = present || x_list.row(e) == x_list.row(p);
    if (!present) extra.push_back(p);
  }
  Eigen::MatrixXd grid(sample_grid.rows() + static_cast<Eigen::Index>(extra.size()), sample_grid.cols());
  grid.topRows(sample_grid.rows()) = sample_grid;
  for (std::size_t e = 0; e < extra.size(); ++e) grid.row(sample_grid.rows() + static_cast<Eigen::Index>(e)) = x_list.row(extra[e]);
  const JointGridSampler sampler(bundle, grid);
  const std::vector<MaxValueSample> draws = draw_grid_max_values(sampler, cfg.n_samples, cfg.seed);
  TheoremReport rep;
  for (Eigen::Index p = 0; p < x_list.rows(); ++p) {
    TheoremPointResult r;
    r.x = x_list.row(p).transpose();
    const OutputMarginals m = output_marginals(bundle, r.x);
    Eigen::VectorXd terms(cfg.n_samples);
    int infeasible = 0;
    for (int i = 0; i < cfg.n_samples; ++i) {
      terms(i) = cmes_ibo_term(gamma_stats(m, draws[i]));
      infeasible += draws[i].is_finite() ? 0 : 1;
    }
    r.infeasible_fraction = static_cast<double>(infeasible) / cfg.n_samples;
    r.mean = terms.mean();
    r.variance = (terms.array() - r.mean).square().sum() / (cfg.n_samples - 1);
    if (!(r.variance <= cfg.variance_bound)) {
      rep.variance_ok = false;
      rep.violations.push_back("variance " + fmt(r.variance) + " > " + fmt(cfg.variance_bound) + " at point " +
                               std::to_string(p));
    }
    for (std::size_t k = 0; k < cfg.K_values.size(); ++k) {
      const int K = cfg.K_values[k];
      Rng rng = substream(cfg.seed, {tag(Stream::Validation), 4, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(K)});
      std::uniform_int_distribution<int> pick(0, cfg.n_samples - 1);
      std::vector<double> alpha(cfg.n_replicates);
      for (int rep_i = 0; rep_i < cfg.n_replicates; ++rep_i) {
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += terms(pick(rng));
        alpha[rep_i] = s / K;
      }
      std::vector<double> tails, bounds;
      for (double xi : cfg.xi_values) {
        int hits = 0;
        for (double a : alpha) hits += std::abs(a - r.mean) >= xi ? 1 : 0;
        const double tail = static_cast<double>(hits) / cfg.n_replicates;
        const double se = std::sqrt(tail * (1.0 - tail) / cfg.n_replicates);
        const double bound = 2.0 / (K * xi * xi) + 3.0 * se;
        tails.push_back(tail);
        bounds.push_back(bound);
        if (tail > bound) {
          rep.concentration_ok = false;
          rep.violations.push_back("tail " + fmt(tail) + " > " + fmt(bound) + " at point " + std::to_string(p) +
                                   ", K=" + std::to_string(K) + ", xi=" + fmt(xi));
        }
      }
      r.tail.push_back(tails);
      r.bound.push_back(bounds);
    }
    rep.points.push_back(std::move(r));
  }
  return rep;
}

AGammaReport check_a_gamma() {
  AGammaReport r;
  r.a_zero = normal::tail_ratio(0.0);
  r.a_minus_084 = normal::tail_ratio(-0.84);
  r.a_minus_30 = normal::tail_ratio(-30.0);
  r.pass = r.a_zero == 0.0 && r.a_minus_084 < -0.29 && std::abs(r.a_minus_30) < 1e-6;
  return r;
}

}  // namespace cmes
