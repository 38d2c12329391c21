#include "cmes/tmn_entropy.hpp"

#include "cmes/errors.hpp"
#include "cmes/normal.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmes {

namespace {

constexpr double kTailLogFloor = -690.7755278982137;  // log(1e-300)
constexpr double kWindow = 12.0;

}  // namespace

double entropy_lower_truncated(const TruncatedNormalSpec& spec) {
  if (!(spec.sigma > 0.0)) throw std::invalid_argument("truncated normal needs sigma > 0");
  const double g = (spec.lower_threshold - spec.mu) / spec.sigma;
  const double log_tail = normal::log_sf(g);
  if (!(log_tail >= kTailLogFloor))
    throw NumericalError("truncated normal tail underflows: mu=" + std::to_string(spec.mu) +
                         " sigma=" + std::to_string(spec.sigma) + " t=" + std::to_string(spec.lower_threshold));
  return normal::kLogSqrt2PiE + std::log(spec.sigma) + log_tail + 0.5 * normal::tail_ratio(g);
}

double gaussian_entropy(const OutputMarginals& m) {
  double h = normal::kLogSqrt2PiE + std::log(m.sd_f);
  for (double s : m.sd_g) h += normal::kLogSqrt2PiE + std::log(s);
  return h;
}

BoxEntropyForms tmn_entropy_box_forms(const OutputMarginals& m, MaxValueSample fstar) {
  BoxEntropyForms out;
  out.marginal_sum = entropy_lower_truncated({m.mu_f, m.sd_f, fstar.value()});
  for (std::size_t c = 0; c < m.num_constraints(); ++c)
    out.marginal_sum += entropy_lower_truncated({m.mu_g[c], m.sd_g[c], m.z[c]});

  const GammaStats g = gamma_stats(m, fstar);
  double log_z = normal::log_sf(g.gamma_f);
  double r = normal::tail_ratio(g.gamma_f);
  for (double gc : g.gamma_g) {
    log_z += normal::log_sf(gc);
    r += normal::tail_ratio(gc);
  }
  out.closed_form = gaussian_entropy(m) + log_z + 0.5 * r;
  return out;
}

double tmn_entropy_box(const OutputMarginals& m, MaxValueSample fstar) {
  return tmn_entropy_box_forms(m, fstar).marginal_sum;
}

double tmn_entropy_box(const ModelBundle& bundle, const Eigen::VectorXd& x, MaxValueSample fstar) {
  return tmn_entropy_box(output_marginals(bundle, x), fstar);
}

double complement_entropy(const OutputMarginals& m, MaxValueSample fstar) {
  const ZBarValue zb = z_bar(m, fstar);
  const double h = gaussian_entropy(m);
  const double z_log_z = zb.z > 0.0 ? zb.z * zb.log_z : 0.0;
  const double h_a = zb.z > 0.0 ? tmn_entropy_box(m, fstar) : 0.0;
  return h / zb.z_bar - zb.z * h_a / zb.z_bar + std::log(zb.z_bar) + z_log_z / zb.z_bar;
}

double complement_entropy_quadrature(const OutputMarginals& m, MaxValueSample fstar) {
  const std::size_t dims = m.num_constraints() + 1;
  if (dims > 3) throw std::invalid_argument("complement quadrature supports at most three outputs");
  std::vector<double> mu{m.mu_f}, sd{m.sd_f}, t{fstar.value()};
  for (std::size_t c = 0; c < m.num_constraints(); ++c) {
    mu.push_back(m.mu_g[c]);
    sd.push_back(m.sd_g[c]);
    t.push_back(m.z[c]);
  }
  const double log_zbar = std::log(z_bar(m, fstar).z_bar);

  // Per axis: the lower piece (below the threshold) and the upper piece, clipped to the window.
  struct Piece {
    double a, b;
    bool upper;
  };
  std::vector<std::vector<Piece>> pieces(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    const double lo = mu[j] - kWindow * sd[j], hi = mu[j] + kWindow * sd[j];
    const double cut = std::clamp(t[j], lo, hi);
    if (cut > lo) pieces[j].push_back({lo, cut, false});
    if (hi > cut) pieces[j].push_back({cut, hi, true});
  }

  using Gl = boost::math::quadrature::gauss<double, 64>;
  std::vector<double> h(dims);
  // -q log q with q = p / Zb, p the product of the marginal densities.
  auto integrand = [&]() {
    double log_p = 0.0;
    for (std::size_t j = 0; j < dims; ++j) log_p += normal::log_pdf((h[j] - mu[j]) / sd[j]) - std::log(sd[j]);
    const double log_q = log_p - log_zbar;
    return -std::exp(log_q) * log_q;
  };

  double total = 0.0;
  std::vector<std::size_t> choice(dims, 0);
  std::function<double(std::size_t)> nest = [&](std::size_t j) -> double {
    if (j == dims) return integrand();
    const Piece& p = pieces[j][choice[j]];
    return Gl::integrate(
        [&](double v) {
          h[j] = v;
          return nest(j + 1);
        },
        p.a, p.b);
  };
  std::function<void(std::size_t, bool)> cells = [&](std::size_t j, bool all_upper) {
    if (j == dims) {
      if (!all_upper) total += nest(0);
      return;
    }
    for (std::size_t k = 0; k < pieces[j].size(); ++k) {
      choice[j] = k;
      cells(j + 1, all_upper && pieces[j][k].upper);
    }
  };
  cells(0, true);
  return total;
}

IdentityCheck entropy_complement_identity_check(const OutputMarginals& m, MaxValueSample fstar) {
  return {complement_entropy_quadrature(m, fstar), complement_entropy(m, fstar)};
}

IdentityCheck entropy_complement_identity_check(const ModelBundle& bundle, const Eigen::VectorXd& x,
                                                MaxValueSample fstar) {
  return entropy_complement_identity_check(output_marginals(bundle, x), fstar);
}

}  // namespace cmes
