#pragma once

#include "cmes/acquisition.hpp"
#include "cmes/gp.hpp"
#include "cmes/max_value.hpp"

#include <Eigen/Dense>

namespace cmes {

// N(mu, sigma^2) restricted to X >= lower_threshold.
struct TruncatedNormalSpec {
  double mu = 0.0;
  double sigma = 1.0;
  double lower_threshold = 0.0;
};

// log(sqrt(2 pi e) sigma (1 - Phi(g))) + g phi(g) / (2 (1 - Phi(g))), g = (t - mu) / sigma.
// Throws NumericalError when the retained tail underflows.
double entropy_lower_truncated(const TruncatedNormalSpec& spec);

// Entropy of the independent Gaussian of all outputs at a point.
double gaussian_entropy(const OutputMarginals& m);

struct BoxEntropyForms {
  double marginal_sum = 0.0;  // sum of one-dimensional truncated entropies
  double closed_form = 0.0;   // H(h) + log Z + R / 2
};

BoxEntropyForms tmn_entropy_box_forms(const OutputMarginals& m, MaxValueSample fstar);
// Entropy of h conditioned on the box (f*, inf) x (z_1, inf) x ... x (z_C, inf).
double tmn_entropy_box(const OutputMarginals& m, MaxValueSample fstar);
double tmn_entropy_box(const ModelBundle& bundle, const Eigen::VectorXd& x, MaxValueSample fstar);

// Entropy of h conditioned on the complement of the box, via
// H_c = H / Zb - Z H_A / Zb + log Zb + Z log Z / Zb.
double complement_entropy(const OutputMarginals& m, MaxValueSample fstar);

// Direct tensor Gauss-Legendre integration of -q log q over the complement cells
// (q the renormalised density), each axis cut at its threshold within +-12 sd.
// Supports up to three outputs.
double complement_entropy_quadrature(const OutputMarginals& m, MaxValueSample fstar);

struct IdentityCheck {
  double lhs = 0.0;  // quadrature estimate
  double rhs = 0.0;  // identity
};

IdentityCheck entropy_complement_identity_check(const OutputMarginals& m, MaxValueSample fstar);
IdentityCheck entropy_complement_identity_check(const ModelBundle& bundle, const Eigen::VectorXd& x,
                                                MaxValueSample fstar);

}  // namespace cmes
