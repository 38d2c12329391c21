#pragma once

// Standard normal density, distribution and tail functions that stay accurate
// far into both tails.

namespace cmes::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kLogSqrt2PiE = 1.41893853320467274178;

double pdf(double x);
double log_pdf(double x);
double cdf(double x);
// Upper tail 1 - Phi(x).
double sf(double x);
// log(1 - Phi(x)); exact limits at +-infinity.
double log_sf(double x);
double log_cdf(double x);

// phi(x) / (1 - Phi(x)), the hazard of the standard normal.
double hazard(double x);

// a(g) = g * phi(g) / (1 - Phi(g)). Tends to 0 as g -> -inf and to +inf as g -> +inf.
double tail_ratio(double gamma);

}  // namespace cmes::normal
