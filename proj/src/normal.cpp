#include "cmes/normal.hpp"

#include <cmath>
#include <limits>

namespace cmes::normal {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
// Beyond this point erfc underflows into subnormals; switch to the asymptotic series.
constexpr double kAsymptoticStart = 35.0;

double log_sf_asymptotic(double x) {
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return log_pdf(x) - std::log(x) + std::log(series);
}

}  // namespace

double pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double log_sf(double x) {
  if (std::isnan(x)) return x;
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  if (x == std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  if (x > kAsymptoticStart) return log_sf_asymptotic(x);
  if (x < -5.0) return std::log1p(-0.5 * std::erfc(-x * kInvSqrt2));
  return std::log(0.5 * std::erfc(x * kInvSqrt2));
}

double log_cdf(double x) { return log_sf(-x); }

double hazard(double x) {
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  if (x == std::numeric_limits<double>::infinity()) return x;
  return std::exp(log_pdf(x) - log_sf(x));
}

double tail_ratio(double gamma) {
  if (gamma == -std::numeric_limits<double>::infinity()) return 0.0;
  if (gamma == std::numeric_limits<double>::infinity()) return gamma;
  return gamma * hazard(gamma);
}

}  // namespace cmes::normal
