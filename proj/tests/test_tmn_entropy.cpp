#include "cmes/errors.hpp"
#include "cmes/tmn_entropy.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace cmes {
namespace {

const double kLogSqrt2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

TEST(TruncatedEntropy, ExampleValues) {
  EXPECT_NEAR(entropy_lower_truncated({0.0, 1.0, -std::numeric_limits<double>::infinity()}), 1.4189385, 1e-7);
  EXPECT_NEAR(entropy_lower_truncated({0.0, 1.0, 0.0}), 0.7257913, 1e-7);
  EXPECT_NEAR(entropy_lower_truncated({0.0, 1.0, 0.0}), kLogSqrt2PiE + std::log(0.5), 1e-15);
}

TEST(TruncatedEntropy, MatchesQuadrature) {
  const double mass = testing::upper_tail(1.0);
  EXPECT_NEAR(entropy_lower_truncated({0.0, 1.0, 1.0}), testing::truncated_entropy_quadrature(0.0, 1.0, 1.0, 16.0, mass),
              1e-8);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> mu(-2, 2), sd(0.05, 3), g(-3, 4);
  for (int t = 0; t < 50; ++t) {
    const double m = mu(rng), s = sd(rng), gamma = g(rng);
    const double lo = m + gamma * s;
    const double q = testing::truncated_entropy_quadrature(m, s, lo, m + std::max(gamma + 14.0, 14.0) * s,
                                                           testing::upper_tail(gamma));
    EXPECT_NEAR(entropy_lower_truncated({m, s, lo}), q, 1e-8) << "trial " << t;
  }
}

TEST(TruncatedEntropy, UnderflowingTailThrows) {
  EXPECT_THROW(entropy_lower_truncated({0.0, 1.0, 60.0}), NumericalError);
}

OutputMarginals marginals(double mu_f, double sd_f, std::vector<std::array<double, 3>> g) {
  OutputMarginals m;
  m.mu_f = mu_f;
  m.sd_f = sd_f;
  for (auto [mu, sd, z] : g) {
    m.mu_g.push_back(mu);
    m.sd_g.push_back(sd);
    m.z.push_back(z);
  }
  return m;
}

TEST(BoxEntropy, NoConstraintsReducesToOneDimension) {
  const OutputMarginals m = marginals(0.4, 1.3, {});
  EXPECT_NEAR(tmn_entropy_box(m, MaxValueSample::finite(0.9)), entropy_lower_truncated({0.4, 1.3, 0.9}), 1e-14);
}

TEST(BoxEntropy, AdditiveAtZeroGammas) {
  const OutputMarginals m = marginals(0.0, 2.0, {{1.0, 0.5, 1.0}});
  const double expected = 2.0 * 0.72579135264472743 + std::log(2.0) + std::log(0.5);
  const BoxEntropyForms f = tmn_entropy_box_forms(m, MaxValueSample::finite(0.0));
  EXPECT_NEAR(f.marginal_sum, expected, 1e-12);
  EXPECT_NEAR(f.closed_form, expected, 1e-12);
}

TEST(BoxEntropy, MatchesProductQuadrature) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> g(-2.5, 2.5);
  for (int t = 0; t < 10; ++t) {
    OutputMarginals m = testing::random_marginals(rng, 1);
    const double fstar = m.mu_f + g(rng) * m.sd_f;
    const double gf = (fstar - m.mu_f) / m.sd_f, gg = (m.z[0] - m.mu_g[0]) / m.sd_g[0];
    const double mass = testing::upper_tail(gf) * testing::upper_tail(gg);
    auto outer = [&](double u) {
      const double pu = testing::phi((u - m.mu_f) / m.sd_f) / m.sd_f;
      auto inner = [&](double v) {
        const double p = pu * testing::phi((v - m.mu_g[0]) / m.sd_g[0]) / m.sd_g[0] / mass;
        return p > 0.0 ? -p * std::log(p) : 0.0;
      };
      return GK::integrate(inner, m.z[0], m.z[0] + (std::max(gg, 0.0) + 14.0) * m.sd_g[0], 12, 1e-13);
    };
    const double q = GK::integrate(outer, fstar, fstar + (std::max(gf, 0.0) + 14.0) * m.sd_f, 12, 1e-13);
    EXPECT_NEAR(tmn_entropy_box(m, MaxValueSample::finite(fstar)), q, 1e-6) << "trial " << t;
  }
}

TEST(ComplementEntropy, IdentityAgainstQuadratureAtZeroGammas) {
  const OutputMarginals m = marginals(0.0, 1.0, {{0.0, 1.0, 0.0}});
  const double q = testing::complement_entropy_2d(0.0, 1.0, 0.0, 0.0, 1.0, 0.0);
  EXPECT_NEAR(complement_entropy(m, MaxValueSample::finite(0.0)), q, 1e-5);
  const IdentityCheck c = entropy_complement_identity_check(m, MaxValueSample::finite(0.0));
  EXPECT_NEAR(c.lhs, c.rhs, 1e-5);
}

TEST(ComplementEntropy, VanishingBoxLeavesGaussianEntropy) {
  const OutputMarginals m = marginals(0.3, 0.7, {{-0.2, 1.4, 0.1}});
  EXPECT_NEAR(complement_entropy(m, MaxValueSample::finite(0.3 + 40 * 0.7)), gaussian_entropy(m), 1e-12);
  EXPECT_NEAR(gaussian_entropy(m), 2 * kLogSqrt2PiE + std::log(0.7 * 1.4), 1e-14);
}

TEST(ComplementEntropy, RandomStatesAgreeWithQuadrature) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> g(-2.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const int C = 1 + t % 2;
    const OutputMarginals m = testing::random_marginals(rng, C);
    const MaxValueSample fstar = MaxValueSample::finite(m.mu_f + g(rng) * m.sd_f);
    const IdentityCheck c = entropy_complement_identity_check(m, fstar);
    EXPECT_NEAR(c.lhs, c.rhs, 1e-4) << "trial " << t << " C=" << C;
    if (C == 1) {
      const double q = testing::complement_entropy_2d(m.mu_f, m.sd_f, fstar.value(), m.mu_g[0], m.sd_g[0], m.z[0]);
      EXPECT_NEAR(c.rhs, q, 1e-5) << "trial " << t;
    }
  }
}

}  // namespace
}  // namespace cmes
