#include "cmes/acquisition.hpp"
#include "cmes/normal.hpp"
#include "cmes/tmn_entropy.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>

namespace cmes {
namespace {

const MaxValueSample kNegInf = MaxValueSample::negative_infinity();

// Marginals whose gammas equal the given values (unit sds, thresholds at zero).
OutputMarginals with_gammas(double gamma_f_mean_offset, std::vector<double> gamma_g) {
  OutputMarginals m;
  m.mu_f = -gamma_f_mean_offset;
  m.sd_f = 1.0;
  for (double g : gamma_g) {
    m.mu_g.push_back(-g);
    m.sd_g.push_back(1.0);
    m.z.push_back(0.0);
  }
  return m;
}

TEST(ZBar, ExampleValues) {
  const OutputMarginals one = with_gammas(0.0, {0.0});
  ZBarValue v = z_bar(one, MaxValueSample::finite(0.0));
  EXPECT_DOUBLE_EQ(v.z, 0.25);
  EXPECT_DOUBLE_EQ(v.z_bar, 0.75);
  v = z_bar(one, kNegInf);
  EXPECT_DOUBLE_EQ(v.z, 0.5);
  EXPECT_DOUBLE_EQ(v.z_bar, 0.5);
  v = z_bar(with_gammas(0.0, {0.0, 0.0, 0.0}), MaxValueSample::finite(0.0));
  EXPECT_DOUBLE_EQ(v.z, 0.0625);
  EXPECT_DOUBLE_EQ(v.z_bar, 0.9375);
}

TEST(ZBar, FloorAppliesWhenEverythingIsCertain) {
  const OutputMarginals m = with_gammas(0.0, {-50.0});
  const ZBarValue v = z_bar(m, kNegInf);
  EXPECT_TRUE(v.floored);
  EXPECT_EQ(v.z_bar, kZBarFloor);
}

TEST(CmesIbo, ExampleValues) {
  const OutputMarginals m = with_gammas(0.0, {0.0});
  const std::array<MaxValueSample, 1> finite{MaxValueSample::finite(0.0)};
  const std::array<MaxValueSample, 1> inf{kNegInf};
  const std::array<MaxValueSample, 2> both{MaxValueSample::finite(0.0), kNegInf};
  EXPECT_NEAR(cmes_ibo(m, finite), -std::log(0.75), 1e-15);
  EXPECT_NEAR(cmes_ibo(m, inf), std::log(2.0), 1e-15);
  EXPECT_NEAR(cmes_ibo(m, both), 0.5 * (std::log(2.0) - std::log(0.75)), 1e-15);
  EXPECT_NEAR(cmes_ibo(m, finite), 0.287682, 1e-6);
  EXPECT_NEAR(cmes_ibo(m, both), 0.490415, 1e-6);
}

TEST(PiLowerBound, ExampleValues) {
  const std::array<MaxValueSample, 1> finite{MaxValueSample::finite(0.0)};
  EXPECT_DOUBLE_EQ(pi_lower_bound(with_gammas(0.0, {0.0}), finite), 0.25);
  EXPECT_EQ(pi_lower_bound(with_gammas(0.0, {1e3}), finite), 0.0);
}

TEST(CmesIbo, DominatesProbabilityBoundOnRandomStates) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> c_dist(1, 10), k_dist(1, 5);
  std::uniform_real_distribution<double> u(-4.0, 6.0), coin(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const OutputMarginals m = testing::random_marginals(rng, c_dist(rng));
    std::vector<MaxValueSample> s;
    for (int k = k_dist(rng); k > 0; --k)
      s.push_back(coin(rng) < 0.2 ? kNegInf : MaxValueSample::finite(m.mu_f + u(rng) * m.sd_f));
    const double ibo = cmes_ibo(m, s), pi = pi_lower_bound(m, s);
    ASSERT_GE(ibo - pi, -1e-12) << "trial " << t;
    ASSERT_GE(pi, 0.0);
  }
}

TEST(Cmes, ExampleValues) {
  const std::array<MaxValueSample, 1> finite{MaxValueSample::finite(0.0)};
  EXPECT_NEAR(cmes(with_gammas(0.0, {0.0}), finite), -std::log(0.75), 1e-15);
  const std::array<MaxValueSample, 1> at{MaxValueSample::finite(-0.84)};
  EXPECT_LT(cmes(with_gammas(0.0, std::vector<double>(6, -0.84)), at), 0.0);
}

TEST(Cmes, InfeasibleSampleDropsObjectiveTerm) {
  const OutputMarginals m = with_gammas(0.0, {0.3, -0.7});
  GammaStats g = gamma_stats(m, kNegInf);
  EXPECT_EQ(g.gamma_f, -std::numeric_limits<double>::infinity());
  const ZBarValue zb = z_bar(g);
  const double r = normal::tail_ratio(0.3) + normal::tail_ratio(-0.7);
  EXPECT_NEAR(cmes_term(g), zb.z / (2.0 * zb.z_bar) * r - std::log(zb.z_bar), 1e-14);
}

TEST(Cmes, MatchesEntropyDifferenceByQuadrature) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> gam(-2.0, 2.0);
  for (int t = 0; t < 10; ++t) {
    OutputMarginals m = testing::random_marginals(rng, 1);
    const double fstar = m.mu_f + gam(rng) * m.sd_f;
    const double h = std::log(2.0 * std::numbers::pi * std::numbers::e * m.sd_f * m.sd_g[0]);
    const double hc = testing::complement_entropy_2d(m.mu_f, m.sd_f, fstar, m.mu_g[0], m.sd_g[0], m.z[0]);
    const std::array<MaxValueSample, 1> s{MaxValueSample::finite(fstar)};
    EXPECT_NEAR(cmes(m, s), h - hc, 1e-6) << "trial " << t;
  }
}

ModelBundle small_bundle() {
  Eigen::MatrixXd x(4, 1);
  x << 0.1, 0.35, 0.6, 0.9;
  const KernelSpec k = KernelSpec::rbf(1, 0.15);
  return ModelBundle{GpModel(k, x, Eigen::Vector4d(0.2, 1.0, -0.4, 0.3)),
                     {GpModel(k, x, Eigen::Vector4d(0.5, -0.2, 0.8, -0.6))},
                     {0.0}};
}

TEST(ParallelAcquisition, EmptyPrefixEqualsSequential) {
  const ModelBundle b = small_bundle();
  const SampleSet s = sample_max_values(b, 8, Box::unit(1), SamplerConfig{}, 23);
  const FantasySet fs = build_fantasy_set(b, s, Eigen::MatrixXd(0, 1));
  for (double q = 0.0; q <= 1.0; q += 0.05) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, q);
    EXPECT_EQ(parallel_cmes_ibo(fs, x), cmes_ibo(b, x, s));
    EXPECT_EQ(parallel_cmes(fs, x), cmes(b, x, s));
  }
}

TEST(ParallelAcquisition, DistantFantasyBarelyMatters) {
  Eigen::MatrixXd x(3, 1);
  x << 0.1, 0.2, 0.3;
  const KernelSpec k = KernelSpec::rbf(1, 0.05);
  const ModelBundle b{GpModel(k, x, Eigen::Vector3d(0.1, 0.5, 0.2)), {GpModel(k, x, Eigen::Vector3d(0.3, -0.2, 0.4))},
                      {0.0}};
  const SampleSet s = sample_max_values(b, 6, Box::unit(1), SamplerConfig{}, 24);
  const FantasySet fs = build_fantasy_set(b, s, Eigen::MatrixXd::Constant(1, 1, 0.95));
  for (double q : {0.05, 0.15, 0.25, 0.4}) {
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, q);
    EXPECT_NEAR(parallel_cmes_ibo(fs, v), cmes_ibo(b, v, s), 1e-6) << "at " << q;
  }
}

TEST(ParallelAcquisition, FantasyAtQueryExhaustsInformation) {
  const ModelBundle b = small_bundle();
  const SampleSet s = sample_max_values(b, 6, Box::unit(1), SamplerConfig{}, 25);
  int checked = 0;
  for (double q = 0.02; q < 1.0; q += 0.07) {
    bool near_argmax = false;
    for (const SampleEntry& e : s.entries) near_argmax = near_argmax || (e.argmax && std::abs((*e.argmax)(0) - q) < 1e-3);
    if (near_argmax) continue;
    const Eigen::MatrixXd xq = Eigen::MatrixXd::Constant(1, 1, q);
    const FantasySet fs = build_fantasy_set(b, s, xq);
    EXPECT_LT(parallel_cmes_ibo(fs, xq.row(0).transpose()), 1e-3) << "at " << q;
    EXPECT_GE(cmes_ibo(b, xq.row(0).transpose(), s), parallel_cmes_ibo(fs, xq.row(0).transpose()) - 1e-12);
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Eic, ExampleValues) {
  OutputMarginals m = with_gammas(0.0, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(eic(m, std::nullopt), 0.25);
  m.mu_f = 1.3;
  EXPECT_NEAR(eic(m, 1.3), testing::phi(0.0) * 0.25, 1e-15);
  EXPECT_NEAR(expected_improvement(0.0, 1.0, 0.0), 0.3989423, 1e-7);
}

TEST(Eic, ExpectedImprovementMatchesMonteCarlo) {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> n01;
  for (auto [mu, sd, best] : {std::array<double, 3>{0.3, 1.2, 0.5}, {-1.0, 0.4, -0.7}, {2.0, 0.1, 1.0}}) {
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) acc += std::max(mu + sd * n01(rng) - best, 0.0);
    EXPECT_NEAR(expected_improvement(mu, sd, best), acc / n, 1e-3);
  }
}

PathBundle prior_bundle(std::uint64_t seed, int C, double threshold) {
  const KernelSpec k = KernelSpec::rbf(1, 0.2);
  const ModelBundle b{GpModel::prior(k), std::vector<GpModel>(C, GpModel::prior(k)), std::vector<double>(C, threshold)};
  Rng rng(seed);
  return draw_path_bundle(build_path_model(b, 500, seed), rng);
}

TEST(Tsc, InactiveConstraintsGiveUnconstrainedArgmax) {
  const PathBundle p = prior_bundle(27, 1, -100.0);
  double best = -1e300, arg = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double x = i / 4000.0, v = p.objective.eval(Eigen::VectorXd::Constant(1, x));
    if (v > best) best = v, arg = x;
  }
  Rng rng(28);
  const Eigen::VectorXd x = tsc_select(p, Box::unit(1), SolverConfig{}, rng);
  EXPECT_NEAR(p.objective.eval(x), best, 1e-6);
  EXPECT_NEAR(x(0), arg, 1e-3);
}

TEST(Tsc, ViolatedEverywhereMinimisesViolation) {
  const PathBundle base = prior_bundle(29, 1, 0.0);
  double top = -1e300, arg = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double x = i / 4000.0, v = base.constraints[0].eval(Eigen::VectorXd::Constant(1, x));
    if (v > top) top = v, arg = x;
  }
  const PathBundle p{base.objective, base.constraints, {top + 1.0}};
  Rng rng(30);
  const Eigen::VectorXd x = tsc_select(p, Box::unit(1), SolverConfig{}, rng);
  EXPECT_NEAR(x(0), arg, 1e-3);
}

TEST(Tsc, FixedSeedIsReproducible) {
  const PathBundle p = prior_bundle(31, 2, 0.0);
  Rng a(32), b(32);
  EXPECT_EQ(tsc_select(p, Box::unit(1), SolverConfig{}, a), tsc_select(p, Box::unit(1), SolverConfig{}, b));
}

}  // namespace
}  // namespace cmes
