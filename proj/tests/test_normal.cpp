#include "cmes/box.hpp"
#include "cmes/errors.hpp"
#include "cmes/kernel.hpp"
#include "cmes/linalg.hpp"
#include "cmes/normal.hpp"
#include "cmes/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace cmes {
namespace {

using testing::Phi;
using testing::phi;
using testing::upper_tail;

TEST(Normal, MatchesErfcInTheBulk) {
  for (double x = -8.0; x <= 8.0; x += 0.37) {
    EXPECT_NEAR(normal::pdf(x), phi(x), 1e-14 * phi(x));
    EXPECT_NEAR(normal::cdf(x), Phi(x), 1e-12 * Phi(x));
    EXPECT_NEAR(normal::sf(x), upper_tail(x), 1e-12 * upper_tail(x));
    EXPECT_NEAR(normal::log_sf(x), std::log(upper_tail(x)), 1e-12);
    EXPECT_NEAR(normal::log_cdf(x), std::log(Phi(x)), 1e-12);
  }
}

TEST(Normal, LogTailFollowsAsymptoticSeriesFarOut) {
  for (double x : {40.0, 100.0, 1e3}) {
    const double s = 1.0 / (x * x);
    const double expected = -0.5 * x * x - std::log(x) - normal::kLogSqrt2Pi + std::log1p(-s + 3 * s * s - 15 * s * s * s);
    EXPECT_NEAR(normal::log_sf(x), expected, 1e-10 * std::abs(expected));
  }
  EXPECT_EQ(normal::log_sf(-std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_EQ(normal::log_sf(std::numeric_limits<double>::infinity()), -std::numeric_limits<double>::infinity());
}

TEST(Normal, TailRatioValues) {
  EXPECT_EQ(normal::tail_ratio(0.0), 0.0);
  const double g = -0.84;
  EXPECT_NEAR(normal::tail_ratio(g), g * phi(g) / upper_tail(g), 1e-14);
  EXPECT_LT(normal::tail_ratio(g), -0.29);
  EXPECT_LT(std::abs(normal::tail_ratio(-30.0)), 1e-6);
  EXPECT_EQ(normal::tail_ratio(-std::numeric_limits<double>::infinity()), 0.0);
  // Mills-ratio asymptote phi/(1 - Phi) ~ x + 1/x for large x.
  EXPECT_NEAR(normal::hazard(50.0), 50.0 + 1.0 / 50.0, 1e-4);
}

TEST(Rng, DerivedSeedsAreDeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 10; ++s)
    for (std::uint64_t t = 0; t < 10; ++t) seen.insert(derive_seed(s, {t}));
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  Rng a = substream(3, {tag(Stream::MaxValue), 4});
  Rng b = substream(3, {tag(Stream::MaxValue), 4});
  EXPECT_EQ(standard_normal_vector(a, 8), standard_normal_vector(b, 8));
}

TEST(Linalg, JitterRepairsSemidefiniteMatrix) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(3, 3);
  const CholeskyFactor f = cholesky_with_jitter(a);
  EXPECT_GT(f.jitter, 0.0);
  const Eigen::MatrixXd back = f.lower * f.lower.transpose();
  EXPECT_LT((back - a - f.jitter * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Linalg, IndefiniteMatrixThrows) {
  Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(cholesky_with_jitter(a), NumericalError);
}

TEST(Kernel, ExampleValues) {
  Eigen::Vector2d x(1, 2), y(3, 4);
  EXPECT_EQ(kernel_eval(KernelSpec{0.0, 1.0, Eigen::Vector2d(1, 1)}, x, x), 1.0);
  EXPECT_EQ(kernel_eval(KernelSpec{1.0, 0.0, Eigen::Vector2d(1, 1)}, x, y), 11.0);
  EXPECT_NEAR(kernel_eval(KernelSpec{0.0, 1.0, Eigen::Vector2d(0.2, 0.2)}, Eigen::Vector2d(0, 0), Eigen::Vector2d(0.2, 0)),
              std::exp(-0.5), 1e-15);
}

TEST(Kernel, DimensionMismatchThrows) {
  EXPECT_THROW(kernel_eval(KernelSpec::rbf(2, 1.0), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()),
               std::invalid_argument);
}

TEST(Kernel, GramMatchesPointwise) {
  std::mt19937_64 rng(5);
  const KernelSpec k{0.3, 0.7, Eigen::Vector3d(0.2, 0.5, 1.1)};
  const Eigen::MatrixXd a = testing::uniform_points(rng, 4, 3), b = testing::uniform_points(rng, 6, 3);
  const Eigen::MatrixXd g = gram(k, a, b);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(g(i, j), testing::rbf_lin(k, a.row(i).transpose(), b.row(j).transpose()), 1e-14);
}

TEST(Box, GridOrderingAndMembership) {
  const Box box(Eigen::Vector2d(0, 10), Eigen::Vector2d(1, 20));
  const Eigen::MatrixXd g = regular_grid(box, 3);
  ASSERT_EQ(g.rows(), 9);
  EXPECT_EQ(g.row(0), Eigen::RowVector2d(0, 10));
  EXPECT_EQ(g.row(1), Eigen::RowVector2d(0, 15));
  EXPECT_EQ(g.row(3), Eigen::RowVector2d(0.5, 10));
  EXPECT_TRUE(box.contains(Eigen::Vector2d(0.5, 12)));
  EXPECT_FALSE(box.contains(Eigen::Vector2d(1.5, 12)));
  EXPECT_EQ(box.clamp(Eigen::Vector2d(2, 0)), Eigen::Vector2d(1, 10));
  EXPECT_THROW(Box(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), std::invalid_argument);
}

}  // namespace
}  // namespace cmes
