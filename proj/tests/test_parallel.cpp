#include "cmes/acquisition.hpp"
#include "cmes/bo_loop.hpp"
#include "cmes/design.hpp"
#include "cmes/max_value.hpp"
#include "cmes/parallel.hpp"
#include "cmes/validation.hpp"

#include <gtest/gtest.h>

#include <omp.h>

#include <atomic>
#include <stdexcept>

namespace cmes {
namespace {

// Forces several threads even on a single-core machine so the parallel paths really interleave.
class ParallelTest : public ::testing::Test {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(4);
  }
  void TearDown() override { omp_set_num_threads(saved_); }
  int saved_ = 1;
};

ModelBundle small_bundle(int d, int C) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd x(8, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const KernelSpec k = KernelSpec::rbf(d, 0.25);
  ModelBundle b{GpModel(k, x, (3.0 * x.col(0).array()).sin().matrix()), {}, {}};
  for (int c = 0; c < C; ++c) {
    b.constraints.emplace_back(k, x, (x.rowwise().sum().array() - 0.3 * c).matrix());
    b.thresholds.push_back(0.0);
  }
  return b;
}

TEST_F(ParallelTest, MaxValueSamplesAreIdentical) {
  const ModelBundle b = small_bundle(2, 2);
  const SampleSet s = sample_max_values(b, 12, Box::unit(2), SamplerConfig{}, 5, Exec::Serial);
  const SampleSet p = sample_max_values(b, 12, Box::unit(2), SamplerConfig{}, 5, Exec::Parallel);
  EXPECT_EQ(s.values(), p.values());
  omp_set_num_threads(1);
  EXPECT_EQ(sample_max_values(b, 12, Box::unit(2), SamplerConfig{}, 5, Exec::Parallel).values(), p.values());
}

TEST_F(ParallelTest, AcquisitionMaximizationIsIdentical) {
  const ModelBundle b = small_bundle(3, 1);
  const SampleSet samples = sample_max_values(b, 6, Box::unit(3), SamplerConfig{}, 6);
  const std::vector<MaxValueSample> v = samples.values();
  const Objective acq = [&](const Eigen::VectorXd& x) { return cmes_ibo(output_marginals(b, x), v); };
  Rng a(7), c(7);
  const ArgMax s = maximize_acquisition(acq, Box::unit(3), AcqOptConfig{}, a, Exec::Serial);
  const ArgMax p = maximize_acquisition(acq, Box::unit(3), AcqOptConfig{}, c, Exec::Parallel);
  EXPECT_EQ(s.x, p.x);
  EXPECT_EQ(s.value, p.value);
  const Eigen::MatrixXd cands = regular_grid(Box::unit(3), 6);
  EXPECT_EQ(maximize_over_candidates(acq, cands, Exec::Serial).index,
            maximize_over_candidates(acq, cands, Exec::Parallel).index);
}

TEST_F(ParallelTest, FantasyAcquisitionIsIdentical) {
  const ModelBundle b = small_bundle(2, 1);
  const SampleSet samples = sample_max_values(b, 5, Box::unit(2), SamplerConfig{}, 8);
  Eigen::MatrixXd pending(2, 2);
  pending << 0.2, 0.3, 0.7, 0.6;
  const FantasySet s = build_fantasy_set(b, samples, pending, Exec::Serial);
  const FantasySet p = build_fantasy_set(b, samples, pending, Exec::Parallel);
  for (double t : {0.1, 0.45, 0.9}) {
    const Eigen::Vector2d x(t, 1 - t);
    EXPECT_EQ(parallel_cmes_ibo(s, x), parallel_cmes_ibo(p, x));
    EXPECT_EQ(parallel_cmes(s, x), parallel_cmes(p, x));
  }
}

TEST_F(ParallelTest, GridDrawsAreIdentical) {
  const ToyState t = make_toy_state(3);
  const JointGridSampler sampler(t.bundle, t.grid);
  EXPECT_EQ(draw_grid_max_values(sampler, 3000, 9, Exec::Serial), draw_grid_max_values(sampler, 3000, 9, Exec::Parallel));
}

TEST_F(ParallelTest, KdeOracleIsIdentical) {
  const ToyState t = make_toy_state(2);
  KdeMiConfig cfg;
  cfg.n_outer = 30;
  cfg.n_inner = 200;
  cfg.exec = Exec::Serial;
  const KdeMiEstimate s = kde_mi_oracle(t.bundle, t.grid, cfg);
  cfg.exec = Exec::Parallel;
  const KdeMiEstimate p = kde_mi_oracle(t.bundle, t.grid, cfg);
  EXPECT_EQ(s.raw, p.raw);
}

TEST_F(ParallelTest, OptimizationRunIsIdentical) {
  BoConfig cfg;
  cfg.T = 2;
  cfg.K = 4;
  cfg.seed = 10;
  cfg.exec = Exec::Serial;
  const RunResult s = run(gardner1(), cfg);
  cfg.exec = Exec::Parallel;
  const RunResult p = run(gardner1(), cfg);
  EXPECT_EQ(s.state.inputs, p.state.inputs);
  EXPECT_EQ(s.trace.back().utility_gap, p.trace.back().utility_gap);
}

TEST_F(ParallelTest, ExceptionsPropagateAfterAllItems) {
  std::atomic<int> done{0};
  EXPECT_THROW(parallel_for(Exec::Parallel, 64,
                            [&](std::int64_t i) {
                              if (i == 17) throw std::runtime_error("item 17");
                              ++done;
                            }),
               std::runtime_error);
  EXPECT_EQ(done.load(), 63);
  EXPECT_THROW(parallel_for(Exec::Serial, 4, [](std::int64_t) { throw std::logic_error("x"); }), std::logic_error);
}

}  // namespace
}  // namespace cmes
