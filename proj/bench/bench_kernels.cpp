// Serial vs OpenMP timings of the hot kernels. Argument 0 runs the serial reference, 1 the parallel path.

#include "cmes/acquisition.hpp"
#include "cmes/design.hpp"
#include "cmes/max_value.hpp"
#include "cmes/validation.hpp"

#include <benchmark/benchmark.h>

namespace cmes {
namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

ModelBundle bench_bundle(int d, int C) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd x(20, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const KernelSpec k = KernelSpec::rbf(d, 0.25);
  ModelBundle b{GpModel(k, x, (3.0 * x.col(0).array()).sin().matrix()), {}, {}};
  for (int c = 0; c < C; ++c) {
    b.constraints.emplace_back(k, x, (x.rowwise().sum().array() - 0.3 * c).matrix());
    b.thresholds.push_back(0.0);
  }
  return b;
}

void BM_SampleMaxValues(benchmark::State& state) {
  const ModelBundle b = bench_bundle(2, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_max_values(b, 10, Box::unit(2), SamplerConfig{}, 5, exec_of(state)));
}
BENCHMARK(BM_SampleMaxValues)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MaximizeAcquisition(benchmark::State& state) {
  const ModelBundle b = bench_bundle(3, 2);
  const std::vector<MaxValueSample> v = sample_max_values(b, 10, Box::unit(3), SamplerConfig{}, 6).values();
  const Objective acq = [&](const Eigen::VectorXd& x) { return cmes_ibo(output_marginals(b, x), v); };
  for (auto _ : state) {
    Rng rng(7);
    benchmark::DoNotOptimize(maximize_acquisition(acq, Box::unit(3), AcqOptConfig{}, rng, exec_of(state)));
  }
}
BENCHMARK(BM_MaximizeAcquisition)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_GridMaxValueDraws(benchmark::State& state) {
  const ToyState t = make_toy_state(6);
  const JointGridSampler sampler(t.bundle, t.grid);
  for (auto _ : state) benchmark::DoNotOptimize(draw_grid_max_values(sampler, 20000, 9, exec_of(state)));
}
BENCHMARK(BM_GridMaxValueDraws)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KdeMiOracle(benchmark::State& state) {
  const ToyState t = make_toy_state(4);
  KdeMiConfig cfg;
  cfg.n_outer = 40;
  cfg.n_inner = 400;
  cfg.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(kde_mi_oracle(t.bundle, t.grid, cfg));
}
BENCHMARK(BM_KdeMiOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace cmes

BENCHMARK_MAIN();
