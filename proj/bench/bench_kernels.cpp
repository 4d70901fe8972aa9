// Serial reference path vs OpenMP path for the parallel kernels.
// Argument 0 selects Exec::serial, 1 selects Exec::parallel.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "coc/crossing.hpp"
#include "coc/meanfield.hpp"
#include "coc/placement.hpp"
#include "coc/simulator.hpp"

namespace {

using namespace coc;

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

JobClass iid(int d, int k, SizeDistribution s) { return JobClass::make(d, k, JointSizeLaw::iid(std::move(s), d)); }

void BM_CrossingProfileDirect(benchmark::State& state) {
  const Grid g = Grid::make(0.02, 20);
  Ccdf x = Ccdf::empty_state(g);
  for (std::size_t i = 0; i < x.size(); ++i) x.values[i] = 0.6 * std::exp(-0.8 * g.at(i));
  const auto mix = ClassMix::single(iid(3, 1, SizeDistribution::weibull(2.0, 1.0)), 0.6);
  for (auto _ : state)
    benchmark::DoNotOptimize(crossing_profile(x, mix, KernelMode::direct, exec_of(state)));
}
BENCHMARK(BM_CrossingProfileDirect)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_McEtaMean(benchmark::State& state) {
  const JobClass c = iid(4, 2, SizeDistribution::uniform(2.0));
  const std::vector<double> diff{0, 0.5, 0.5, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(mc_eta_mean(c, diff, 1 << 20, RngStream(1), exec_of(state)));
}
BENCHMARK(BM_McEtaMean)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RhoCurve(benchmark::State& state) {
  const auto mix = ClassMix::single(iid(2, 1, SizeDistribution::exponential(1.0)), 0.0);
  const std::vector<double> lambdas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  for (auto _ : state)
    benchmark::DoNotOptimize(rho_curve(mix, lambdas, Grid::make(0.01, 60), {}, exec_of(state)));
}
BENCHMARK(BM_RhoCurve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Replications(benchmark::State& state) {
  SimConfig c;
  c.n = 200;
  c.mix = ClassMix::single(iid(2, 1, SizeDistribution::exponential(1.0)), 0.7);
  c.horizon = 500;
  c.grid = Grid::make(0.05, 20);
  for (auto _ : state) benchmark::DoNotOptimize(run_replications(c, 4, exec_of(state)));
}
BENCHMARK(BM_Replications)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
