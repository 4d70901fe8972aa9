#include <gtest/gtest.h>

#include <cmath>

#include "coc/simulator.hpp"
#include "support/fixtures.hpp"

using namespace coc;
using coc::testing::exp_class;
using coc::testing::exp_mix;
using coc::testing::iid_class;

namespace {

SimConfig base_config(ClassMix mix, std::size_t n, double horizon) {
  SimConfig c;
  c.mix = std::move(mix);
  c.n = n;
  c.horizon = horizon;
  c.grid = Grid::make(0.05, 20);
  c.seed = 17;
  return c;
}

}  // namespace

TEST(PhiEll, Examples) {
  EXPECT_NEAR(phi_ell(std::vector<double>{0, 2, 4}, 1), 4.0 / 3, 1e-15);
  EXPECT_NEAR(phi_ell(std::vector<double>{0, 2, 4}, 2), 8.0 / 3, 1e-15);
  EXPECT_EQ(phi_ell(std::vector<double>(5, 2.5), 1), 0.0);
  EXPECT_THROW(phi_ell(std::vector<double>{1}, 0), std::invalid_argument);
}

TEST(SimConfig, ValidationErrors) {
  auto c = base_config(exp_mix(3, 1, 0.5), 2, 100);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.n = 10;
  c.warmup = 200;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.warmup.reset();
  c.tagged = 11;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.tagged = 0;
  c.sample_interval = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.sample_interval = 1;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(run_simulation(base_config(exp_mix(3, 1, 0.5), 2, 100)), std::invalid_argument);
}

TEST(Simulator, ZeroLambdaStaysEmpty) {
  const auto m = run_simulation(base_config(exp_mix(2, 1, 0.0), 20, 50));
  EXPECT_EQ(m.load, 0.0);
  EXPECT_EQ(m.arrivals, 0u);
  for (double v : m.empirical_ccdf.values) EXPECT_EQ(v, 0.0);
}

TEST(Simulator, SingleServerMM1Load) {
  auto c = base_config(exp_mix(1, 1, 0.5), 1, 1e5);
  c.warmup = 1e3;
  const auto m = run_simulation(c);
  EXPECT_NEAR(m.load, 0.5, 0.02);
  EXPECT_NEAR(m.mean_workload, 1.0, 0.1);
}

TEST(Simulator, TruncatedFrameCapsWorkloads) {
  auto c = base_config(exp_mix(2, 1, 0.9), 50, 2000);
  c.frame = Frame::truncated(2.0);
  const auto m = run_simulation(c);
  EXPECT_LE(m.max_workload, 2.0);
  for (std::size_t i = 0; i < m.empirical_ccdf.size(); ++i)
    if (m.empirical_ccdf.step * static_cast<double>(i) >= 2.0) ASSERT_EQ(m.empirical_ccdf.values[i], 0.0);
}

TEST(Simulator, Deterministic) {
  auto c = base_config(exp_mix(2, 1, 0.6), 40, 500);
  c.tagged = 3;
  const auto a = run_simulation(c);
  const auto b = run_simulation(c);
  EXPECT_EQ(a.load, b.load);
  EXPECT_EQ(a.empirical_ccdf.values, b.empirical_ccdf.values);
  EXPECT_EQ(a.tagged_samples, b.tagged_samples);
  c.seed = 18;
  const auto d = run_simulation(c);
  EXPECT_NE(a.load, d.load);
}

TEST(Simulator, SnapshotScheduleAndTaggedShape) {
  auto c = base_config(exp_mix(2, 1, 0.5), 30, 200);
  c.warmup = 50;
  c.sample_interval = 2;
  c.tagged = 4;
  const auto m = run_simulation(c);
  EXPECT_EQ(m.snapshot_times.size(), 76u);
  EXPECT_EQ(m.snapshot_times.front(), 50.0);
  EXPECT_EQ(m.snapshot_times.back(), 200.0);
  ASSERT_EQ(m.tagged_samples.size(), m.snapshot_times.size());
  for (const auto& s : m.tagged_samples) ASSERT_EQ(s.size(), 4u);
}

TEST(Simulator, WorkConservingClassAddsFullSize) {
  const auto m = run_simulation(base_config(ClassMix::single(iid_class(3, 3, SizeDistribution::uniform(1)), 0.2), 30, 5000));
  EXPECT_NEAR(m.added_per_job, 1.5, 4 * m.added_per_job_stderr + 1e-9);
  EXPECT_NEAR(m.load, 0.3, 0.02);
}

TEST(Simulator, ExponentialPairLoadEqualsLambda) {
  const auto m = run_simulation(base_config(exp_mix(2, 1, 0.5), 200, 5000));
  EXPECT_NEAR(m.added_per_job, 1.0, 4 * m.added_per_job_stderr);
  EXPECT_NEAR(m.load, 0.5, 4 * m.load_stderr + 0.005);
}

TEST(Simulator, FreeModeDriftMatchesWorkBalance) {
  // Mean workload changes at rate lambda * E[eta] - 1, with E[eta] = 1 here.
  auto c = base_config(exp_mix(2, 1, 0.5), 50, 2000);
  c.frame = Frame::free_system();
  const auto m = run_simulation(c);
  ASSERT_TRUE(m.drift.has_value());
  ASSERT_TRUE(m.drift_stderr.has_value());
  EXPECT_NEAR(*m.drift, -0.5, 4 * *m.drift_stderr + 0.01);
  EXPECT_LT(m.mean_workload, 0.0);
}

TEST(Simulator, CeilingAborts) {
  auto c = base_config(exp_mix(1, 1, 1.5), 20, 5000);
  c.workload_ceiling = 20.0;
  const auto m = run_simulation(c);
  EXPECT_TRUE(m.aborted);
  EXPECT_LT(m.end_time, 5000.0);
}

TEST(Replications, SerialAndParallelIdentical) {
  auto c = base_config(exp_mix(2, 1, 0.6), 20, 300);
  const auto a = run_replications(c, 4, Exec::serial);
  const auto b = run_replications(c, 4, Exec::parallel);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i].load, b[i].load);
    EXPECT_EQ(a[i].empirical_ccdf.values, b[i].empirical_ccdf.values);
  }
  EXPECT_NE(a[0].load, a[1].load);
}

TEST(CriticalLambda, IndependentQueues) {
  CriticalOptions o;
  o.lambda_lo = 0.5;
  o.lambda_hi = 1.5;
  o.horizon = 2e4;
  o.tolerance = 0.005;
  for (auto method : {CriticalMethod::free_drift, CriticalMethod::load_bisection}) {
    o.method = method;
    const auto est = estimate_critical_lambda_n(50, exp_mix(1, 1, 0.0), o);
    EXPECT_NEAR(est.lambda, 1.0, 0.02) << to_string(method);
    EXPECT_LE(est.lower, est.upper);
    EXPECT_GT(est.evaluations, 2);
  }
}

TEST(CriticalLambda, WorkConservingDeterministicPair) {
  CriticalOptions o;
  o.lambda_lo = 0.5;
  o.lambda_hi = 1.5;
  const auto est = estimate_critical_lambda_n(50, ClassMix::single(iid_class(2, 2, SizeDistribution::deterministic(0.5)), 0.0), o);
  EXPECT_NEAR(est.lambda, 1.0, 0.03);
}

TEST(CriticalLambda, NonBracketingRangeThrows) {
  CriticalOptions o;
  o.lambda_lo = 0.2;
  o.lambda_hi = 0.4;
  o.horizon = 2000;
  EXPECT_THROW(estimate_critical_lambda_n(20, exp_mix(1, 1, 0.0), o), BracketError);
}
