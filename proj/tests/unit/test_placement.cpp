#include <gtest/gtest.h>

#include <cmath>

#include "coc/placement.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace coc;
using coc::testing::exp_class;
using coc::testing::fcfs_timeline;
using coc::testing::iid_class;

TEST(ApplyJob, WorkedExample) {
  const auto r = apply_job(std::vector<double>{5, 3, 6}, std::vector<double>{7, 4, 3}, 2);
  EXPECT_EQ(r.new_workloads, (std::vector<double>{9, 7, 9}));
  EXPECT_EQ(r.added, (std::vector<double>{4, 4, 3}));
  EXPECT_EQ(r.completion_level, 9.0);
}

TEST(ApplyJob, KEqualsDAddsEverything) {
  const auto r = apply_job(std::vector<double>{5, 3, 6}, std::vector<double>{7, 4, 3}, 3);
  EXPECT_EQ(r.new_workloads, (std::vector<double>{12, 7, 9}));
  EXPECT_EQ(r.added, (std::vector<double>{7, 4, 3}));
}

TEST(ApplyJob, CancelledBeforeStart) {
  const auto r = apply_job(std::vector<double>{0, 10}, std::vector<double>{3, 3}, 1);
  EXPECT_EQ(r.completion_level, 3.0);
  EXPECT_EQ(r.new_workloads, (std::vector<double>{3, 10}));
  EXPECT_EQ(r.added, (std::vector<double>{3, 0}));
}

TEST(ApplyJob, RejectsBadInput) {
  EXPECT_THROW(apply_job(std::vector<double>{1, 2}, std::vector<double>{1}, 1), std::invalid_argument);
  EXPECT_THROW(apply_job(std::vector<double>{1, 2}, std::vector<double>{1, 1}, 3), std::invalid_argument);
  EXPECT_THROW(apply_job(std::vector<double>{1, 2}, std::vector<double>{1, -1}, 1), std::invalid_argument);
}

TEST(ApplyJob, MatchesFcfsTimelineOnRandomInstances) {
  RngStream r(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(r.below(6));
    const int k = 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(d)));
    std::vector<double> w(d), xi(d);
    for (int i = 0; i < d; ++i) {
      // Mix continuous values with small integers so ties occur.
      w[i] = r.below(3) == 0 ? static_cast<double>(r.below(4)) : 5 * r.uniform();
      xi[i] = r.below(3) == 0 ? static_cast<double>(r.below(3)) : 3 * r.exponential();
    }
    const auto got = apply_job(w, xi, k);
    const auto want = fcfs_timeline(w, xi, k);
    ASSERT_NEAR(got.completion_level, want.completion, 1e-9);
    for (int i = 0; i < d; ++i) {
      ASSERT_NEAR(got.new_workloads[i], want.busy_until[i], 1e-9) << "trial " << trial;
      ASSERT_NEAR(got.added[i], want.added[i], 1e-9);
    }
  }
}

TEST(ApplyJob, InplaceMatchesAllocatingVersion) {
  RngStream r(5);
  std::vector<double> out(4), scratch(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(4), xi(4);
    for (int i = 0; i < 4; ++i) {
      w[i] = 3 * r.uniform();
      xi[i] = r.exponential();
    }
    const auto ref = apply_job(w, xi, 2);
    const double total = apply_job_inplace(w, xi, 2, out, scratch);
    ASSERT_EQ(out, ref.new_workloads);
    double sum = 0;
    for (double a : ref.added) sum += a;
    ASSERT_NEAR(total, sum, 1e-12);
  }
}

TEST(ApplyJob, Properties) {
  RngStream r(77);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 2 + static_cast<int>(r.below(4));
    const int k = 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(d)));
    std::vector<double> w(d), xi(d);
    for (int i = 0; i < d; ++i) {
      w[i] = 4 * r.uniform();
      xi[i] = 2 * r.exponential();
    }
    const auto res = apply_job(w, xi, k);
    int full = 0;
    for (int i = 0; i < d; ++i) {
      ASSERT_GE(res.added[i], 0.0);
      ASSERT_LE(res.added[i], xi[i] + 1e-15);
      ASSERT_LE(res.new_workloads[i], std::max(w[i], res.completion_level) + 1e-12);
      full += std::abs(res.added[i] - xi[i]) <= 1e-12 * (1 + w[i] + xi[i]) ? 1 : 0;
    }
    ASSERT_GE(full, k);
    // Adding the same amount to every workload shifts the result.
    std::vector<double> shifted(w);
    for (double& v : shifted) v += 1.25;
    const auto s = apply_job(shifted, xi, k);
    for (int i = 0; i < d; ++i) ASSERT_NEAR(s.added[i], res.added[i], 1e-12);
  }
}

TEST(ApplyJob, AcceptsNegativeWorkloads) {
  const auto r = apply_job(std::vector<double>{-2, -1}, std::vector<double>{1, 3}, 1);
  EXPECT_EQ(r.completion_level, -1.0);
  EXPECT_EQ(r.new_workloads, (std::vector<double>{-1, -1}));
}

TEST(OffsetsToWorkloads, CumulativeSum) {
  EXPECT_EQ(offsets_to_workloads(std::vector<double>{0, 1, 0.5}), (std::vector<double>{0, 1, 1.5}));
}

TEST(SampleEta, DeterministicHandTimeline) {
  const auto c = iid_class(2, 1, SizeDistribution::deterministic(1));
  RngStream r(1);
  for (double delta : {0.0, 0.25, 0.5, 1.0, 1.5}) {
    const double eta = sample_eta(c, std::vector<double>{0, delta}, r);
    EXPECT_NEAR(eta, 1 + std::max(0.0, 1 - delta), 1e-15);
  }
}

TEST(SampleEta, KEqualsDIsTotalSize) {
  const auto c = iid_class(2, 2, SizeDistribution::deterministic(1.5));
  RngStream r(1);
  EXPECT_EQ(sample_eta(c, std::vector<double>{0, 3}, r), 3.0);
}

TEST(MonteCarloEta, ExponentialIsConstant) {
  const auto c = exp_class(2, 1);
  for (double delta : {0.0, 0.5, 2.0, 5.0}) {
    const auto est = mc_eta_mean(c, std::vector<double>{0, delta}, 1000000, RngStream(3));
    EXPECT_NEAR(est.mean, 1.0, 0.005) << "delta " << delta;
    EXPECT_NEAR(est.mean, 1.0, 4 * est.stderr_);
  }
}

TEST(MonteCarloEta, DeterministicHasZeroVariance) {
  const auto c = iid_class(2, 1, SizeDistribution::deterministic(1));
  const auto est = mc_eta_mean(c, std::vector<double>{0, 0.5}, 10000, RngStream(1));
  EXPECT_NEAR(est.mean, 1.5, 1e-12);
  EXPECT_NEAR(est.stderr_, 0.0, 1e-12);
}

TEST(MonteCarloEta, KEqualsDMeansDTimesMean) {
  const auto c = iid_class(3, 3, SizeDistribution::uniform(2));
  const auto est = mc_eta_mean(c, std::vector<double>{0, 1, 2}, 200000, RngStream(8));
  EXPECT_NEAR(est.mean, 3.0, 4 * est.stderr_);
}

TEST(MonteCarloEta, SerialAndParallelAreBitIdentical) {
  const auto c = iid_class(3, 2, SizeDistribution::weibull(2, 1));
  const std::vector<double> d{0, 0.3, 0.9};
  const auto a = mc_eta_mean(c, d, 50000, RngStream(10), Exec::serial);
  const auto b = mc_eta_mean(c, d, 50000, RngStream(10), Exec::parallel);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stderr_, b.stderr_);
  EXPECT_EQ(a.samples, 50000u);
}

TEST(TruncateWorkloads, Examples) {
  EXPECT_EQ(truncate_workloads(std::vector<double>{9, 7, 9}, 8), (std::vector<double>{8, 7, 8}));
  const std::vector<double> w{1.5, 0, 3};
  EXPECT_EQ(truncate_workloads(w, std::numeric_limits<double>::infinity()), w);
  EXPECT_EQ(truncate_workloads(std::vector<double>{0, 0}, 0), (std::vector<double>{0, 0}));
}
