#include <gtest/gtest.h>

#include <cmath>

#include "coc/analysis.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace coc;
using coc::testing::exp_class;
using coc::testing::exp_mix;
using coc::testing::iid_class;

namespace {

Ccdf step_at(double at, double step, double max) {
  Ccdf x;
  x.step = step;
  const auto n = static_cast<std::size_t>(std::llround(max / step)) + 1;
  for (std::size_t i = 0; i < n; ++i) x.values.push_back(static_cast<double>(i) * step < at - 1e-12 ? 1.0 : 0.0);
  return x;
}

Ccdf random_ccdf(RngStream& r, double step, double max) {
  Ccdf x = step_at(0, step, max);
  double v = r.uniform();
  for (double& e : x.values) {
    e = v;
    if (r.uniform() < 0.4) v *= r.uniform();
  }
  return x;
}

}  // namespace

TEST(Levy, IdenticalIsZero) {
  RngStream r(1);
  const auto x = random_ccdf(r, 0.1, 5);
  EXPECT_EQ(levy_distance(x, x), 0.0);
}

TEST(Levy, PointMassesAtOneAndOnePointThree) {
  const auto x = step_at(1.0, 0.1, 3);
  const auto y = step_at(1.3, 0.1, 3);
  EXPECT_NEAR(levy_distance(x, y), 0.3, 1e-9);
  EXPECT_NEAR(coc::testing::levy_brute_force(x, y), 0.3, 2e-4);
}

TEST(Levy, ShiftIsBoundedByShift) {
  RngStream r(4);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_ccdf(r, 0.05, 4);
    Ccdf y = x;
    const std::size_t k = 1 + r.below(5);
    for (std::size_t i = y.size(); i-- > 0;) y.values[i] = i >= k ? x.values[i - k] : x.values[0];
    EXPECT_LE(levy_distance(x, y), 0.05 * static_cast<double>(k) + 1e-12);
  }
}

TEST(Levy, MatchesBruteForceAndMetricProperties) {
  RngStream r(7);
  for (int t = 0; t < 25; ++t) {
    const auto x = random_ccdf(r, 0.25, 3);
    const auto y = random_ccdf(r, 0.25, 3);
    const auto z = random_ccdf(r, 0.25, 3);
    const double dxy = levy_distance(x, y);
    EXPECT_NEAR(dxy, coc::testing::levy_brute_force(x, y), 3e-4) << "trial " << t;
    EXPECT_NEAR(dxy, levy_distance(y, x), 1e-12);
    EXPECT_LE(dxy, sup_distance(x, y) + 1e-12);
    EXPECT_LE(dxy, levy_distance(x, z) + levy_distance(z, y) + 1e-9);
  }
}

TEST(Independence, IidPairsHaveSmallCorrelation) {
  RngStream r(3);
  std::vector<std::vector<double>> s;
  for (int i = 0; i < 5000; ++i) s.push_back({r.exponential(), r.exponential(), r.uniform()});
  const auto rep = independence_report(s);
  EXPECT_EQ(rep.sample_count, 5000u);
  EXPECT_LT(rep.max_abs_correlation(), 3 / std::sqrt(5000.0));
  EXPECT_LT(rep.ks_product, 0.03);
  EXPECT_EQ(rep.correlations[1][1], 1.0);
  EXPECT_FALSE(rep.any_degenerate());
}

TEST(Independence, DuplicatedCoordinatesAreFullyCorrelated) {
  RngStream r(3);
  std::vector<std::vector<double>> s;
  for (int i = 0; i < 500; ++i) {
    const double v = r.exponential();
    s.push_back({v, v});
  }
  const auto rep = independence_report(s);
  EXPECT_NEAR(rep.correlations[0][1], 1.0, 1e-12);
  // F(a,a) = F(a) against F(a)^2 peaks at 1/4.
  EXPECT_NEAR(rep.ks_product, 0.25, 0.01);
}

TEST(Independence, DegenerateCoordinateAndInputChecks) {
  RngStream r(3);
  std::vector<std::vector<double>> s;
  for (int i = 0; i < 100; ++i) s.push_back({0.0, r.uniform()});
  const auto rep = independence_report(s);
  EXPECT_TRUE(rep.any_degenerate());
  EXPECT_EQ(rep.correlations[0][1], 0.0);
  EXPECT_THROW(independence_report(std::vector<std::vector<double>>(10, {1.0, 2.0})), std::invalid_argument);
  EXPECT_THROW(independence_report(std::vector<std::vector<double>>(40, {1.0})), std::invalid_argument);
}

TEST(DefaultChains, ShapesStartAtZero) {
  const auto ch = default_chains(3, {1, 2});
  ASSERT_EQ(ch.size(), 2u);
  EXPECT_EQ(ch[0][0], (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(ch[0][2], (std::vector<double>{0, 2, 2}));
  EXPECT_EQ(ch[1][1], (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(default_chains(2, {1}).size(), 1u);
}

TEST(DMono, DeterministicHandTimeline) {
  const auto c = iid_class(2, 1, SizeDistribution::deterministic(1));
  const std::vector<std::vector<std::vector<double>>> chain{{{0, 0}, {0, 0.5}, {0, 1}}};
  DMonoOptions o;
  o.samples = 2000;
  const auto v = dmono_scan(c, chain, RngStream(1), o, "det");
  EXPECT_EQ(v.direction, Direction::non_increasing);
  EXPECT_NEAR(v.points[0][0].mean, 2.0, 1e-12);
  EXPECT_NEAR(v.points[0][1].mean, 1.5, 1e-12);
  EXPECT_NEAR(v.points[0][2].mean, 1.0, 1e-12);
  EXPECT_EQ(v.class_id, "det");
  ASSERT_TRUE(v.witness.has_value());
}

TEST(DMono, ExponentialIsConstant) {
  const auto v = dmono_scan(exp_class(2, 1), default_chains(2, {0.5, 1, 2, 4}), RngStream(2));
  EXPECT_EQ(v.direction, Direction::constant);
  for (const auto& p : v.points[0]) EXPECT_NEAR(p.mean, 1.0, 4 * p.stderr_);
}

TEST(DMono, KEqualsDIsConstant) {
  const auto v = dmono_scan(iid_class(3, 3, SizeDistribution::uniform(2)), default_chains(3, {1, 2}), RngStream(3));
  EXPECT_EQ(v.direction, Direction::constant);
}

TEST(DMono, IhrClassesNeverViolate) {
  const std::vector<SizeDistribution> laws{SizeDistribution::uniform(2), SizeDistribution::weibull(2, 1),
                                           SizeDistribution::truncated(SizeDistribution::exponential(1), 1.5)};
  DMonoOptions o;
  o.samples = 40000;
  for (const auto& law : laws) {
    const auto v = dmono_scan(iid_class(3, 2, law), default_chains(3, {0.25, 1, 4}), RngStream(5), o);
    EXPECT_TRUE(v.direction == Direction::non_increasing || v.direction == Direction::constant) << law.kind_name();
  }
}

TEST(DMono, DhrClassIsNonDecreasing) {
  const auto c = iid_class(2, 1, SizeDistribution::hyperexponential({0.9, 0.1}, {2.0, 0.2}));
  const auto v = dmono_scan(c, default_chains(2, {0.5, 2, 8, 32}), RngStream(6));
  EXPECT_EQ(v.direction, Direction::non_decreasing);
  EXPECT_EQ(v.hazard, HazardClass::dhr);
}

TEST(DMono, SerialAndParallelIdentical) {
  const auto c = iid_class(3, 2, SizeDistribution::weibull(2, 1));
  DMonoOptions s, p;
  s.samples = p.samples = 20000;
  s.exec = Exec::serial;
  p.exec = Exec::parallel;
  const auto a = dmono_scan(c, default_chains(3, {1, 2}), RngStream(8), s);
  const auto b = dmono_scan(c, default_chains(3, {1, 2}), RngStream(8), p);
  for (std::size_t ch = 0; ch < a.points.size(); ++ch)
    for (std::size_t i = 0; i < a.points[ch].size(); ++i) EXPECT_EQ(a.points[ch][i].mean, b.points[ch][i].mean);
}

TEST(Subcriticality, Examples) {
  const auto mix = exp_mix(2, 1, 0.4);
  const auto g = inherent_subcriticality(mix, {BoundMode::generic});
  EXPECT_NEAR(g.rho_bar, 0.8, 1e-15);
  EXPECT_TRUE(g.subcritical);
  EXPECT_NEAR(inherent_subcriticality(mix, {BoundMode::dhr_tight}).rho_bar, 0.4, 1e-15);
  EXPECT_EQ(inherent_subcriticality(exp_mix(2, 1, 0.0), {BoundMode::generic}).rho_bar, 0.0);
  EXPECT_FALSE(inherent_subcriticality(exp_mix(2, 1, 0.6), {BoundMode::generic}).subcritical);
  EXPECT_THROW(inherent_subcriticality(ClassMix::single(iid_class(2, 1, SizeDistribution::uniform(1)), 0.3),
                                       {BoundMode::dhr_tight}),
               std::invalid_argument);
}

TEST(Compare, SelfComparisonIsZero) {
  const auto fp = solve_fp_infinite(exp_mix(2, 1, 0.5), Grid::make(0.05, 20));
  SimMetrics m;
  m.empirical_ccdf = fp.x;
  m.load = fp.rho;
  const auto rep = compare_sim_to_fp(m, fp);
  EXPECT_EQ(rep.levy, 0.0);
  EXPECT_EQ(rep.sup, 0.0);
  EXPECT_EQ(rep.load_gap, 0.0);
}

TEST(Compare, SupercriticalFixedPointIsRejected) {
  FixedPointResult fp;
  fp.status = FpStatus::supercritical;
  EXPECT_THROW(compare_ccdf_to_fp(Ccdf::empty_state(Grid::make(1, 2)), 0.0, fp), std::invalid_argument);
}
