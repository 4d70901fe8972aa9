#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "coc/ccdf.hpp"
#include "coc/distributions.hpp"
#include "coc/meanfield.hpp"
#include "coc/parallel.hpp"
#include "coc/rng.hpp"
#include "coc/simulator.hpp"

namespace coc {

/// Levy distance between two CCDFs read as right-continuous step functions:
/// the smallest eps with y(w+eps) - eps <= x(w) <= y(w-eps) + eps for all w.
double levy_distance(const Ccdf& x, const Ccdf& y);

struct IndependenceReport {
  /// Pearson correlations; unit diagonal.
  std::vector<std::vector<double>> correlations;
  /// Coordinates with zero sample variance (their correlations are reported as 0).
  std::vector<bool> degenerate;
  /// Sup over threshold pairs of |F(a,b) - F1(a) F2(b)| for the first two coordinates.
  double ks_product = 0.0;
  std::size_t sample_count = 0;

  [[nodiscard]] double max_abs_correlation() const;
  [[nodiscard]] bool any_degenerate() const;
};

/// Requires at least 30 samples of equal length m >= 2.
IndependenceReport independence_report(const std::vector<std::vector<double>>& samples);

enum class Direction { non_increasing, non_decreasing, constant, violated, inconclusive };

std::string to_string(Direction d);

struct DMonoPoint {
  std::vector<double> offsets;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct DMonoStep {
  std::size_t chain = 0;
  std::size_t from = 0;  // index into the chain
  std::size_t to = 0;
  double difference = 0.0;  // E eta(to) - E eta(from), paired
  double stderr_ = 0.0;
};

struct DMonotonicityVerdict {
  std::string class_id;
  HazardClass hazard = HazardClass::unknown;
  Direction direction = Direction::inconclusive;
  /// The step that decided the verdict (strongest separation; for `violated`
  /// a step against the expected direction).
  std::optional<DMonoStep> witness;
  /// points[c][i] is the estimate at chain c, position i.
  std::vector<std::vector<DMonoPoint>> points;
  std::vector<DMonoStep> steps;
  double sup_mean = 0.0;
  double sup_stderr = 0.0;
};

struct DMonoOptions {
  std::size_t samples = 100000;
  /// Separation threshold in paired standard errors.
  double sigmas = 4.0;
  /// Inconclusive when no step separates and some step's stderr exceeds
  /// this fraction of the mean.
  double max_relative_stderr = 0.05;
  Exec exec = Exec::parallel;
};

/// Chains (0, s, ..., s) and (0, 0, ..., 0, s) over increasing offsets s,
/// each starting at D = 0.
std::vector<std::vector<std::vector<double>>> default_chains(int d,
                                                             const std::vector<double>& offsets);

/// Scans E eta(D) along ordered chains D^0 <= D^1 <= ... with common random
/// numbers: every D of a chain sees the same size draws, so consecutive
/// differences are paired.
DMonotonicityVerdict dmono_scan(const JobClass& c,
                                const std::vector<std::vector<std::vector<double>>>& chains,
                                const RngStream& stream, const DMonoOptions& options = {},
                                std::string class_id = {});

enum class BoundMode { generic, dhr_tight };

struct SubcriticalityReport {
  double rho_bar = 0.0;
  bool subcritical = false;
  std::vector<double> s_bar;
};

/// rho_bar = lambda sum_j pi_j s_j with s_j = d_j E xi (generic) or k_j E xi
/// (dhr_tight, DHR or constant-hazard iid classes only).
SubcriticalityReport inherent_subcriticality(const ClassMix& mix,
                                             const std::vector<BoundMode>& modes);

struct ComparisonReport {
  double levy = 0.0;
  double sup = 0.0;
  double load_gap = 0.0;
};

ComparisonReport compare_ccdf_to_fp(const Ccdf& empirical, double load, const FixedPointResult& fp);
ComparisonReport compare_sim_to_fp(const SimMetrics& metrics, const FixedPointResult& fp);

}  // namespace coc
