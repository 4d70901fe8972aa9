#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coc/ccdf.hpp"
#include "coc/distributions.hpp"
#include "coc/parallel.hpp"
#include "coc/rng.hpp"

namespace coc {

enum class FrameMode { infinite, truncated, free };

struct Frame {
  FrameMode mode = FrameMode::infinite;
  double cap = 0.0;  // truncated mode only

  static Frame infinite() { return {FrameMode::infinite, 0.0}; }
  static Frame truncated(double c) { return {FrameMode::truncated, c}; }
  static Frame free_system() { return {FrameMode::free, 0.0}; }
};

std::string to_string(const Frame& f);

struct SimConfig {
  std::size_t n = 100;
  ClassMix mix;
  Frame frame;
  double horizon = 1e4;
  /// Defaults to horizon / 10.
  std::optional<double> warmup;
  double sample_interval = 1.0;
  /// Servers 0..tagged-1 are recorded jointly at every snapshot.
  std::size_t tagged = 0;
  std::uint64_t seed = 1;
  Grid grid;
  /// Abort once the mean workload exceeds this (regulated modes); nullopt = never.
  std::optional<double> workload_ceiling;

  [[nodiscard]] double effective_warmup() const { return warmup ? *warmup : horizon / 10.0; }
  /// Throws std::invalid_argument on a bad config.
  void validate() const;
};

struct SimMetrics {
  double load = 0.0;
  double load_stderr = 0.0;
  /// Average of snapshot CCDFs; empirical_ccdf.values[0] == load.
  Ccdf empirical_ccdf;
  double phi1 = 0.0;
  double phi1_stderr = 0.0;
  double mean_workload = 0.0;
  double max_workload = 0.0;
  std::vector<double> snapshot_times;
  /// One row of `tagged` workloads per snapshot.
  std::vector<std::vector<double>> tagged_samples;
  /// Total workload added per arrival after warmup (after truncation).
  double added_per_job = 0.0;
  double added_per_job_stderr = 0.0;
  std::size_t arrivals = 0;
  std::size_t jobs_measured = 0;
  /// Free mode: least-squares slope of the mean workload against time.
  std::optional<double> drift;
  std::optional<double> drift_stderr;
  bool aborted = false;
  double end_time = 0.0;
};

/// Exact simulation of the n-server system. Workloads are stored with the
/// time of their last update and drained lazily, so an arrival costs O(d).
/// Arrival epochs come from their own stream (unit exponentials scaled by
/// 1/(lambda n)), which couples runs that differ only in lambda.
SimMetrics run_simulation(const SimConfig& config);
SimMetrics run_simulation(const SimConfig& config, const RngStream& stream);

/// (1/n) sum |W_i - mean(W)|^ell.
double phi_ell(std::span<const double> workloads, int ell);

/// Independent replications with streams RngStream(seed).child(r), merged in index order.
std::vector<SimMetrics> run_replications(const SimConfig& config, std::size_t count,
                                         Exec exec = Exec::parallel);

enum class CriticalMethod { free_drift, load_bisection };

struct CriticalOptions {
  CriticalMethod method = CriticalMethod::free_drift;
  double lambda_lo = 0.05;
  double lambda_hi = 4.0;
  double tolerance = 0.005;
  double horizon = 2e4;
  std::optional<double> warmup;
  double sample_interval = 1.0;
  /// load_bisection: stable iff the run finishes with load < 1 - eps_load.
  double eps_load = 0.01;
  /// load_bisection ceiling; default 50 * dbar * max E xi / eps_load.
  std::optional<double> workload_ceiling;
  std::uint64_t seed = 1;
  Grid grid;
};

struct CriticalEstimate {
  double lambda = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  /// Half-width combining the bracket and the statistical error of the last probe.
  double half_width = 0.0;
  CriticalMethod method = CriticalMethod::free_drift;
  int evaluations = 0;
};

/// Bracket the fixed-n stability threshold. Throws BracketError when the
/// configured lambda range does not straddle it.
CriticalEstimate estimate_critical_lambda_n(std::size_t n, const ClassMix& mix,
                                            const CriticalOptions& options);

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_string(CriticalMethod m);

}  // namespace coc
