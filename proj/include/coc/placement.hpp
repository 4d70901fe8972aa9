#pragma once

#include <span>
#include <vector>

#include "coc/distributions.hpp"
#include "coc/parallel.hpp"
#include "coc/rng.hpp"

namespace coc {

struct PlacementResult {
  std::vector<double> new_workloads;
  std::vector<double> added;
  /// k-th smallest of W_i + xi_i: the instant (relative to arrival) the job completes.
  double completion_level = 0.0;
};

/// Workload update at a cancel-on-completion job arrival.
///
/// Each selected server i finishes its own component at W_i + xi_i (FCFS);
/// the job completes at T*, the k-th smallest of those values, and every
/// unfinished component is removed then. Hence
///   new W_i = min(W_i + xi_i, max(W_i, T*)).
/// Negative W (free system) is accepted and treated by the same formula.
PlacementResult apply_job(std::span<const double> workloads, std::span<const double> sizes, int k);

/// Allocation-free variant for hot loops; `out` receives the new workloads.
/// Returns the total added workload.
double apply_job_inplace(std::span<const double> workloads, std::span<const double> sizes, int k,
                         std::span<double> out, std::span<double> scratch);

/// Absolute selection-set workloads Z from a workload-differential vector D
/// (D_1 = 0, D_i = Z_i - Z_{i-1} >= 0).
std::vector<double> offsets_to_workloads(std::span<const double> differentials);

/// One draw of eta(D): the total workload added by a job of class `c` whose
/// selection set has workload differentials D.
double sample_eta(const JobClass& c, std::span<const double> differentials, RngStream& rng);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo mean of eta(D). Samples are processed in fixed-size blocks,
/// block b drawing from stream.child(b), and merged in block order, so the
/// serial and parallel paths return bit-identical results.
McEstimate mc_eta_mean(const JobClass& c, std::span<const double> differentials,
                       std::size_t samples, const RngStream& stream, Exec exec = Exec::parallel);

/// Componentwise min(W_i, c); c may be +infinity.
std::vector<double> truncate_workloads(std::span<const double> workloads, double cap);

}  // namespace coc
