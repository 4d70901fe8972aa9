#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coc/ccdf.hpp"
#include "coc/crossing.hpp"
#include "coc/distributions.hpp"
#include "coc/parallel.hpp"
#include "coc/placement.hpp"
#include "coc/rng.hpp"

namespace coc {

/// Raised when a solver cannot classify or bracket its answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HMode { closed_form, monte_carlo };

struct SolverOptions {
  /// Bisection stops once the x0 bracket is narrower than this.
  double tol = 1e-10;
  /// A trajectory still above tail_eps at the grid end counts as unresolved.
  double tail_eps = 1e-4;
  /// A bisection boundary within collapse_eps of x0 = 1 means no proper
  /// fixed point exists at this resolution.
  double collapse_eps = 1e-3;
  HMode h_mode = HMode::closed_form;
  KernelMode kernel = KernelMode::automatic;
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 1;
  int max_iterations = 200;
};

/// Default grid: step = mean/200, max = 40 * mean / (1 - target_rho).
Grid default_grid(const ClassMix& mix, double target_rho);

/// One FDE march from x0.
struct FdeTrajectory {
  Ccdf x;
  bool hit = false;
  /// First w where x reaches 0 (linear interpolation inside the cell); +inf without a hit.
  double hit_location = 0.0;
};

FdeTrajectory integrate_fde(double x0, const ClassMix& mix, const Grid& grid, HMarcher& marcher);
FdeTrajectory integrate_fde(double x0, const ClassMix& mix, const Grid& grid,
                            const SolverOptions& options = {});

/// The marcher the options ask for (closed form or a Monte-Carlo pool).
std::unique_ptr<HMarcher> make_marcher(const ClassMix& mix, const Grid& grid,
                                       const SolverOptions& options);

enum class FpStatus { proper, supercritical };

struct FixedPointResult {
  Ccdf x;
  double lambda = 0.0;
  double rho = 0.0;
  /// Frame size c; nullopt for the infinite frame.
  std::optional<double> frame;
  FpStatus status = FpStatus::proper;
  /// Sup-norm defect of x_w = x_0 - lambda * int_0^w h on the frame.
  double residual = 0.0;
  int iterations = 0;
  double bracket_width = 0.0;
  /// Value at the grid end of the trajectory just above the boundary.
  double upper_tail = 0.0;
  /// upper_tail <= tail_eps.
  bool tail_resolved = true;

  [[nodiscard]] bool supercritical() const { return status == FpStatus::supercritical; }
};

/// Sup over the frame of |x_w - x_0 + lambda * int_0^w h(x_[0,u]) du|, trapezoid rule.
double fde_residual(const Ccdf& x, const ClassMix& mix, std::size_t end_index,
                    const SolverOptions& options = {});

FixedPointResult solve_fp_finite_frame(double c, const ClassMix& mix, const Grid& grid,
                                       const SolverOptions& options = {});

/// Proper fixed point with infinite frame, or a supercritical verdict.
FixedPointResult solve_fp_infinite(const ClassMix& mix, const Grid& grid,
                                   const SolverOptions& options = {});

struct EvolveOptions {
  double horizon = 100.0;
  /// Time step; must not exceed the grid step. 0 selects half the grid step,
  /// which keeps relaxation from x^{**,c} monotone.
  double dt = 0.0;
  /// Finite frame pinning x_w = 0 for w >= c.
  std::optional<double> frame;
  /// Keep the initial state and every record_every-th one after it
  /// (0 keeps only the final state).
  std::size_t record_every = 0;
  /// Stop once sup |x(t+dt) - x(t)| / dt falls below this (0 disables).
  double stop_rate = 0.0;
  /// Called after every step with (time, state).
  std::function<void(double, const Ccdf&)> observer;
};

struct EvolveResult {
  std::vector<double> times;
  std::vector<Ccdf> states;
  Ccdf final_state;
  double final_time = 0.0;
  double final_rate = 0.0;
  std::size_t steps = 0;
};

/// Upwind relaxation of dx_w/dt = dx_w/dw + lambda * h(x_[0,w]).
EvolveResult evolve_ml(const Ccdf& x_init, const ClassMix& mix, const EvolveOptions& options,
                       const SolverOptions& solver = {});

struct LambdaBarResult {
  double lambda_bar = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int evaluations = 0;
};

/// Bisection on lambda between proper and supercritical verdicts.
LambdaBarResult estimate_lambda_bar(const ClassMix& mix, const Grid& grid, double tol,
                                    const SolverOptions& options = {});

struct RhoRow {
  double lambda = 0.0;
  double rho = 0.0;
  FpStatus status = FpStatus::proper;
  /// Set when the solve failed; the row is then not usable.
  std::string error;
  std::optional<FixedPointResult> fp;
};

/// solve_fp_infinite for each lambda; the parallel path runs solves concurrently.
std::vector<RhoRow> rho_curve(const ClassMix& mix, const std::vector<double>& lambdas,
                              const Grid& grid, const SolverOptions& options = {},
                              Exec exec = Exec::parallel);

/// Draw from the grid measure of x given a uniform u, read as an exceedance
/// level (W > w iff u < x_w): 0 on the atom, linear inside cells, +inf on the
/// tail mass.
double sample_from_ccdf(const Ccdf& x, double u);

/// h at grid node w by the closed form (iid classes only).
double h_closed_form(const Ccdf& x, double w, const ClassMix& mix);

/// h at w by sampling selection sets iid from x.
McEstimate h_monte_carlo(const Ccdf& x, double w, const ClassMix& mix, std::size_t samples,
                         const RngStream& stream, Exec exec = Exec::parallel);

/// Workload added to a tagged server at w whose d - 1 companions are iid x;
/// the class is drawn size-biased (pi_j d_j).
double sample_jump(const Ccdf& x, double w, const ClassMix& mix, RngStream& rng);

struct ConsistencyReport {
  double predicted_load = 0.0;  // lambda * E[added work per job]
  double stderr_ = 0.0;
  double rho = 0.0;
  double discrepancy = 0.0;
  bool within_3sigma = false;
};

/// Rate conservation at a fixed point: rho against lambda times the mean
/// work a job adds when its selection set is iid x (truncated at the frame).
ConsistencyReport fp_consistency(const FixedPointResult& fp, const ClassMix& mix,
                                 std::size_t samples, const RngStream& stream,
                                 Exec exec = Exec::parallel);

/// Occupation CCDF of one particle draining at rate 1 (floored at 0) and
/// jumping at rate alpha by sample_jump in environment x, started from a draw of x.
Ccdf simulate_tagged_particle(const Ccdf& x, const ClassMix& mix, double horizon,
                              RngStream& rng);

}  // namespace coc
