#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "coc/ccdf.hpp"
#include "coc/distributions.hpp"
#include "coc/parallel.hpp"
#include "coc/rng.hpp"

namespace coc {

/// How the per-class Stieltjes sums behind h are evaluated.
///  - direct: O(i) sum over all cells at node i (serial reference path).
///  - recursive: O(1) per node using the survival-term decomposition.
///  - automatic: recursive when every class admits it, direct otherwise.
enum class KernelMode { automatic, recursive, direct };

/// P{Binomial(n, p) <= m}.
double binomial_cdf(int n, double p, int m);

/// Level-crossing rate h(x_[0,w]) evaluated node by node along a CCDF that is
/// being built left to right (the FDE march) or already known (profiles).
///
/// For an iid class j with survival S_j and the grid measure mu of x:
///   q_j(w) = int_[0,w] S_j(w - v) dmu(v)       (selected server crosses w)
///   p_j(w) = mu[0,w] - q_j(w)                  (companion completes by w)
///   h(w)   = sum_j pi_j d_j q_j(w) P{Bin(d_j - 1, p_j(w)) <= k_j - 1}.
class HMarcher {
 public:
  virtual ~HMarcher() = default;
  /// Restart at node 0 with x_0 = x0.
  virtual void reset(double x0) = 0;
  /// h at the current node.
  [[nodiscard]] virtual double h() const = 0;
  /// h at the next node if x there equals `next`, without committing.
  [[nodiscard]] virtual double peek(double next) = 0;
  /// Commit x at the next node.
  virtual void advance(double next) = 0;
  [[nodiscard]] virtual std::size_t node() const = 0;
};

/// Closed-form marcher; requires every non-empty class to have iid sizes.
std::unique_ptr<HMarcher> make_closed_form_marcher(const ClassMix& mix, const Grid& grid,
                                                   KernelMode mode = KernelMode::automatic);

/// Monte-Carlo marcher over one fixed pool of (class, workload quantiles,
/// sizes) draws, reused at every node and across restarts.
std::unique_ptr<HMarcher> make_pool_marcher(const ClassMix& mix, const Grid& grid,
                                            std::size_t samples, const RngStream& stream);

/// h at every node of x. The direct mode parallelizes over nodes.
std::vector<double> crossing_profile(const Ccdf& x, const ClassMix& mix,
                                     KernelMode mode = KernelMode::automatic,
                                     Exec exec = Exec::parallel);

/// h at one node by the direct sum; reads only x at nodes 0..node.
double crossing_rate_at(const Ccdf& x, std::size_t node, const ClassMix& mix);

/// True when every class of the mix admits the recursive kernel.
bool recursive_kernel_available(const ClassMix& mix);

}  // namespace coc
