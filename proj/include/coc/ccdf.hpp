#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace coc {

/// Uniform workload grid 0, step, 2*step, ..., max.
struct Grid {
  double step = 0.01;
  double max = 10.0;

  static Grid make(double step, double max);
  [[nodiscard]] std::size_t nodes() const;
  [[nodiscard]] double at(std::size_t i) const { return static_cast<double>(i) * step; }
  /// Index of the node equal to w (within 1e-9 relative); throws otherwise.
  [[nodiscard]] std::size_t index_of(double w) const;
};

/// Grid-sampled complementary distribution function x_w = P{W > w}.
///
/// As a measure: an atom of mass 1 - x_0 at 0, cell increments
/// x_{(i-1)step} - x_{i step} at cell midpoints, and mass `tail` at +infinity.
/// Between nodes the function is evaluated as a right-continuous step.
struct Ccdf {
  double step = 0.01;
  std::vector<double> values;
  double tail = 0.0;

  static Ccdf empty_state(const Grid& g);
  /// x^{**,c}: 1 below c, 0 from c on.
  static Ccdf full_up_to(const Grid& g, double c);

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] double max_w() const {
    return values.empty() ? 0.0 : static_cast<double>(values.size() - 1) * step;
  }
  [[nodiscard]] double load() const { return values.empty() ? 0.0 : values.front(); }
  /// Step evaluation; 1 for w < 0, `tail` beyond the last node.
  [[nodiscard]] double at(double w) const;
  /// Non-increasing with values in [0,1] (1e-12 slack).
  [[nodiscard]] bool is_valid() const;
  /// First node index where the value is 0, or size() if none.
  [[nodiscard]] std::size_t frame_index() const;
  /// Mean of the grid measure restricted to the finite part.
  [[nodiscard]] double mean() const;
};

double sup_distance(const Ccdf& a, const Ccdf& b);

/// Adds one count per positive workload at the last node it exceeds;
/// suffix sums of `counts` (size grid.nodes()) give #{W > node}.
void accumulate_exceedance(std::span<const double> workloads, const Grid& grid,
                           std::vector<std::size_t>& counts);

/// Empirical CCDF of a workload vector on a grid: x_w = #{W_i > w}/n.
Ccdf sample_ccdf(std::span<const double> workloads, const Grid& grid);

}  // namespace coc
