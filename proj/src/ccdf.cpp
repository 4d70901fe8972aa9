#include "coc/ccdf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coc {

Grid Grid::make(double step, double max) {
  if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("grid step must be positive");
  if (!(max >= 0.0) || !std::isfinite(max)) throw std::invalid_argument("grid max must be non-negative");
  return Grid{step, max};
}

std::size_t Grid::nodes() const {
  return static_cast<std::size_t>(std::llround(std::floor(max / step + 1e-9))) + 1;
}

std::size_t Grid::index_of(double w) const {
  const double r = w / step;
  const double i = std::round(r);
  if (i < 0 || std::abs(r - i) > 1e-9 * std::max(1.0, std::abs(r)) ||
      static_cast<std::size_t>(i) >= nodes())
    throw std::invalid_argument("workload level is not a grid node");
  return static_cast<std::size_t>(i);
}

Ccdf Ccdf::empty_state(const Grid& g) { return Ccdf{g.step, std::vector<double>(g.nodes(), 0.0), 0.0}; }

Ccdf Ccdf::full_up_to(const Grid& g, double c) {
  Ccdf x = empty_state(g);
  const std::size_t ic = g.index_of(c);
  for (std::size_t i = 0; i < ic; ++i) x.values[i] = 1.0;
  return x;
}

double Ccdf::at(double w) const {
  if (w < 0.0) return 1.0;
  if (values.empty()) return tail;
  const double r = w / step;
  // Nodes are at i*step; guard against r = 2.9999999 for w = 3*step.
  auto i = static_cast<std::size_t>(std::floor(r + 1e-9));
  if (i >= values.size()) return tail;
  return values[i];
}

bool Ccdf::is_valid() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < -1e-12 || values[i] > 1.0 + 1e-12) return false;
    if (i > 0 && values[i] > values[i - 1] + 1e-12) return false;
  }
  return tail >= -1e-12 && (values.empty() || tail <= values.back() + 1e-12);
}

std::size_t Ccdf::frame_index() const {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] <= 0.0) return i;
  return values.size();
}

double Ccdf::mean() const {
  double m = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i)
    m += (values[i - 1] - values[i]) * (static_cast<double>(i) - 0.5) * step;
  return m;
}

double sup_distance(const Ccdf& a, const Ccdf& b) {
  if (a.step == b.step && a.size() == b.size()) {
    double d = std::abs(a.tail - b.tail);
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = static_cast<double>(i) * a.step;
    d = std::max(d, std::abs(a.values[i] - b.at(w)));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double w = static_cast<double>(i) * b.step;
    d = std::max(d, std::abs(a.at(w) - b.values[i]));
  }
  return d;
}

void accumulate_exceedance(std::span<const double> workloads, const Grid& grid,
                           std::vector<std::size_t>& counts) {
  const std::size_t nodes = grid.nodes();
  counts.resize(nodes, 0);
  for (const double w : workloads) {
    if (!(w > 0.0)) continue;
    const double r = std::floor(w / grid.step);
    long long top;
    if (r >= static_cast<double>(nodes)) {
      top = static_cast<long long>(nodes) - 1;
    } else {
      // Settle the exact comparison w > top * step against rounding in the division.
      top = static_cast<long long>(r);
      while (top >= 0 && !(w > static_cast<double>(top) * grid.step)) --top;
      while (top + 1 < static_cast<long long>(nodes) &&
             w > static_cast<double>(top + 1) * grid.step)
        ++top;
    }
    if (top >= 0) ++counts[static_cast<std::size_t>(top)];
  }
}

Ccdf sample_ccdf(std::span<const double> workloads, const Grid& grid) {
  const std::size_t nodes = grid.nodes();
  Ccdf x{grid.step, std::vector<double>(nodes, 0.0), 0.0};
  if (workloads.empty()) return x;
  std::vector<std::size_t> counts(nodes, 0);
  accumulate_exceedance(workloads, grid, counts);
  const double n = static_cast<double>(workloads.size());
  std::size_t above = 0;
  for (std::size_t i = nodes; i-- > 0;) {
    above += counts[i];
    x.values[i] = static_cast<double>(above) / n;
  }
  x.tail = x.values.back();
  return x;
}

}  // namespace coc
