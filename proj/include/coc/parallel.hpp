#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace coc {

/// Execution policy for kernels that have both a serial reference path and
/// an OpenMP path. Both paths produce identical results.
enum class Exec { serial, parallel };

inline int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Streaming mean/variance (Welford) with pairwise merge;
/// blocks are reduced in block order.
struct BlockMoments {
  std::size_t count = 0;
  double mean_ = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++count;
    const double delta = v - mean_;
    mean_ += delta / static_cast<double>(count);
    m2 += delta * (v - mean_);
  }
  void merge(const BlockMoments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n1 = static_cast<double>(count), n2 = static_cast<double>(o.count);
    const double delta = o.mean_ - mean_;
    const double n = n1 + n2;
    mean_ += delta * n2 / n;
    m2 += o.m2 + delta * delta * n1 * n2 / n;
    count += o.count;
  }
  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] double variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  }
  [[nodiscard]] double stderr_of_mean() const {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

inline constexpr std::size_t kMcBlock = 4096;

inline std::size_t block_count(std::size_t samples) { return (samples + kMcBlock - 1) / kMcBlock; }

/// Runs body(b, block_size, moments) for each block b and reduces in block order.
template <class Body>
BlockMoments run_blocks(std::size_t samples, Exec exec, Body&& body) {
  const std::size_t blocks = block_count(samples);
  std::vector<BlockMoments> parts(blocks);
  const auto nb = static_cast<long long>(blocks);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long b = 0; b < nb; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      const std::size_t begin = ub * kMcBlock;
      const std::size_t end = begin + kMcBlock < samples ? begin + kMcBlock : samples;
      body(ub, end - begin, parts[ub]);
    }
  } else {
    for (long long b = 0; b < nb; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      const std::size_t begin = ub * kMcBlock;
      const std::size_t end = begin + kMcBlock < samples ? begin + kMcBlock : samples;
      body(ub, end - begin, parts[ub]);
    }
  }
  BlockMoments total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace coc
