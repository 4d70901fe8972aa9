#include "coc/placement.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coc {

double apply_job_inplace(std::span<const double> workloads, std::span<const double> sizes, int k,
                         std::span<double> out, std::span<double> scratch) {
  const std::size_t d = workloads.size();
  for (std::size_t i = 0; i < d; ++i) scratch[i] = workloads[i] + sizes[i];
  const auto kk = static_cast<std::size_t>(k - 1);
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(kk),
                   scratch.begin() + static_cast<std::ptrdiff_t>(d));
  const double level = scratch[kk];
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = std::min(workloads[i] + sizes[i], std::max(workloads[i], level));
    total += out[i] - workloads[i];
  }
  return total;
}

PlacementResult apply_job(std::span<const double> workloads, std::span<const double> sizes, int k) {
  if (workloads.size() != sizes.size())
    throw std::invalid_argument("workloads and sizes must have the same length");
  const auto d = static_cast<int>(workloads.size());
  if (k < 1 || k > d) throw std::invalid_argument("k must satisfy 1 <= k <= d");
  for (double x : sizes)
    if (!(x >= 0.0)) throw std::invalid_argument("component sizes must be non-negative");

  PlacementResult r;
  r.new_workloads.resize(workloads.size());
  r.added.resize(workloads.size());
  std::vector<double> scratch(workloads.size());
  apply_job_inplace(workloads, sizes, k, r.new_workloads, scratch);
  std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
  r.completion_level = scratch[static_cast<std::size_t>(k - 1)];
  for (std::size_t i = 0; i < workloads.size(); ++i)
    r.added[i] = r.new_workloads[i] - workloads[i];
  return r;
}

std::vector<double> offsets_to_workloads(std::span<const double> differentials) {
  if (differentials.empty()) throw std::invalid_argument("differential vector is empty");
  if (differentials[0] != 0.0) throw std::invalid_argument("D_1 must be 0");
  std::vector<double> z(differentials.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < differentials.size(); ++i) {
    if (!(differentials[i] >= 0.0) || !std::isfinite(differentials[i]))
      throw std::invalid_argument("differentials must be finite and non-negative");
    acc += differentials[i];
    z[i] = acc;
  }
  return z;
}

double sample_eta(const JobClass& c, std::span<const double> differentials, RngStream& rng) {
  if (c.is_empty()) return 0.0;
  if (static_cast<int>(differentials.size()) != c.d)
    throw std::invalid_argument("differential vector length must equal d");
  const std::vector<double> z = offsets_to_workloads(differentials);
  std::vector<double> xi(z.size()), out(z.size()), scratch(z.size());
  c.sizes.sample(rng, xi);
  return apply_job_inplace(z, xi, c.k, out, scratch);
}

McEstimate mc_eta_mean(const JobClass& c, std::span<const double> differentials,
                       std::size_t samples, const RngStream& stream, Exec exec) {
  if (samples < 2) throw std::invalid_argument("mc_eta_mean needs at least 2 samples");
  if (c.is_empty()) return {0.0, 0.0, samples};
  if (static_cast<int>(differentials.size()) != c.d)
    throw std::invalid_argument("differential vector length must equal d");
  const std::vector<double> z = offsets_to_workloads(differentials);

  const BlockMoments m =
      run_blocks(samples, exec, [&](std::size_t b, std::size_t count, BlockMoments& acc) {
        RngStream rng = stream.child(b);
        std::vector<double> xi(z.size()), out(z.size()), scratch(z.size());
        for (std::size_t s = 0; s < count; ++s) {
          c.sizes.sample(rng, xi);
          acc.add(apply_job_inplace(z, xi, c.k, out, scratch));
        }
      });
  return {m.mean(), m.stderr_of_mean(), m.count};
}

std::vector<double> truncate_workloads(std::span<const double> workloads, double cap) {
  if (!(cap >= 0.0)) throw std::invalid_argument("frame cap must be non-negative");
  std::vector<double> out(workloads.begin(), workloads.end());
  for (double& w : out) w = std::min(w, cap);
  return out;
}

}  // namespace coc
