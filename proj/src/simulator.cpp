#include "coc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "coc/placement.hpp"

namespace coc {

namespace {

constexpr std::size_t kBatches = 20;

struct SeriesStats {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Batch-means standard error for an autocorrelated series.
SeriesStats batch_means(const std::vector<double>& v) {
  SeriesStats s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2 * kBatches) {
    if (v.size() < 2) return s;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    return s;
  }
  const std::size_t per = v.size() / kBatches;
  BlockMoments bm;
  for (std::size_t b = 0; b < kBatches; ++b) {
    double sum = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) sum += v[i];
    bm.add(sum / static_cast<double>(per));
  }
  s.stderr_ = bm.stderr_of_mean();
  return s;
}

double ls_slope(const std::vector<double>& t, const std::vector<double>& y, std::size_t begin,
                std::size_t end) {
  const double n = static_cast<double>(end - begin);
  double mt = 0.0, my = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    sxy += (t[i] - mt) * (y[i] - my);
    sxx += (t[i] - mt) * (t[i] - mt);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

std::string to_string(const Frame& f) {
  switch (f.mode) {
    case FrameMode::infinite: return "infinite";
    case FrameMode::free: return "free";
    case FrameMode::truncated: {
      std::ostringstream os;
      os << "truncated(" << f.cap << ")";
      return os.str();
    }
  }
  return "infinite";
}

std::string to_string(CriticalMethod m) {
  return m == CriticalMethod::free_drift ? "free_drift" : "load_bisection";
}

void SimConfig::validate() const {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  if (static_cast<int>(n) < mix.dbar()) throw std::invalid_argument("n must be at least max_j d_j");
  if (!(mix.lambda >= 0.0) || !std::isfinite(mix.lambda))
    throw std::invalid_argument("lambda must be finite and non-negative");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
  const double w = effective_warmup();
  if (!(w >= 0.0) || !(w < horizon)) throw std::invalid_argument("warmup must satisfy 0 <= warmup < horizon");
  if (!(sample_interval > 0.0)) throw std::invalid_argument("sample_interval must be positive");
  if (tagged > n) throw std::invalid_argument("tagged must not exceed n");
  if (frame.mode == FrameMode::truncated && !(frame.cap >= 0.0))
    throw std::invalid_argument("frame cap must be non-negative");
  Grid::make(grid.step, grid.max);
}

double phi_ell(std::span<const double> workloads, int ell) {
  if (ell < 1) throw std::invalid_argument("ell must be at least 1");
  if (workloads.empty()) return 0.0;
  const double n = static_cast<double>(workloads.size());
  const double mean = std::accumulate(workloads.begin(), workloads.end(), 0.0) / n;
  double s = 0.0;
  for (double w : workloads) s += std::pow(std::abs(w - mean), ell);
  return s / n;
}

SimMetrics run_simulation(const SimConfig& config) {
  return run_simulation(config, RngStream(config.seed));
}

SimMetrics run_simulation(const SimConfig& config, const RngStream& stream) {
  config.validate();
  const std::size_t n = config.n;
  const ClassMix& mix = config.mix;
  const bool floored = config.frame.mode != FrameMode::free;
  const bool truncate = config.frame.mode == FrameMode::truncated;
  const double cap = config.frame.cap;
  const double warmup = config.effective_warmup();
  const double horizon = config.horizon;
  const double interval = config.sample_interval;
  const double total_rate = mix.lambda * static_cast<double>(n);
  const Grid& grid = config.grid;

  RngStream arrivals = stream.child(0);
  RngStream jobs = stream.child(1);

  std::vector<double> stored(n, 0.0), stamp(n, 0.0), current(n, 0.0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const auto dmax = static_cast<std::size_t>(std::max(mix.dbar(), 1));
  std::vector<std::size_t> sel(dmax);
  std::vector<double> wl(dmax), xi(dmax), out(dmax), scratch(dmax);

  SimMetrics m;
  std::vector<std::size_t> counts(grid.nodes(), 0);
  std::vector<double> load_series, phi_series, mean_series;
  BlockMoments added;

  auto effective = [&](std::size_t i, double t) {
    const double v = stored[i] - (t - stamp[i]);
    return floored ? std::max(v, 0.0) : v;
  };

  auto snapshot = [&](double t) {
    double sum = 0.0, mx = -std::numeric_limits<double>::infinity();
    std::size_t busy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      current[i] = effective(i, t);
      sum += current[i];
      mx = std::max(mx, current[i]);
      if (current[i] > 0.0) ++busy;
    }
    const double mean = sum / static_cast<double>(n);
    if (floored && config.workload_ceiling && mean > *config.workload_ceiling) {
      m.aborted = true;
      return;
    }
    if (t < warmup) return;
    accumulate_exceedance(current, grid, counts);
    load_series.push_back(static_cast<double>(busy) / static_cast<double>(n));
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) dev += std::abs(current[i] - mean);
    phi_series.push_back(dev / static_cast<double>(n));
    mean_series.push_back(mean);
    m.snapshot_times.push_back(t);
    m.max_workload = m.snapshot_times.size() == 1 ? mx : std::max(m.max_workload, mx);
    if (config.tagged > 0) m.tagged_samples.emplace_back(current.begin(), current.begin() + config.tagged);
  };

  const double inf = std::numeric_limits<double>::infinity();
  double next_arrival = total_rate > 0.0 ? arrivals.exponential() / total_rate : inf;
  std::size_t k = 1;
  double t_end = horizon;
  while (true) {
    const double snap_t = static_cast<double>(k) * interval;
    if (snap_t <= horizon && snap_t <= next_arrival) {
      snapshot(snap_t);
      ++k;
      if (m.aborted) {
        t_end = snap_t;
        break;
      }
      continue;
    }
    if (next_arrival > horizon) break;

    const double t = next_arrival;
    ++m.arrivals;
    const JobClass& c = mix.classes[draw_index(mix.probabilities, jobs)];
    if (!c.is_empty()) {
      const auto d = static_cast<std::size_t>(c.d);
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t r = i + static_cast<std::size_t>(jobs.below(n - i));
        std::swap(perm[i], perm[r]);
        sel[i] = perm[i];
        wl[i] = effective(sel[i], t);
      }
      c.sizes.sample(jobs, std::span<double>(xi.data(), d));
      apply_job_inplace(std::span<const double>(wl.data(), d), std::span<const double>(xi.data(), d),
                        c.k, std::span<double>(out.data(), d), std::span<double>(scratch.data(), d));
      double total = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        if (truncate) out[i] = std::min(out[i], cap);
        total += out[i] - wl[i];
        stored[sel[i]] = out[i];
        stamp[sel[i]] = t;
      }
      if (t >= warmup) added.add(total);
    } else if (t >= warmup) {
      added.add(0.0);
    }
    next_arrival = t + arrivals.exponential() / total_rate;
  }
  m.end_time = t_end;

  const std::size_t snaps = load_series.size();
  m.empirical_ccdf = Ccdf{grid.step, std::vector<double>(grid.nodes(), 0.0), 0.0};
  if (snaps > 0) {
    const double denom = static_cast<double>(n) * static_cast<double>(snaps);
    std::size_t above = 0;
    for (std::size_t i = counts.size(); i-- > 0;) {
      above += counts[i];
      m.empirical_ccdf.values[i] = static_cast<double>(above) / denom;
    }
    m.empirical_ccdf.tail = m.empirical_ccdf.values.back();
  }
  const SeriesStats load = batch_means(load_series);
  const SeriesStats phi = batch_means(phi_series);
  const SeriesStats mean = batch_means(mean_series);
  // Identical to the ccdf value at 0 up to summation order; keep them equal.
  m.load = m.empirical_ccdf.values.empty() ? load.mean : m.empirical_ccdf.values[0];
  m.load_stderr = load.stderr_;
  m.phi1 = phi.mean;
  m.phi1_stderr = phi.stderr_;
  m.mean_workload = mean.mean;
  m.added_per_job = added.mean();
  m.added_per_job_stderr = added.stderr_of_mean();
  m.jobs_measured = added.count;

  if (config.frame.mode == FrameMode::free && snaps >= 2) {
    m.drift = ls_slope(m.snapshot_times, mean_series, 0, snaps);
    if (snaps >= 2 * kBatches) {
      const std::size_t per = snaps / kBatches;
      BlockMoments rates;
      for (std::size_t b = 0; b < kBatches; ++b) {
        const std::size_t i0 = b * per, i1 = (b + 1) * per - 1;
        rates.add((mean_series[i1] - mean_series[i0]) /
                  (m.snapshot_times[i1] - m.snapshot_times[i0]));
      }
      m.drift_stderr = rates.stderr_of_mean();
    } else {
      m.drift_stderr = 0.0;
    }
  }
  return m;
}

std::vector<SimMetrics> run_replications(const SimConfig& config, std::size_t count, Exec exec) {
  config.validate();
  std::vector<SimMetrics> out(count);
  const RngStream root(config.seed);
  const auto nc = static_cast<long long>(count);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long r = 0; r < nc; ++r)
      out[static_cast<std::size_t>(r)] = run_simulation(config, root.child(static_cast<std::uint64_t>(r)));
  } else {
    for (long long r = 0; r < nc; ++r)
      out[static_cast<std::size_t>(r)] = run_simulation(config, root.child(static_cast<std::uint64_t>(r)));
  }
  return out;
}

CriticalEstimate estimate_critical_lambda_n(std::size_t n, const ClassMix& mix,
                                            const CriticalOptions& options) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(options.lambda_lo >= 0.0) || !(options.lambda_hi > options.lambda_lo))
    throw std::invalid_argument("lambda range must satisfy 0 <= lo < hi");

  SimConfig base;
  base.n = n;
  base.mix = mix;
  base.horizon = options.horizon;
  base.warmup = options.warmup;
  base.sample_interval = options.sample_interval;
  base.seed = options.seed;
  base.grid = options.grid;
  const bool drift_mode = options.method == CriticalMethod::free_drift;
  if (drift_mode) {
    base.frame = Frame::free_system();
  } else {
    base.frame = Frame::infinite();
    base.workload_ceiling = options.workload_ceiling
                                ? *options.workload_ceiling
                                : 50.0 * mix.dbar() * mix.max_component_mean() / options.eps_load;
  }

  CriticalEstimate est;
  est.method = options.method;
  double last_se = 0.0;
  // Returns (unstable?, drift or load) at rate lambda.
  auto probe = [&](double lambda) {
    SimConfig cfg = base;
    cfg.mix = mix.with_lambda(lambda);
    const SimMetrics m = run_simulation(cfg);
    ++est.evaluations;
    if (drift_mode) {
      last_se = m.drift_stderr.value_or(0.0);
      return m.drift.value_or(-1.0) >= 0.0;
    }
    return m.aborted || m.load >= 1.0 - options.eps_load;
  };

  double lo = options.lambda_lo, hi = options.lambda_hi;
  if (probe(lo)) throw BracketError("lower end of the lambda range is already unstable");
  if (!probe(hi)) throw BracketError("upper end of the lambda range is still stable");
  while (hi - lo > options.tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  est.lower = lo;
  est.upper = hi;
  est.lambda = 0.5 * (lo + hi);
  est.half_width = 0.5 * (hi - lo);
  if (drift_mode) {
    // Convert the drift error into a rate error with the drift slope 1/lambda at the crossing.
    est.half_width = std::max(est.half_width, last_se * est.lambda);
  }
  return est;
}

}  // namespace coc
