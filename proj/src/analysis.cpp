#include "coc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coc/placement.hpp"

namespace coc {

namespace {

bool levy_holds(const Ccdf& x, const Ccdf& y, double eps) {
  constexpr double slack = 1e-12;
  auto check = [&](double w) {
    const double xv = x.at(w);
    return y.at(w + eps) - eps <= xv + slack && xv <= y.at(w - eps) + eps + slack;
  };
  // All three step functions are constant between consecutive breakpoints
  // (nodes of x, nodes of y shifted by -eps and +eps, one step past each grid
  // end), so one interior point per interval decides.
  std::vector<double> pts;
  pts.reserve(x.size() + 2 * y.size() + 6);
  for (std::size_t i = 0; i <= x.size(); ++i) pts.push_back(static_cast<double>(i) * x.step);
  for (std::size_t j = 0; j <= y.size(); ++j) {
    const double w = static_cast<double>(j) * y.step;
    pts.push_back(w - eps);
    pts.push_back(w + eps);
  }
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    if (pts[i + 1] > pts[i] && !check(0.5 * (pts[i] + pts[i + 1]))) return false;
  return check(pts.back() + std::max(x.step, y.step));
}

}  // namespace

double levy_distance(const Ccdf& x, const Ccdf& y) {
  if (levy_holds(x, y, 0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 64 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (levy_holds(x, y, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double IndependenceReport::max_abs_correlation() const {
  double m = 0.0;
  for (std::size_t i = 0; i < correlations.size(); ++i)
    for (std::size_t j = 0; j < correlations.size(); ++j)
      if (i != j) m = std::max(m, std::abs(correlations[i][j]));
  return m;
}

bool IndependenceReport::any_degenerate() const {
  return std::any_of(degenerate.begin(), degenerate.end(), [](bool b) { return b; });
}

namespace {

std::vector<double> thresholds_of(std::vector<double> v) {
  constexpr std::size_t kMax = 256;
  std::sort(v.begin(), v.end());
  std::vector<double> t;
  const std::size_t n = v.size();
  std::vector<double> uniq(v.begin(), v.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() <= kMax) return uniq;
  for (std::size_t q = 0; q < kMax; ++q) t.push_back(v[(q + 1) * n / kMax - 1]);
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

}  // namespace

IndependenceReport independence_report(const std::vector<std::vector<double>>& samples) {
  if (samples.size() < 30) throw std::invalid_argument("independence report needs at least 30 samples");
  const std::size_t m = samples[0].size();
  if (m < 2) throw std::invalid_argument("independence report needs at least 2 coordinates");
  for (const auto& s : samples)
    if (s.size() != m) throw std::invalid_argument("samples have unequal lengths");
  const std::size_t n = samples.size();
  const double nd = static_cast<double>(n);

  IndependenceReport r;
  r.sample_count = n;
  std::vector<double> mean(m, 0.0), sd(m, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < m; ++i) mean[i] += s[i];
  for (auto& v : mean) v /= nd;
  for (const auto& s : samples)
    for (std::size_t i = 0; i < m; ++i) sd[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
  r.degenerate.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    sd[i] = std::sqrt(sd[i] / nd);
    r.degenerate[i] = !(sd[i] > 0.0);
  }
  r.correlations.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    r.correlations[i][i] = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      double c = 0.0;
      if (!r.degenerate[i] && !r.degenerate[j]) {
        for (const auto& s : samples) c += (s[i] - mean[i]) * (s[j] - mean[j]);
        c = std::clamp(c / nd / (sd[i] * sd[j]), -1.0, 1.0);
      }
      r.correlations[i][j] = r.correlations[j][i] = c;
    }
  }

  std::vector<double> a(n), b(n);
  for (std::size_t s = 0; s < n; ++s) {
    a[s] = samples[s][0];
    b[s] = samples[s][1];
  }
  const std::vector<double> ta = thresholds_of(a), tb = thresholds_of(b);
  const std::size_t na = ta.size(), nb = tb.size();
  // cell[i][j] counts samples whose first thresholds at or above them are ta[i], tb[j].
  std::vector<std::size_t> cell((na + 1) * (nb + 1), 0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto i = static_cast<std::size_t>(std::lower_bound(ta.begin(), ta.end(), a[s]) - ta.begin());
    const auto j = static_cast<std::size_t>(std::lower_bound(tb.begin(), tb.end(), b[s]) - tb.begin());
    ++cell[i * (nb + 1) + j];
  }
  // prefix[i][j] = #{a <= ta[i], b <= tb[j]}
  std::vector<double> prefix(na * nb, 0.0);
  for (std::size_t i = 0; i < na; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      row += static_cast<double>(cell[i * (nb + 1) + j]);
      prefix[i * nb + j] = row + (i > 0 ? prefix[(i - 1) * nb + j] : 0.0);
    }
  }
  double ks = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const double fa = prefix[i * nb + nb - 1] / nd;
    for (std::size_t j = 0; j < nb; ++j) {
      const double fb = prefix[(na - 1) * nb + j] / nd;
      ks = std::max(ks, std::abs(prefix[i * nb + j] / nd - fa * fb));
    }
  }
  r.ks_product = ks;
  return r;
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::non_increasing: return "non_increasing";
    case Direction::non_decreasing: return "non_decreasing";
    case Direction::constant: return "constant";
    case Direction::violated: return "violated";
    case Direction::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::vector<std::vector<std::vector<double>>> default_chains(int d,
                                                             const std::vector<double>& offsets) {
  if (d < 1) throw std::invalid_argument("d must be at least 1");
  std::vector<double> sorted = offsets;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::vector<std::vector<double>>> chains;
  const auto ud = static_cast<std::size_t>(d);
  if (d == 1) {
    chains.push_back({std::vector<double>(1, 0.0)});
    return chains;
  }
  std::vector<std::vector<double>> all{std::vector<double>(ud, 0.0)};
  std::vector<std::vector<double>> last{std::vector<double>(ud, 0.0)};
  for (double s : sorted) {
    std::vector<double> a(ud, s), b(ud, 0.0);
    a[0] = 0.0;
    b[ud - 1] = s;
    all.push_back(std::move(a));
    last.push_back(std::move(b));
  }
  chains.push_back(std::move(all));
  if (d > 2) chains.push_back(std::move(last));
  return chains;
}

DMonotonicityVerdict dmono_scan(const JobClass& c,
                                const std::vector<std::vector<std::vector<double>>>& chains,
                                const RngStream& stream, const DMonoOptions& options,
                                std::string class_id) {
  if (options.samples < 2) throw std::invalid_argument("dmono_scan needs at least 2 samples");
  DMonotonicityVerdict v;
  v.class_id = std::move(class_id);
  const SizeDistribution* marginal = c.sizes.marginal();
  v.hazard = (!c.is_empty() && c.sizes.is_iid() && marginal) ? marginal->hazard() : HazardClass::unknown;

  // Validate and convert every chain to absolute workloads.
  std::vector<std::vector<std::vector<double>>> z(chains.size());
  for (std::size_t ci = 0; ci < chains.size(); ++ci) {
    const auto& chain = chains[ci];
    if (chain.empty()) throw std::invalid_argument("empty chain");
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (static_cast<int>(chain[i].size()) != c.d)
        throw std::invalid_argument("offset vector length must equal d");
      z[ci].push_back(offsets_to_workloads(chain[i]));
      if (i > 0)
        for (std::size_t k = 0; k < chain[i].size(); ++k)
          if (chain[i][k] < chain[i - 1][k]) throw std::invalid_argument("chain is not ordered");
    }
  }

  const auto d = static_cast<std::size_t>(std::max(c.d, 1));
  const std::size_t blocks = block_count(options.samples);
  v.points.resize(chains.size());
  for (std::size_t ci = 0; ci < chains.size(); ++ci) {
    const std::size_t len = chains[ci].size();
    // Per block: len point moments, then len-1 consecutive steps, then first-to-last.
    const std::size_t slots = 2 * len;
    std::vector<std::vector<BlockMoments>> parts(blocks, std::vector<BlockMoments>(slots));
    auto run_block = [&](std::size_t b) {
      RngStream rng = stream.child(b);
      const std::size_t begin = b * kMcBlock;
      const std::size_t count = std::min(options.samples, begin + kMcBlock) - begin;
      std::vector<double> xi(d), out(d), scratch(d), eta(len);
      for (std::size_t s = 0; s < count; ++s) {
        if (c.is_empty()) {
          std::fill(eta.begin(), eta.end(), 0.0);
        } else {
          c.sizes.sample(rng, xi);
          for (std::size_t i = 0; i < len; ++i)
            eta[i] = apply_job_inplace(z[ci][i], xi, c.k, out, scratch);
        }
        auto& acc = parts[b];
        for (std::size_t i = 0; i < len; ++i) acc[i].add(eta[i]);
        for (std::size_t i = 0; i + 1 < len; ++i) acc[len + i].add(eta[i + 1] - eta[i]);
        acc[2 * len - 1].add(eta[len - 1] - eta[0]);
      }
    };
    const auto nb = static_cast<long long>(blocks);
    if (options.exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
      for (long long b = 0; b < nb; ++b) run_block(static_cast<std::size_t>(b));
    } else {
      for (long long b = 0; b < nb; ++b) run_block(static_cast<std::size_t>(b));
    }
    std::vector<BlockMoments> total(slots);
    for (const auto& p : parts)
      for (std::size_t k = 0; k < slots; ++k) total[k].merge(p[k]);
    for (std::size_t i = 0; i < len; ++i)
      v.points[ci].push_back({chains[ci][i], total[i].mean(), total[i].stderr_of_mean()});
    for (std::size_t i = 0; i + 1 < len; ++i)
      v.steps.push_back({ci, i, i + 1, total[len + i].mean(), total[len + i].stderr_of_mean()});
    if (len > 2)
      v.steps.push_back({ci, 0, len - 1, total[2 * len - 1].mean(), total[2 * len - 1].stderr_of_mean()});
  }

  bool first = true;
  for (const auto& chain : v.points)
    for (const auto& p : chain)
      if (first || p.mean > v.sup_mean) {
        v.sup_mean = p.mean;
        v.sup_stderr = p.stderr_;
        first = false;
      }

  // Signed separation of a step in standard errors; 0 when within noise or rounding.
  auto separation = [&](const DMonoStep& s) {
    const double level = std::abs(v.points[s.chain][s.from].mean);
    if (std::abs(s.difference) <= 1e-9 * (1.0 + level)) return 0.0;
    if (std::abs(s.difference) <= options.sigmas * s.stderr_) return 0.0;
    return s.stderr_ > 0.0 ? s.difference / s.stderr_ : std::copysign(1e300, s.difference);
  };
  const DMonoStep* strongest_up = nullptr;
  const DMonoStep* strongest_down = nullptr;
  double up = 0.0, down = 0.0;
  double worst_relative = 0.0;
  for (const auto& s : v.steps) {
    const double sep = separation(s);
    if (sep > up) {
      up = sep;
      strongest_up = &s;
    }
    if (-sep > down) {
      down = -sep;
      strongest_down = &s;
    }
    const double level = std::abs(v.points[s.chain][s.from].mean);
    if (s.stderr_ > 0.0) worst_relative = std::max(worst_relative, s.stderr_ / std::max(level, 1e-300));
  }

  const bool expect_down = v.hazard == HazardClass::ihr;
  const bool expect_up = v.hazard == HazardClass::dhr;
  const bool expect_flat = v.hazard == HazardClass::constant;
  if (strongest_up && strongest_down) {
    v.direction = Direction::violated;
    v.witness = expect_down ? *strongest_up : *strongest_down;
  } else if (strongest_up && (expect_down || expect_flat)) {
    v.direction = Direction::violated;
    v.witness = *strongest_up;
  } else if (strongest_down && (expect_up || expect_flat)) {
    v.direction = Direction::violated;
    v.witness = *strongest_down;
  } else if (strongest_down) {
    v.direction = Direction::non_increasing;
    v.witness = *strongest_down;
  } else if (strongest_up) {
    v.direction = Direction::non_decreasing;
    v.witness = *strongest_up;
  } else {
    v.direction = worst_relative <= options.max_relative_stderr ? Direction::constant
                                                                : Direction::inconclusive;
  }
  return v;
}

SubcriticalityReport inherent_subcriticality(const ClassMix& mix,
                                             const std::vector<BoundMode>& modes) {
  if (modes.size() != 1 && modes.size() != mix.classes.size())
    throw std::invalid_argument("give one bound mode, or one per class");
  SubcriticalityReport r;
  double sum = 0.0;
  for (std::size_t j = 0; j < mix.classes.size(); ++j) {
    const JobClass& c = mix.classes[j];
    const BoundMode mode = modes.size() == 1 ? modes[0] : modes[j];
    double s = 0.0;
    if (!c.is_empty()) {
      if (mode == BoundMode::dhr_tight) {
        const SizeDistribution* marginal = c.sizes.marginal();
        const HazardClass h = (c.sizes.is_iid() && marginal) ? marginal->hazard() : HazardClass::unknown;
        if (h != HazardClass::dhr && h != HazardClass::constant)
          throw std::invalid_argument("dhr_tight bound needs an iid DHR or constant-hazard class");
        s = c.k * c.component_mean();
      } else {
        s = c.d * c.component_mean();
      }
    }
    r.s_bar.push_back(s);
    sum += mix.probabilities[j] * s;
  }
  r.rho_bar = mix.lambda * sum;
  r.subcritical = r.rho_bar < 1.0;
  return r;
}

ComparisonReport compare_ccdf_to_fp(const Ccdf& empirical, double load, const FixedPointResult& fp) {
  if (fp.supercritical()) throw std::invalid_argument("cannot compare against a supercritical verdict");
  ComparisonReport r;
  r.levy = levy_distance(empirical, fp.x);
  r.sup = sup_distance(empirical, fp.x);
  r.load_gap = std::abs(load - fp.rho);
  return r;
}

ComparisonReport compare_sim_to_fp(const SimMetrics& metrics, const FixedPointResult& fp) {
  return compare_ccdf_to_fp(metrics.empirical_ccdf, metrics.load, fp);
}

}  // namespace coc
