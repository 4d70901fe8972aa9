#include "coc/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kPoolPath = 0x706f6f6cULL;

FixedPointResult empty_result(const ClassMix& mix, const Grid& grid, std::optional<double> frame) {
  FixedPointResult r;
  r.x = Ccdf::empty_state(grid);
  r.lambda = mix.lambda;
  r.rho = 0.0;
  r.frame = frame;
  return r;
}

// h along a fully known x: closed form or a march of the pooled marcher.
std::vector<double> h_along(const Ccdf& x, const ClassMix& mix, const SolverOptions& options,
                            HMarcher* pool) {
  if (options.h_mode == HMode::closed_form) return crossing_profile(x, mix, options.kernel);
  std::vector<double> h(x.size(), 0.0);
  if (x.size() == 0) return h;
  pool->reset(x.values[0]);
  h[0] = pool->h();
  for (std::size_t i = 1; i < x.size(); ++i) {
    pool->advance(x.values[i]);
    h[i] = pool->h();
  }
  return h;
}

double residual_from_profile(const Ccdf& x, const std::vector<double>& h, double lambda,
                             std::size_t end_index) {
  const std::size_t end = std::min(end_index, x.size());
  double integral = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < end; ++i) {
    if (i > 0) integral += 0.5 * x.step * (h[i - 1] + h[i]);
    worst = std::max(worst, std::abs(x.values[i] - x.values[0] + lambda * integral));
  }
  return worst;
}

std::size_t frame_nodes(const Ccdf& x, double c) {
  // Nodes strictly below c.
  const double r = c / x.step;
  auto n = static_cast<std::size_t>(std::ceil(r - 1e-9));
  return std::min(n, x.size());
}

}  // namespace

Grid default_grid(const ClassMix& mix, double target_rho) {
  if (!(target_rho >= 0.0 && target_rho < 1.0))
    throw std::invalid_argument("target load must lie in [0, 1)");
  const double m = mix.max_component_mean();
  if (!(m > 0.0)) throw std::invalid_argument("mix has no positive component mean");
  const double step = m / 200.0;
  const double max = std::ceil(40.0 * m / (1.0 - target_rho) / step) * step;
  return Grid::make(step, max);
}

std::unique_ptr<HMarcher> make_marcher(const ClassMix& mix, const Grid& grid,
                                       const SolverOptions& options) {
  if (options.h_mode == HMode::closed_form)
    return make_closed_form_marcher(mix, grid, options.kernel);
  return make_pool_marcher(mix, grid, options.mc_samples, RngStream(options.seed, kPoolPath));
}

FdeTrajectory integrate_fde(double x0, const ClassMix& mix, const Grid& grid, HMarcher& marcher) {
  if (!(grid.step > 0.0)) throw std::invalid_argument("grid step must be positive");
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw std::invalid_argument("x0 must lie in [0, 1]");
  if (!(mix.lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  const std::size_t nodes = grid.nodes();
  FdeTrajectory t;
  t.x = Ccdf{grid.step, std::vector<double>(nodes, 0.0), 0.0};
  t.hit_location = kInf;
  if (x0 <= 0.0) {
    t.hit = true;
    t.hit_location = 0.0;
    return t;
  }
  const double lambda = mix.lambda;
  const double step = grid.step;
  t.x.values[0] = x0;
  marcher.reset(x0);
  for (std::size_t i = 0; i + 1 < nodes; ++i) {
    const double xi = t.x.values[i];
    const double hi = marcher.h();
    const double predicted = xi - step * lambda * hi;
    const double hp = marcher.peek(std::max(predicted, 0.0));
    double next = xi - step * lambda * 0.5 * (hi + hp);
    if (next <= 0.0) {
      t.hit = true;
      t.hit_location = static_cast<double>(i) * step + step * xi / (xi - next);
      return t;
    }
    next = std::min(next, xi);
    t.x.values[i + 1] = next;
    marcher.advance(next);
  }
  t.x.tail = t.x.values.back();
  return t;
}

FdeTrajectory integrate_fde(double x0, const ClassMix& mix, const Grid& grid,
                            const SolverOptions& options) {
  auto marcher = make_marcher(mix, grid, options);
  return integrate_fde(x0, mix, grid, *marcher);
}

double fde_residual(const Ccdf& x, const ClassMix& mix, std::size_t end_index,
                    const SolverOptions& options) {
  std::unique_ptr<HMarcher> pool;
  if (options.h_mode == HMode::monte_carlo)
    pool = make_marcher(mix, Grid{x.step, x.max_w()}, options);
  return residual_from_profile(x, h_along(x, mix, options, pool.get()), mix.lambda, end_index);
}

FixedPointResult solve_fp_finite_frame(double c, const ClassMix& mix, const Grid& grid,
                                       const SolverOptions& options) {
  if (!(c >= 0.0) || c > grid.max + 1e-9 * grid.step)
    throw std::invalid_argument("frame must lie inside the grid");
  if (mix.lambda == 0.0 || c == 0.0) return empty_result(mix, grid, c);

  auto marcher = make_marcher(mix, grid, options);
  double lo = 0.0, hi = 1.0;
  std::optional<FdeTrajectory> upper;
  int it = 0;
  while (hi - lo > options.tol && it < options.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    FdeTrajectory t = integrate_fde(mid, mix, grid, *marcher);
    ++it;
    if (t.hit && t.hit_location <= c) {
      lo = mid;
    } else {
      hi = mid;
      upper = std::move(t);
    }
  }
  if (!upper) throw SolverError("finite-frame bisection found no trajectory reaching past the frame");

  FixedPointResult r;
  r.x = std::move(upper->x);
  const std::size_t inside = frame_nodes(r.x, c);
  for (std::size_t i = inside; i < r.x.size(); ++i) r.x.values[i] = 0.0;
  r.x.tail = 0.0;
  r.lambda = mix.lambda;
  r.rho = r.x.values[0];
  r.frame = c;
  r.iterations = it;
  r.bracket_width = hi - lo;
  r.residual = fde_residual(r.x, mix, inside, options);
  return r;
}

FixedPointResult solve_fp_infinite(const ClassMix& mix, const Grid& grid,
                                   const SolverOptions& options) {
  if (!(mix.lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (mix.lambda == 0.0) return empty_result(mix, grid, std::nullopt);

  auto marcher = make_marcher(mix, grid, options);
  double lo = 0.0, hi = 1.0;
  std::optional<FdeTrajectory> lower;
  double upper_tail = 1.0;
  int it = 0;
  while (hi - lo > options.tol && it < options.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    FdeTrajectory t = integrate_fde(mid, mix, grid, *marcher);
    ++it;
    if (t.hit) {
      lo = mid;
      lower = std::move(t);
    } else {
      hi = mid;
      upper_tail = t.x.values.back();
    }
  }
  if (!lower)
    throw SolverError(
        "ambiguous classification: no trajectory reaches 0 inside the grid; increase grid.max");

  FixedPointResult r;
  r.lambda = mix.lambda;
  r.frame = std::nullopt;
  r.iterations = it;
  r.bracket_width = hi - lo;
  r.upper_tail = upper_tail;
  r.tail_resolved = upper_tail <= options.tail_eps;
  r.rho = lo;
  r.x = std::move(lower->x);
  r.x.tail = 0.0;
  if (1.0 - lo < options.collapse_eps) {
    r.status = FpStatus::supercritical;
    r.residual = 0.0;
    return r;
  }
  const auto end = static_cast<std::size_t>(std::floor(lower->hit_location / grid.step)) + 1;
  r.residual = fde_residual(r.x, mix, end, options);
  return r;
}

EvolveResult evolve_ml(const Ccdf& x_init, const ClassMix& mix, const EvolveOptions& options,
                       const SolverOptions& solver) {
  if (!x_init.is_valid()) throw std::invalid_argument("initial state is not a valid ccdf");
  const double step = x_init.step;
  const double dt = options.dt > 0.0 ? options.dt : 0.5 * step;
  if (dt > step * (1.0 + 1e-12)) throw std::invalid_argument("dt must not exceed the grid step");
  if (!(options.horizon >= 0.0)) throw std::invalid_argument("horizon must be non-negative");

  const std::size_t n = x_init.size();
  const std::size_t pinned = options.frame ? frame_nodes(x_init, *options.frame) : n;
  const double lambda = mix.lambda;
  std::unique_ptr<HMarcher> pool;
  if (solver.h_mode == HMode::monte_carlo)
    pool = make_marcher(mix, Grid{step, x_init.max_w()}, solver);

  EvolveResult out;
  Ccdf x = x_init;
  for (std::size_t i = pinned; i < n; ++i) x.values[i] = 0.0;
  if (options.frame) x.tail = 0.0;
  std::vector<double> next(n);
  const auto steps = static_cast<std::size_t>(std::ceil(options.horizon / dt - 1e-9));
  if (options.record_every > 0) {
    out.times.push_back(0.0);
    out.states.push_back(x);
  }
  double t = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const std::vector<double> h = h_along(x, mix, solver, pool.get());
    for (std::size_t i = 0; i < n; ++i) {
      const double right = i + 1 < n ? x.values[i + 1] : x.tail;
      const double h_right = i + 1 < n ? h[i + 1] : h[i];
      next[i] = x.values[i] + dt * ((right - x.values[i]) / step + lambda * 0.5 * (h[i] + h_right));
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v = std::clamp(next[i], 0.0, 1.0);
      if (i > 0) v = std::min(v, next[i - 1]);
      if (i >= pinned) v = 0.0;
      next[i] = v;
      change = std::max(change, std::abs(v - x.values[i]));
    }
    std::copy(next.begin(), next.end(), x.values.begin());
    t = static_cast<double>(s) * dt;
    out.final_rate = change / dt;
    out.steps = s;
    if (options.observer) options.observer(t, x);
    if (options.record_every > 0 && s % options.record_every == 0) {
      out.times.push_back(t);
      out.states.push_back(x);
    }
    if (options.stop_rate > 0.0 && out.final_rate < options.stop_rate) break;
  }
  out.final_time = t;
  out.final_state = std::move(x);
  return out;
}

LambdaBarResult estimate_lambda_bar(const ClassMix& mix, const Grid& grid, double tol,
                                    const SolverOptions& options) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  LambdaBarResult r;
  auto supercritical = [&](double lambda) {
    ++r.evaluations;
    return solve_fp_infinite(mix.with_lambda(lambda), grid, options).supercritical();
  };
  // Every job adds at most sum_j pi_j d_j E xi_j, so this rate is always stable.
  double work = 0.0;
  for (std::size_t j = 0; j < mix.classes.size(); ++j)
    work += mix.probabilities[j] * mix.classes[j].d * mix.classes[j].component_mean();
  if (!(work > 0.0)) throw std::invalid_argument("mix adds no work");
  double lo = 0.0, hi = 1.0 / work;
  int guard = 0;
  while (!supercritical(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 40) throw SolverError("no supercritical rate found while bracketing");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (supercritical(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  r.lower = lo;
  r.upper = hi;
  r.lambda_bar = 0.5 * (lo + hi);
  return r;
}

std::vector<RhoRow> rho_curve(const ClassMix& mix, const std::vector<double>& lambdas,
                              const Grid& grid, const SolverOptions& options, Exec exec) {
  std::vector<RhoRow> rows(lambdas.size());
  auto solve_row = [&](std::size_t i) {
    RhoRow& row = rows[i];
    row.lambda = lambdas[i];
    try {
      FixedPointResult fp = solve_fp_infinite(mix.with_lambda(lambdas[i]), grid, options);
      row.rho = fp.rho;
      row.status = fp.status;
      row.fp = std::move(fp);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };
  const auto n = static_cast<long long>(lambdas.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) solve_row(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < n; ++i) solve_row(static_cast<std::size_t>(i));
  }
  return rows;
}

double sample_from_ccdf(const Ccdf& x, double u) {
  if (x.values.empty()) return u < x.tail ? kInf : 0.0;
  if (u >= x.values[0]) return 0.0;
  if (u < x.tail) return kInf;
  if (u < x.values.back()) return x.max_w() + 0.5 * x.step;
  // Smallest i >= 1 with values[i] <= u.
  std::size_t lo = 0, hi = x.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (x.values[mid] <= u) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double above = x.values[hi - 1], below = x.values[hi];
  const double frac = above > below ? (above - u) / (above - below) : 1.0;
  return (static_cast<double>(hi - 1) + frac) * x.step;
}

double h_closed_form(const Ccdf& x, double w, const ClassMix& mix) {
  const Grid g{x.step, x.max_w()};
  return crossing_rate_at(x, g.index_of(w), mix);
}

McEstimate h_monte_carlo(const Ccdf& x, double w, const ClassMix& mix, std::size_t samples,
                         const RngStream& stream, Exec exec) {
  if (samples < 2) throw std::invalid_argument("h_monte_carlo needs at least 2 samples");
  const int dbar = std::max(mix.dbar(), 1);
  const BlockMoments m =
      run_blocks(samples, exec, [&](std::size_t b, std::size_t count, BlockMoments& acc) {
        RngStream rng = stream.child(b);
        std::vector<double> wl(dbar), xi(dbar), out(dbar), scratch(dbar);
        for (std::size_t s = 0; s < count; ++s) {
          const JobClass& c = mix.classes[draw_index(mix.probabilities, rng)];
          if (c.is_empty()) {
            acc.add(0.0);
            continue;
          }
          const auto d = static_cast<std::size_t>(c.d);
          for (std::size_t i = 0; i < d; ++i) wl[i] = sample_from_ccdf(x, rng.uniform());
          c.sizes.sample(rng, std::span<double>(xi.data(), d));
          apply_job_inplace(std::span<const double>(wl.data(), d),
                            std::span<const double>(xi.data(), d), c.k,
                            std::span<double>(out.data(), d), std::span<double>(scratch.data(), d));
          int crossing = 0;
          for (std::size_t i = 0; i < d; ++i)
            if (wl[i] <= w && out[i] > w) ++crossing;
          acc.add(crossing);
        }
      });
  return {m.mean(), m.stderr_of_mean(), m.count};
}

double sample_jump(const Ccdf& x, double w, const ClassMix& mix, RngStream& rng) {
  const std::vector<double> selection = mix.selection_probabilities();
  const JobClass& c = mix.classes[draw_index(selection, rng)];
  const auto d = static_cast<std::size_t>(c.d);
  std::vector<double> wl(d), xi(d), out(d), scratch(d);
  wl[0] = w;
  for (std::size_t i = 1; i < d; ++i) wl[i] = sample_from_ccdf(x, rng.uniform());
  c.sizes.sample(rng, xi);
  apply_job_inplace(wl, xi, c.k, out, scratch);
  return out[0] - w;
}

ConsistencyReport fp_consistency(const FixedPointResult& fp, const ClassMix& mix,
                                 std::size_t samples, const RngStream& stream, Exec exec) {
  if (fp.supercritical()) throw std::invalid_argument("fixed point is not proper");
  if (samples < 2) throw std::invalid_argument("fp_consistency needs at least 2 samples");
  const double cap = fp.frame ? *fp.frame : kInf;
  const int dbar = std::max(mix.dbar(), 1);
  const BlockMoments m =
      run_blocks(samples, exec, [&](std::size_t b, std::size_t count, BlockMoments& acc) {
        RngStream rng = stream.child(b);
        std::vector<double> wl(dbar), xi(dbar), out(dbar), scratch(dbar);
        for (std::size_t s = 0; s < count; ++s) {
          const JobClass& c = mix.classes[draw_index(mix.probabilities, rng)];
          if (c.is_empty()) {
            acc.add(0.0);
            continue;
          }
          const auto d = static_cast<std::size_t>(c.d);
          for (std::size_t i = 0; i < d; ++i) wl[i] = sample_from_ccdf(fp.x, rng.uniform());
          c.sizes.sample(rng, std::span<double>(xi.data(), d));
          apply_job_inplace(std::span<const double>(wl.data(), d),
                            std::span<const double>(xi.data(), d), c.k,
                            std::span<double>(out.data(), d), std::span<double>(scratch.data(), d));
          double added = 0.0;
          for (std::size_t i = 0; i < d; ++i) added += std::min(out[i], cap) - wl[i];
          acc.add(added);
        }
      });
  ConsistencyReport r;
  r.predicted_load = mix.lambda * m.mean();
  r.stderr_ = mix.lambda * m.stderr_of_mean();
  r.rho = fp.rho;
  r.discrepancy = std::abs(r.predicted_load - r.rho);
  r.within_3sigma = r.discrepancy <= 3.0 * r.stderr_ + 1e-12;
  return r;
}

Ccdf simulate_tagged_particle(const Ccdf& x, const ClassMix& mix, double horizon, RngStream& rng) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const std::size_t n = x.size();
  const double step = x.step;
  // occupation_i = sum over segments of min(max(y - w_i, 0), tau)
  std::vector<double> flat(n + 1, 0.0), offset(n + 1, 0.0), slope(n + 1, 0.0);
  auto record = [&](double y, double tau) {
    if (!(y > 0.0)) return;
    const double a_edge = y - tau;
    std::size_t a = 0;
    if (a_edge >= 0.0) a = std::min(n, static_cast<std::size_t>(std::floor(a_edge / step)) + 1);
    const std::size_t b = std::min(n, static_cast<std::size_t>(std::ceil(y / step)));
    flat[0] += tau;
    flat[a] -= tau;
    if (b > a) {
      offset[a] += y;
      offset[b] -= y;
      slope[a] += 1.0;
      slope[b] -= 1.0;
    }
  };

  const double alpha = mix.alpha();
  double pos = sample_from_ccdf(x, rng.uniform());
  if (!std::isfinite(pos)) pos = x.max_w();
  double t = 0.0;
  while (t < horizon) {
    double tau = alpha > 0.0 ? rng.exponential() / alpha : kInf;
    tau = std::min(tau, horizon - t);
    record(pos, tau);
    t += tau;
    pos = std::max(pos - tau, 0.0);
    if (t < horizon) pos += sample_jump(x, pos, mix, rng);
  }

  Ccdf out{step, std::vector<double>(n, 0.0), 0.0};
  double f = 0.0, o = 0.0, s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    f += flat[i];
    o += offset[i];
    s += slope[i];
    const double occ = f + o - s * static_cast<double>(i) * step;
    out.values[i] = std::clamp(occ / horizon, 0.0, 1.0);
    if (i > 0) out.values[i] = std::min(out.values[i], out.values[i - 1]);
  }
  out.tail = n > 0 ? out.values.back() : 0.0;
  return out;
}

}  // namespace coc
