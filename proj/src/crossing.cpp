#include "coc/crossing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace coc {

double binomial_cdf(int n, double p, int m) {
  if (m < 0) return 0.0;
  if (m >= n) return 1.0;
  p = std::clamp(p, 0.0, 1.0);
  const double q = 1.0 - p;
  double term = std::pow(q, n);  // l = 0
  double sum = term;
  for (int l = 1; l <= m; ++l) {
    if (q == 0.0) {
      term = (l == n) ? 1.0 : 0.0;
    } else {
      term *= (static_cast<double>(n - l + 1) / l) * (p / q);
    }
    sum += term;
  }
  return std::min(sum, 1.0);
}

namespace {

struct ClassTables {
  double weight = 0.0;  // pi_j * d_j
  int d = 0;
  int k = 0;
  std::vector<double> s_node;  // S(i*step)
  std::vector<double> s_half;  // S((i + 1/2)*step), direct mode only
  std::vector<SurvivalTerm> terms;
  std::vector<double> decay;       // exp(-rate*step)
  std::vector<double> half_decay;  // exp(-rate*step/2)
};

struct TermState {
  double a0 = 0.0;
  double a1 = 0.0;
  std::size_t next_out = 1;  // oldest cell still inside the term window
};

std::vector<ClassTables> build_tables(const ClassMix& mix, const Grid& grid, bool recursive) {
  const std::size_t nodes = grid.nodes();
  std::vector<ClassTables> tables;
  for (std::size_t j = 0; j < mix.classes.size(); ++j) {
    const JobClass& c = mix.classes[j];
    if (c.is_empty() || mix.probabilities[j] == 0.0) continue;
    const SizeDistribution* marginal = c.sizes.marginal();
    if (!c.sizes.is_iid() || marginal == nullptr)
      throw std::invalid_argument("closed-form h requires iid component sizes");
    ClassTables t;
    t.weight = mix.probabilities[j] * c.d;
    t.d = c.d;
    t.k = c.k;
    t.s_node.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) t.s_node[i] = marginal->survival(grid.at(i));
    if (recursive) {
      auto terms = marginal->survival_terms();
      if (!terms) throw std::invalid_argument("size law has no survival-term decomposition");
      t.terms = std::move(*terms);
      for (const auto& term : t.terms) {
        t.decay.push_back(std::exp(-term.rate * grid.step));
        t.half_decay.push_back(std::exp(-term.rate * grid.step * 0.5));
      }
    } else {
      t.s_half.resize(nodes);
      for (std::size_t i = 0; i < nodes; ++i)
        t.s_half[i] = marginal->survival((static_cast<double>(i) + 0.5) * grid.step);
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

double assemble_h(double weight, int d, int k, double q, double mass) {
  q = std::clamp(q, 0.0, std::max(0.0, mass));
  const double p = std::clamp(mass - q, 0.0, 1.0);
  return weight * q * binomial_cdf(d - 1, p, k - 1);
}

double assemble_h(const ClassTables& t, double q, double mass) {
  return assemble_h(t.weight, t.d, t.k, q, mass);
}

class ClosedFormMarcher final : public HMarcher {
 public:
  ClosedFormMarcher(const ClassMix& mix, const Grid& grid, bool recursive)
      : grid_(grid), recursive_(recursive), tables_(build_tables(mix, grid, recursive)) {
    nodes_ = grid.nodes();
    states_.resize(tables_.size());
    for (std::size_t j = 0; j < tables_.size(); ++j) states_[j].resize(tables_[j].terms.size());
    delta_.reserve(nodes_);
  }

  void reset(double x0) override {
    node_ = 0;
    x_ = x0;
    atom_ = 1.0 - x0;
    delta_.assign(1, 0.0);
    for (auto& s : states_)
      for (auto& ts : s) ts = TermState{};
    h_ = evaluate_current();
  }

  [[nodiscard]] double h() const override { return h_; }

  double peek(double next) override {
    if (node_ + 1 >= nodes_) throw std::out_of_range("marcher ran past the grid");
    const double cell = x_ - next;
    const std::size_t i = node_ + 1;
    const double mass = 1.0 - next;
    double h = 0.0;
    for (std::size_t j = 0; j < tables_.size(); ++j) {
      const ClassTables& t = tables_[j];
      double q = atom_ * t.s_node[i];
      if (recursive_) {
        for (std::size_t u = 0; u < t.terms.size(); ++u) {
          TermState ts = states_[j][u];
          step_term(t, u, ts, i, cell);
          q += t.terms[u].c0 * ts.a0 + t.terms[u].c1 * ts.a1;
        }
      } else {
        q += direct_sum(t, i, cell);
      }
      h += assemble_h(t, q, mass);
    }
    return h;
  }

  void advance(double next) override {
    if (node_ + 1 >= nodes_) throw std::out_of_range("marcher ran past the grid");
    const double cell = x_ - next;
    const std::size_t i = node_ + 1;
    if (recursive_) {
      for (std::size_t j = 0; j < tables_.size(); ++j)
        for (std::size_t u = 0; u < tables_[j].terms.size(); ++u)
          step_term(tables_[j], u, states_[j][u], i, cell);
    }
    delta_.push_back(cell);
    node_ = i;
    x_ = next;
    h_ = evaluate_current();
  }

  [[nodiscard]] std::size_t node() const override { return node_; }

 private:
  // Ages every cell by one step, adds the cell ending at node i, drops cells
  // whose age left the term window.
  void step_term(const ClassTables& t, std::size_t u, TermState& ts, std::size_t i,
                 double cell) const {
    const SurvivalTerm& term = t.terms[u];
    const double e = t.decay[u];
    ts.a1 = e * (ts.a1 + grid_.step * ts.a0);
    ts.a0 = e * ts.a0;
    const double eh = t.half_decay[u];
    ts.a0 += cell * eh;
    ts.a1 += cell * 0.5 * grid_.step * eh;
    if (std::isfinite(term.end)) {
      while (ts.next_out <= i) {
        const double age = (static_cast<double>(i - ts.next_out) + 0.5) * grid_.step;
        if (age < term.end) break;
        const double dm = ts.next_out == i ? cell : delta_[ts.next_out];
        const double ex = std::exp(-term.rate * age);
        ts.a0 -= dm * ex;
        ts.a1 -= dm * age * ex;
        ++ts.next_out;
      }
    }
  }

  // Cells 1..i-1 from history plus `cell` as cell i.
  double direct_sum(const ClassTables& t, std::size_t i, double cell) const {
    double s = cell * t.s_half[0];
    for (std::size_t m = 1; m < i; ++m) s += delta_[m] * t.s_half[i - m];
    return s;
  }

  double evaluate_current() const {
    const double mass = 1.0 - x_;
    double h = 0.0;
    for (std::size_t j = 0; j < tables_.size(); ++j) {
      const ClassTables& t = tables_[j];
      double q = atom_ * t.s_node[node_];
      if (recursive_) {
        for (std::size_t u = 0; u < t.terms.size(); ++u)
          q += t.terms[u].c0 * states_[j][u].a0 + t.terms[u].c1 * states_[j][u].a1;
      } else if (node_ > 0) {
        q += direct_sum(t, node_, delta_[node_]);
      }
      h += assemble_h(t, q, mass);
    }
    return h;
  }

  Grid grid_;
  bool recursive_;
  std::vector<ClassTables> tables_;
  std::vector<std::vector<TermState>> states_;
  std::vector<double> delta_;  // delta_[m] = x_{m-1} - x_m, m >= 1
  std::size_t nodes_ = 0;
  std::size_t node_ = 0;
  double x_ = 0.0;
  double atom_ = 1.0;
  double h_ = 0.0;
};

// Tracks, for every pooled arrival, how many of its components have
// completed and how many are crossing the current level. Components enter
// when their workload quantile is resolved and leave the crossing state
// at W + xi, so each node costs only the events it contains.
class PoolMarcher final : public HMarcher {
 public:
  PoolMarcher(const ClassMix& mix, const Grid& grid, std::size_t samples, const RngStream& stream)
      : grid_(grid), nodes_(grid.nodes()), samples_(samples) {
    if (samples < 1) throw std::invalid_argument("pool marcher needs samples >= 1");
    RngStream rng = stream;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t j = draw_index(mix.probabilities, rng);
      const JobClass& c = mix.classes[j];
      sample_k_.push_back(c.k);
      if (!c.is_empty()) {
        std::vector<double> xi = c.sizes.sample(rng);
        for (int i = 0; i < c.d; ++i) {
          quantile_.push_back(rng.uniform());
          size_.push_back(xi[static_cast<std::size_t>(i)]);
          owner_.push_back(s);
        }
      }
    }
    order_.resize(quantile_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return quantile_[a] > quantile_[b]; });
    completed_.assign(samples, 0);
    crossing_.assign(samples, 0);
    touched_.assign(samples, 0);
  }

  void reset(double x0) override {
    std::fill(completed_.begin(), completed_.end(), 0);
    std::fill(crossing_.begin(), crossing_.end(), 0);
    pending_ = Heap{};
    total_ = 0;
    resolved_ = 0;
    node_ = 0;
    x_ = x0;
    // Quantiles u >= x0 fall in the atom at zero.
    while (resolved_ < order_.size() && quantile_[order_[resolved_]] >= x0) {
      enter(order_[resolved_], 0.0, 0.0, true);
      ++resolved_;
    }
    h_ = static_cast<double>(total_) / static_cast<double>(samples_);
  }

  [[nodiscard]] double h() const override { return h_; }

  double peek(double next) override {
    check_room();
    const double level = grid_.at(node_ + 1);
    const long long saved_total = total_;
    journal_.clear();
    for (std::size_t r = resolved_; r < order_.size(); ++r) {
      const std::size_t c = order_[r];
      if (quantile_[c] < next) break;
      remember(owner_[c]);
      enter(c, interpolate(c, next), level, false);
    }
    popped_.clear();
    while (!pending_.empty() && pending_.top().first <= level) {
      popped_.push_back(pending_.top());
      pending_.pop();
      remember(owner_[popped_.back().second]);
      complete(owner_[popped_.back().second]);
    }
    const double h = static_cast<double>(total_) / static_cast<double>(samples_);
    for (const auto& e : popped_) pending_.push(e);
    for (const auto& j : journal_) {
      completed_[j.sample] = j.completed;
      crossing_[j.sample] = j.crossing;
      touched_[j.sample] = 0;
    }
    total_ = saved_total;
    return h;
  }

  void advance(double next) override {
    check_room();
    const double level = grid_.at(node_ + 1);
    while (resolved_ < order_.size() && quantile_[order_[resolved_]] >= next) {
      const std::size_t c = order_[resolved_];
      enter(c, interpolate(c, next), level, true);
      ++resolved_;
    }
    while (!pending_.empty() && pending_.top().first <= level) {
      complete(owner_[pending_.top().second]);
      pending_.pop();
    }
    ++node_;
    x_ = next;
    h_ = static_cast<double>(total_) / static_cast<double>(samples_);
  }

  [[nodiscard]] std::size_t node() const override { return node_; }

 private:
  using Event = std::pair<double, std::size_t>;
  using Heap = std::priority_queue<Event, std::vector<Event>, std::greater<>>;
  struct Saved {
    std::size_t sample;
    int completed;
    int crossing;
  };

  void check_room() const {
    if (node_ + 1 >= nodes_) throw std::out_of_range("marcher ran past the grid");
  }

  // Workload of component c inside the cell (node_, node_+1], linear in the quantile.
  double interpolate(std::size_t c, double next) const {
    const double frac = x_ > next ? (x_ - quantile_[c]) / (x_ - next) : 1.0;
    return grid_.at(node_) + grid_.step * std::clamp(frac, 0.0, 1.0);
  }

  long long contribution(std::size_t s) const {
    return completed_[s] < sample_k_[s] ? crossing_[s] : 0;
  }

  void enter(std::size_t c, double workload, double level, bool commit) {
    const std::size_t s = owner_[c];
    total_ -= contribution(s);
    const double done = workload + size_[c];
    if (done <= level) {
      ++completed_[s];
    } else {
      ++crossing_[s];
      if (commit) pending_.emplace(done, c);
    }
    total_ += contribution(s);
  }

  void complete(std::size_t s) {
    total_ -= contribution(s);
    --crossing_[s];
    ++completed_[s];
    total_ += contribution(s);
  }

  void remember(std::size_t s) {
    if (touched_[s]) return;
    touched_[s] = 1;
    journal_.push_back({s, completed_[s], crossing_[s]});
  }

  Grid grid_;
  std::size_t nodes_;
  std::size_t samples_;
  std::vector<int> sample_k_;
  std::vector<double> quantile_;
  std::vector<double> size_;
  std::vector<std::size_t> owner_;
  std::vector<std::size_t> order_;
  std::vector<int> completed_;
  std::vector<int> crossing_;
  std::vector<char> touched_;
  std::vector<Saved> journal_;
  std::vector<Event> popped_;
  Heap pending_;
  long long total_ = 0;
  std::size_t resolved_ = 0;
  std::size_t node_ = 0;
  double x_ = 0.0;
  double h_ = 0.0;
};

}  // namespace

bool recursive_kernel_available(const ClassMix& mix) {
  for (std::size_t j = 0; j < mix.classes.size(); ++j) {
    const JobClass& c = mix.classes[j];
    if (c.is_empty() || mix.probabilities[j] == 0.0) continue;
    if (!c.sizes.is_iid() || !c.sizes.marginal()->survival_terms()) return false;
  }
  return true;
}

std::unique_ptr<HMarcher> make_closed_form_marcher(const ClassMix& mix, const Grid& grid,
                                                   KernelMode mode) {
  bool recursive = false;
  switch (mode) {
    case KernelMode::automatic: recursive = recursive_kernel_available(mix); break;
    case KernelMode::recursive: recursive = true; break;
    case KernelMode::direct: recursive = false; break;
  }
  return std::make_unique<ClosedFormMarcher>(mix, grid, recursive);
}

std::unique_ptr<HMarcher> make_pool_marcher(const ClassMix& mix, const Grid& grid,
                                            std::size_t samples, const RngStream& stream) {
  return std::make_unique<PoolMarcher>(mix, grid, samples, stream);
}

double crossing_rate_at(const Ccdf& x, std::size_t node, const ClassMix& mix) {
  if (node >= x.size()) throw std::out_of_range("node outside the ccdf grid");
  const double atom = 1.0 - x.values[0];
  const double mass = 1.0 - x.values[node];
  const double w = static_cast<double>(node) * x.step;
  double h = 0.0;
  for (std::size_t j = 0; j < mix.classes.size(); ++j) {
    const JobClass& c = mix.classes[j];
    if (c.is_empty() || mix.probabilities[j] == 0.0) continue;
    const SizeDistribution* marginal = c.sizes.marginal();
    if (!c.sizes.is_iid() || marginal == nullptr)
      throw std::invalid_argument("closed-form h requires iid component sizes");
    double q = atom * marginal->survival(w);
    for (std::size_t m = 1; m <= node; ++m)
      q += (x.values[m - 1] - x.values[m]) *
           marginal->survival((static_cast<double>(node - m) + 0.5) * x.step);
    h += assemble_h(mix.probabilities[j] * c.d, c.d, c.k, q, mass);
  }
  return h;
}

std::vector<double> crossing_profile(const Ccdf& x, const ClassMix& mix, KernelMode mode,
                                     Exec exec) {
  const Grid grid{x.step, x.max_w()};
  const std::size_t nodes = x.size();
  std::vector<double> h(nodes, 0.0);
  if (nodes == 0) return h;
  const bool recursive = mode == KernelMode::recursive ||
                         (mode == KernelMode::automatic && recursive_kernel_available(mix));
  if (recursive) {
    ClosedFormMarcher m(mix, grid, true);
    m.reset(x.values[0]);
    h[0] = m.h();
    for (std::size_t i = 1; i < nodes; ++i) {
      m.advance(x.values[i]);
      h[i] = m.h();
    }
    return h;
  }

  const std::vector<ClassTables> tables = build_tables(mix, grid, false);
  const double atom = 1.0 - x.values[0];
  const auto n = static_cast<long long>(nodes);
  auto node_h = [&](std::size_t i) {
    double out = 0.0;
    const double mass = 1.0 - x.values[i];
    for (const ClassTables& t : tables) {
      double q = atom * t.s_node[i];
      for (std::size_t m = 1; m <= i; ++m) q += (x.values[m - 1] - x.values[m]) * t.s_half[i - m];
      out += assemble_h(t, q, mass);
    }
    return out;
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (long long i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = node_h(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = node_h(static_cast<std::size_t>(i));
  }
  return h;
}

}  // namespace coc
