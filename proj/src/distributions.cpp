#include "coc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Integral of (c0 + c1*y) exp(-r*y) over [0, L].
double term_integral(const SurvivalTerm& t, double L) {
  if (L <= 0.0) return 0.0;
  if (t.rate == 0.0) return t.c0 * L + 0.5 * t.c1 * L * L;
  const double e = std::exp(-t.rate * L);
  const double r = t.rate;
  return t.c0 * (1.0 - e) / r + t.c1 * (1.0 - e * (1.0 + r * L)) / (r * r);
}

// Composite Simpson on the survival function; used only for Weibull-based truncation.
double survival_integral(const SizeDistribution& d, double upper) {
  const int n = 20000;
  const double h = upper / n;
  double s = d.survival(0.0) + d.survival(upper);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * d.survival(i * h);
  return s * h / 3.0;
}

}  // namespace

std::string to_string(HazardClass h) {
  switch (h) {
    case HazardClass::ihr: return "IHR";
    case HazardClass::dhr: return "DHR";
    case HazardClass::constant: return "constant";
    case HazardClass::unknown: return "unknown";
  }
  return "unknown";
}

SizeDistribution SizeDistribution::exponential(double rate) {
  require(std::isfinite(rate) && rate > 0.0, "exponential rate must be positive");
  return SizeDistribution(Exponential{rate});
}

SizeDistribution SizeDistribution::deterministic(double value) {
  require(std::isfinite(value) && value >= 0.0, "deterministic value must be non-negative");
  return SizeDistribution(Deterministic{value});
}

SizeDistribution SizeDistribution::uniform(double upper) {
  require(std::isfinite(upper) && upper > 0.0, "uniform upper bound must be positive");
  return SizeDistribution(Uniform{upper});
}

SizeDistribution SizeDistribution::weibull(double shape, double scale) {
  require(std::isfinite(shape) && shape > 0.0, "weibull shape must be positive");
  require(std::isfinite(scale) && scale > 0.0, "weibull scale must be positive");
  return SizeDistribution(Weibull{shape, scale});
}

SizeDistribution SizeDistribution::hyperexponential(std::vector<double> weights,
                                                    std::vector<double> rates) {
  require(!weights.empty() && weights.size() == rates.size(),
          "hyperexponential needs matching non-empty weights and rates");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0, "hyperexponential weights must be non-negative");
    require(std::isfinite(rates[i]) && rates[i] > 0.0, "hyperexponential rates must be positive");
    total += weights[i];
  }
  require(std::abs(total - 1.0) < 1e-12, "hyperexponential weights must sum to 1");
  return SizeDistribution(HyperExponential{std::move(weights), std::move(rates)});
}

SizeDistribution SizeDistribution::truncated(const SizeDistribution& inner, double cap) {
  require(std::isfinite(cap) && cap > 0.0, "truncation cap must be positive");
  return SizeDistribution(Truncated{std::make_shared<const SizeDistribution>(inner), cap});
}

double SizeDistribution::cdf(double y) const {
  if (y < 0.0) return 0.0;
  return std::visit(
      overloaded{
          [&](const Exponential& e) { return -std::expm1(-e.rate * y); },
          [&](const Deterministic& d) { return y >= d.value ? 1.0 : 0.0; },
          [&](const Uniform& u) { return std::min(1.0, y / u.upper); },
          [&](const Weibull& w) { return -std::expm1(-std::pow(y / w.scale, w.shape)); },
          [&](const HyperExponential& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.weights.size(); ++i)
              s += h.weights[i] * -std::expm1(-h.rates[i] * y);
            return s;
          },
          [&](const Truncated& t) { return y >= t.cap ? 1.0 : t.inner->cdf(y); },
      },
      params_);
}

double SizeDistribution::mean() const {
  return std::visit(
      overloaded{
          [](const Exponential& e) { return 1.0 / e.rate; },
          [](const Deterministic& d) { return d.value; },
          [](const Uniform& u) { return 0.5 * u.upper; },
          [](const Weibull& w) { return w.scale * std::tgamma(1.0 + 1.0 / w.shape); },
          [](const HyperExponential& h) {
            double s = 0.0;
            for (std::size_t i = 0; i < h.weights.size(); ++i) s += h.weights[i] / h.rates[i];
            return s;
          },
          [](const Truncated& t) {
            if (auto terms = t.inner->survival_terms()) {
              double s = 0.0;
              for (const auto& term : *terms) s += term_integral(term, std::min(term.end, t.cap));
              return s;
            }
            return survival_integral(*t.inner, t.cap);
          },
      },
      params_);
}

double SizeDistribution::sample(RngStream& rng) const {
  return std::visit(
      overloaded{
          [&](const Exponential& e) { return rng.exponential() / e.rate; },
          [&](const Deterministic& d) { return d.value; },
          [&](const Uniform& u) { return u.upper * rng.uniform(); },
          [&](const Weibull& w) { return w.scale * std::pow(rng.exponential(), 1.0 / w.shape); },
          [&](const HyperExponential& h) {
            const std::size_t i = draw_index(h.weights, rng);
            return rng.exponential() / h.rates[i];
          },
          [&](const Truncated& t) { return std::min(t.inner->sample(rng), t.cap); },
      },
      params_);
}

HazardClass SizeDistribution::hazard() const {
  return std::visit(
      overloaded{
          [](const Exponential&) { return HazardClass::constant; },
          [](const Deterministic&) { return HazardClass::ihr; },
          [](const Uniform&) { return HazardClass::ihr; },
          [](const Weibull& w) {
            if (w.shape == 1.0) return HazardClass::constant;
            return w.shape > 1.0 ? HazardClass::ihr : HazardClass::dhr;
          },
          [](const HyperExponential& h) {
            double lo = 0.0, hi = 0.0;
            bool first = true;
            for (std::size_t i = 0; i < h.rates.size(); ++i) {
              if (h.weights[i] <= 0.0) continue;
              lo = first ? h.rates[i] : std::min(lo, h.rates[i]);
              hi = first ? h.rates[i] : std::max(hi, h.rates[i]);
              first = false;
            }
            return lo == hi ? HazardClass::constant : HazardClass::dhr;
          },
          [](const Truncated& t) {
            const HazardClass inner = t.inner->hazard();
            return (inner == HazardClass::ihr || inner == HazardClass::constant)
                       ? HazardClass::ihr
                       : HazardClass::unknown;
          },
      },
      params_);
}

std::string SizeDistribution::kind_name() const {
  return std::visit(overloaded{
                        [](const Exponential&) { return std::string("exponential"); },
                        [](const Deterministic&) { return std::string("deterministic"); },
                        [](const Uniform&) { return std::string("uniform"); },
                        [](const Weibull&) { return std::string("weibull"); },
                        [](const HyperExponential&) { return std::string("hyperexponential"); },
                        [](const Truncated&) { return std::string("truncated"); },
                    },
                    params_);
}

std::optional<std::vector<SurvivalTerm>> SizeDistribution::survival_terms() const {
  using Terms = std::optional<std::vector<SurvivalTerm>>;
  return std::visit(
      overloaded{
          [](const Exponential& e) -> Terms { return std::vector{SurvivalTerm{1.0, 0.0, e.rate}}; },
          [](const Deterministic& d) -> Terms {
            return std::vector{SurvivalTerm{1.0, 0.0, 0.0, d.value}};
          },
          [](const Uniform& u) -> Terms {
            return std::vector{SurvivalTerm{1.0, -1.0 / u.upper, 0.0, u.upper}};
          },
          [](const Weibull& w) -> Terms {
            if (w.shape == 1.0) return std::vector{SurvivalTerm{1.0, 0.0, 1.0 / w.scale}};
            return std::nullopt;
          },
          [](const HyperExponential& h) -> Terms {
            std::vector<SurvivalTerm> out;
            for (std::size_t i = 0; i < h.weights.size(); ++i)
              if (h.weights[i] > 0.0) out.push_back({h.weights[i], 0.0, h.rates[i]});
            return out;
          },
          [](const Truncated& t) -> Terms {
            auto inner = t.inner->survival_terms();
            if (!inner) return std::nullopt;
            for (auto& term : *inner) term.end = std::min(term.end, t.cap);
            return inner;
          },
      },
      params_);
}

// ---------------------------------------------------------------------------

JointSizeLaw JointSizeLaw::iid(SizeDistribution marginal, int dimension) {
  require(dimension >= 1, "joint law dimension must be >= 1");
  JointSizeLaw law;
  law.kind_ = Kind::iid;
  law.dimension_ = dimension;
  law.marginal_ = std::move(marginal);
  return law;
}

JointSizeLaw JointSizeLaw::common_copy(SizeDistribution marginal, int dimension) {
  require(dimension >= 1, "joint law dimension must be >= 1");
  JointSizeLaw law;
  law.kind_ = Kind::common_copy;
  law.dimension_ = dimension;
  law.marginal_ = std::move(marginal);
  return law;
}

JointSizeLaw JointSizeLaw::mixture(std::vector<double> weights,
                                   std::vector<JointSizeLaw> components) {
  require(!components.empty() && weights.size() == components.size(),
          "mixture needs matching non-empty weights and components");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0, "mixture weights must be non-negative");
    total += w;
  }
  require(std::abs(total - 1.0) < 1e-12, "mixture weights must sum to 1");
  const int d = components.front().dimension();
  for (const auto& c : components) require(c.dimension() == d, "mixture components must share dimension");
  JointSizeLaw law;
  law.kind_ = Kind::mixture;
  law.dimension_ = d;
  law.weights_ = std::move(weights);
  law.components_ = std::move(components);
  return law;
}

JointSizeLaw JointSizeLaw::custom(int dimension, Sampler sampler, double component_mean) {
  require(dimension >= 1, "joint law dimension must be >= 1");
  require(static_cast<bool>(sampler), "custom sampler must be callable");
  require(std::isfinite(component_mean) && component_mean >= 0.0,
          "custom component mean must be finite");
  JointSizeLaw law;
  law.kind_ = Kind::custom;
  law.dimension_ = dimension;
  law.sampler_ = std::move(sampler);
  law.custom_mean_ = component_mean;
  return law;
}

JointSizeLaw JointSizeLaw::empty() {
  JointSizeLaw law;
  law.kind_ = Kind::iid;
  law.dimension_ = 0;
  return law;
}

double JointSizeLaw::component_mean() const {
  switch (kind_) {
    case Kind::iid:
    case Kind::common_copy: return marginal_ ? marginal_->mean() : 0.0;
    case Kind::mixture: {
      double s = 0.0;
      for (std::size_t i = 0; i < components_.size(); ++i)
        s += weights_[i] * components_[i].component_mean();
      return s;
    }
    case Kind::custom: return custom_mean_;
  }
  return 0.0;
}

void JointSizeLaw::sample(RngStream& rng, std::span<double> out) const {
  if (static_cast<int>(out.size()) != dimension_)
    throw std::invalid_argument("sample buffer size does not match joint law dimension");
  switch (kind_) {
    case Kind::iid:
      for (double& v : out) v = marginal_->sample(rng);
      return;
    case Kind::common_copy: {
      const double v = marginal_->sample(rng);
      std::fill(out.begin(), out.end(), v);
      return;
    }
    case Kind::mixture: {
      const std::size_t i = draw_index(weights_, rng);
      components_[i].sample(rng, out);
      return;
    }
    case Kind::custom: sampler_(rng, out); return;
  }
}

std::vector<double> JointSizeLaw::sample(RngStream& rng) const {
  std::vector<double> out(static_cast<std::size_t>(dimension_));
  sample(rng, out);
  return out;
}

JointSizeLaw JointSizeLaw::project(int m) const {
  if (m < 0 || m > dimension_) throw std::out_of_range("projection dimension out of range");
  if (m == 0) return empty();
  if (m == dimension_) return *this;
  switch (kind_) {
    case Kind::iid: return iid(*marginal_, m);
    case Kind::common_copy: return common_copy(*marginal_, m);
    case Kind::mixture: {
      std::vector<JointSizeLaw> comps;
      comps.reserve(components_.size());
      for (const auto& c : components_) comps.push_back(c.project(m));
      return mixture(weights_, std::move(comps));
    }
    case Kind::custom: {
      const int full = dimension_;
      Sampler inner = sampler_;
      return custom(
          m,
          [inner, full](RngStream& rng, std::span<double> out) {
            std::vector<double> buf(static_cast<std::size_t>(full));
            inner(rng, buf);
            std::copy_n(buf.begin(), out.size(), out.begin());
          },
          custom_mean_);
    }
  }
  return *this;
}

// ---------------------------------------------------------------------------

JobClass JobClass::make(int d, int k, JointSizeLaw sizes) {
  require(d >= 1, "job class needs d >= 1");
  require(k >= 1 && k <= d, "job class needs 1 <= k <= d");
  require(sizes.dimension() == d, "size law dimension must equal d");
  return JobClass{d, k, std::move(sizes)};
}

ClassMix ClassMix::make(std::vector<JobClass> classes, std::vector<double> probabilities,
                        double lambda) {
  require(!classes.empty(), "class mix needs at least one class");
  require(classes.size() == probabilities.size(), "one probability per class required");
  require(std::isfinite(lambda) && lambda >= 0.0, "arrival rate must be non-negative");
  double total = 0.0;
  for (double p : probabilities) {
    require(p >= 0.0, "class probabilities must be non-negative");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-12, "class probabilities must sum to 1");
  return ClassMix{std::move(classes), std::move(probabilities), lambda};
}

double ClassMix::mean_d() const {
  double s = 0.0;
  for (std::size_t j = 0; j < classes.size(); ++j) s += probabilities[j] * classes[j].d;
  return s;
}

double ClassMix::alpha() const { return lambda * mean_d(); }

int ClassMix::dbar() const {
  int m = 0;
  for (const auto& c : classes) m = std::max(m, c.d);
  return m;
}

std::vector<double> ClassMix::selection_probabilities() const {
  std::vector<double> out(classes.size());
  const double norm = mean_d();
  for (std::size_t j = 0; j < classes.size(); ++j)
    out[j] = norm > 0.0 ? probabilities[j] * classes[j].d / norm : 0.0;
  return out;
}

bool ClassMix::all_iid() const {
  return std::all_of(classes.begin(), classes.end(),
                     [](const JobClass& c) { return c.is_empty() || c.sizes.is_iid(); });
}

double ClassMix::max_component_mean() const {
  double m = 0.0;
  for (const auto& c : classes) m = std::max(m, c.component_mean());
  return m;
}

ClassMix ClassMix::with_lambda(double l) const {
  ClassMix copy = *this;
  require(std::isfinite(l) && l >= 0.0, "arrival rate must be non-negative");
  copy.lambda = l;
  return copy;
}

std::size_t draw_index(std::span<const double> probabilities, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    acc += probabilities[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

// ---------------------------------------------------------------------------

ValidationReport validate_class(const JobClass& c, std::size_t samples, RngStream& rng) {
  if (samples == 0) throw std::invalid_argument("validate_class needs at least one sample");
  if (c.is_empty()) throw std::invalid_argument("validate_class on the empty sub-class");
  ValidationReport rep;
  rep.samples = samples;
  const auto d = static_cast<std::size_t>(c.d);
  std::vector<double> xi(d), sorted(d);
  double sum = 0.0, sumsq = 0.0;
  std::size_t zero_k = 0, spread = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    c.sizes.sample(rng, xi);
    sum += xi[0];
    sumsq += xi[0] * xi[0];
    const auto zeros = static_cast<int>(std::count(xi.begin(), xi.end(), 0.0));
    if (zeros >= c.k) ++zero_k;
    if (c.k < c.d) {
      sorted = xi;
      std::nth_element(sorted.begin(), sorted.begin() + (c.k - 1), sorted.end());
      const double kth = sorted[static_cast<std::size_t>(c.k - 1)];
      const double mx = *std::max_element(xi.begin(), xi.end());
      if (mx - kth > 0.0) ++spread;
    }
  }
  const double n = static_cast<double>(samples);
  rep.mean_estimate = sum / n;
  const double var = samples > 1 ? std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0)) : 0.0;
  rep.mean_stderr = std::sqrt(var / n);
  rep.finite_positive_mean = std::isfinite(rep.mean_estimate) && rep.mean_estimate > 0.0;
  rep.zero_k_frequency = static_cast<double>(zero_k) / n;
  // "< 1" conditions are flagged at frequency < 1 - 1/samples, "> 0" at > 1/samples.
  rep.nontrivial = rep.zero_k_frequency < 1.0 - 1.0 / n;
  if (c.k < c.d) {
    rep.assumption4_i = static_cast<double>(spread) / n > 1.0 / n;
    rep.assumption4_ii = rep.nontrivial;
  }
  return rep;
}

JobClass derive_subclass(const JobClass& c, int m) {
  if (m < 0 || m > c.d) throw std::out_of_range("sub-class size m must satisfy 0 <= m <= d");
  if (m == 0) return JobClass::empty_class();
  return JobClass{std::min(c.d, m), std::min(c.k, m), c.sizes.project(std::min(c.d, m))};
}

ClassMix reduce_mix(const ClassMix& mix, double phi) {
  if (!(phi >= 0.0 && phi < 1.0)) throw std::invalid_argument("reduction fraction must be in [0,1)");
  std::vector<JobClass> classes;
  std::vector<double> probs;
  for (std::size_t j = 0; j < mix.classes.size(); ++j) {
    const JobClass& c = mix.classes[j];
    for (int m = c.d; m >= 0; --m) {
      // binomial(d, m) (1-phi)^m phi^(d-m)
      const double coef = std::exp(std::lgamma(c.d + 1.0) - std::lgamma(m + 1.0) -
                                   std::lgamma(c.d - m + 1.0));
      const double w = mix.probabilities[j] * std::round(coef) * std::pow(1.0 - phi, m) *
                       std::pow(phi, c.d - m);
      if (w == 0.0) continue;
      classes.push_back(derive_subclass(c, m));
      probs.push_back(w);
    }
  }
  // Renormalize away floating drift; the exact weights sum to 1.
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= total;
  return ClassMix{std::move(classes), std::move(probs), mix.lambda / (1.0 - phi)};
}

}  // namespace coc
