#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "coc/rng.hpp"

namespace coc {

enum class HazardClass { ihr, dhr, constant, unknown };

std::string to_string(HazardClass h);

/// One piece of a survival function: (c0 + c1*y) * exp(-rate*y) on [0, end).
///
/// Laws whose survival function is a finite sum of such pieces admit O(1)
/// recursive updates of the crossing integrals in the mean-field kernels.
struct SurvivalTerm {
  double c0 = 1.0;
  double c1 = 0.0;
  double rate = 0.0;
  double end = std::numeric_limits<double>::infinity();
};

class SizeDistribution {
 public:
  struct Exponential { double rate; };
  struct Deterministic { double value; };
  struct Uniform { double upper; };
  struct Weibull { double shape; double scale; };
  struct HyperExponential { std::vector<double> weights; std::vector<double> rates; };
  struct Truncated { std::shared_ptr<const SizeDistribution> inner; double cap; };
  using Params =
      std::variant<Exponential, Deterministic, Uniform, Weibull, HyperExponential, Truncated>;

  static SizeDistribution exponential(double rate);
  static SizeDistribution deterministic(double value);
  static SizeDistribution uniform(double upper);
  static SizeDistribution weibull(double shape, double scale);
  static SizeDistribution hyperexponential(std::vector<double> weights, std::vector<double> rates);
  static SizeDistribution truncated(const SizeDistribution& inner, double cap);

  /// P{xi <= y}; right-continuous, 0 for y < 0.
  [[nodiscard]] double cdf(double y) const;
  /// P{xi > y}.
  [[nodiscard]] double survival(double y) const { return 1.0 - cdf(y); }
  [[nodiscard]] double mean() const;
  [[nodiscard]] double sample(RngStream& rng) const;
  [[nodiscard]] HazardClass hazard() const;
  [[nodiscard]] std::string kind_name() const;

  /// Piecewise exponential-polynomial decomposition of the survival function,
  /// when the family admits one (everything except Weibull-based laws).
  [[nodiscard]] std::optional<std::vector<SurvivalTerm>> survival_terms() const;

  [[nodiscard]] const Params& params() const { return params_; }

 private:
  explicit SizeDistribution(Params p) : params_(std::move(p)) {}
  Params params_;
};

/// Exchangeable joint law of the d component sizes of a job.
class JointSizeLaw {
 public:
  enum class Kind { iid, common_copy, mixture, custom };
  using Sampler = std::function<void(RngStream&, std::span<double>)>;

  static JointSizeLaw iid(SizeDistribution marginal, int dimension);
  static JointSizeLaw common_copy(SizeDistribution marginal, int dimension);
  static JointSizeLaw mixture(std::vector<double> weights, std::vector<JointSizeLaw> components);
  /// User-pluggable exchangeable sampler; `component_mean` is E xi_1.
  static JointSizeLaw custom(int dimension, Sampler sampler, double component_mean);
  static JointSizeLaw empty();

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] bool is_iid() const { return kind_ == Kind::iid; }
  /// Marginal law for iid and common-copy kinds.
  [[nodiscard]] const SizeDistribution* marginal() const {
    return marginal_ ? &*marginal_ : nullptr;
  }
  [[nodiscard]] const std::vector<double>& mixture_weights() const { return weights_; }
  [[nodiscard]] const std::vector<JointSizeLaw>& mixture_components() const { return components_; }

  [[nodiscard]] double component_mean() const;

  void sample(RngStream& rng, std::span<double> out) const;
  [[nodiscard]] std::vector<double> sample(RngStream& rng) const;

  /// Law of the first m coordinates.
  [[nodiscard]] JointSizeLaw project(int m) const;

 private:
  JointSizeLaw() = default;
  Kind kind_ = Kind::iid;
  int dimension_ = 0;
  std::optional<SizeDistribution> marginal_;
  std::vector<double> weights_;
  std::vector<JointSizeLaw> components_;
  Sampler sampler_;
  double custom_mean_ = 0.0;
};

/// (d, k)-cancel-on-completion job class. d = 0 is the empty sub-class.
struct JobClass {
  int d = 0;
  int k = 0;
  JointSizeLaw sizes = JointSizeLaw::empty();

  static JobClass make(int d, int k, JointSizeLaw sizes);
  static JobClass empty_class() { return JobClass{}; }

  [[nodiscard]] bool is_empty() const { return d == 0; }
  [[nodiscard]] double component_mean() const { return is_empty() ? 0.0 : sizes.component_mean(); }
};

struct ClassMix {
  std::vector<JobClass> classes;
  std::vector<double> probabilities;
  double lambda = 0.0;

  static ClassMix make(std::vector<JobClass> classes, std::vector<double> probabilities,
                       double lambda);
  static ClassMix single(JobClass c, double lambda) { return make({std::move(c)}, {1.0}, lambda); }

  /// alpha = lambda * sum_j pi_j d_j: rate at which a given server is selected.
  [[nodiscard]] double alpha() const;
  [[nodiscard]] double mean_d() const;
  [[nodiscard]] int dbar() const;
  /// Size-biased class law pi_j d_j / sum pi_l d_l.
  [[nodiscard]] std::vector<double> selection_probabilities() const;
  [[nodiscard]] bool all_iid() const;
  [[nodiscard]] double max_component_mean() const;
  [[nodiscard]] ClassMix with_lambda(double l) const;
};

/// Draws a class index from a probability vector.
std::size_t draw_index(std::span<const double> probabilities, RngStream& rng);

struct ValidationReport {
  std::size_t samples = 0;
  double mean_estimate = 0.0;
  double mean_stderr = 0.0;
  bool finite_positive_mean = false;
  /// Empirical P{#zero components >= k}.
  double zero_k_frequency = 0.0;
  bool nontrivial = false;
  /// Not applicable (nullopt) when k == d.
  std::optional<bool> assumption4_i;
  std::optional<bool> assumption4_ii;
};

ValidationReport validate_class(const JobClass& c, std::size_t samples, RngStream& rng);

JobClass derive_subclass(const JobClass& c, int m);

/// phi-reduced mix: each class j is replaced by its sub-classes j^m with
/// binomial(d_j, 1-phi) weights and the rate becomes lambda/(1-phi).
/// Sub-classes with exactly zero weight are dropped.
ClassMix reduce_mix(const ClassMix& mix, double phi);

}  // namespace coc
