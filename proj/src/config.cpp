#include "coc/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace coc {

using nlohmann::json;

namespace {

const std::set<std::string> kMarginalKeys{"kind", "rate", "value", "upper", "shape",
                                          "scale", "weights", "rates", "inner", "cap"};

void allow_only(const json& j, const std::string& path, const std::set<std::string>& keys) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError(path + "/" + k, "unknown key");
}

const json* find(const json& j, const std::string& key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

const json& require(const json& j, const std::string& path, const std::string& key) {
  const json* v = find(j, key);
  if (!v) throw ConfigError(path + "/" + key, "required key missing");
  return *v;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "expected a finite number");
  return x;
}

double number_at(const json& j, const std::string& path, const std::string& key, double fallback) {
  const json* v = find(j, key);
  return v ? as_number(*v, path + "/" + key) : fallback;
}

std::optional<double> optional_number(const json& j, const std::string& path, const std::string& key) {
  const json* v = find(j, key);
  if (!v || v->is_null()) return std::nullopt;
  return as_number(*v, path + "/" + key);
}

double positive(double x, const std::string& path) {
  if (!(x > 0.0)) throw ConfigError(path, "must be positive");
  return x;
}

double non_negative(double x, const std::string& path) {
  if (!(x >= 0.0)) throw ConfigError(path, "must be non-negative");
  return x;
}

std::uint64_t count_at(const json& j, const std::string& path, const std::string& key,
                       std::uint64_t fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<long long>() < 0))
    throw ConfigError(path + "/" + key, "expected a non-negative integer");
  return v->get<std::uint64_t>();
}

std::string string_at(const json& j, const std::string& path, const std::string& key,
                      const std::string& fallback, const std::set<std::string>& choices) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(path + "/" + key, "expected a string");
  const auto s = v->get<std::string>();
  if (!choices.empty() && !choices.count(s)) {
    std::string list;
    for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
    throw ConfigError(path + "/" + key, "must be one of: " + list);
  }
  return s;
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "/" + std::to_string(i)));
  return out;
}

// Wraps constructor errors with the path of the offending object.
template <class F>
auto at_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

JointSizeLaw parse_joint(const json& j, const std::string& path, int d, bool allow_mixture) {
  const std::string joint =
      string_at(j, path, "joint", "iid",
                allow_mixture ? std::set<std::string>{"iid", "common_copy", "mixture"}
                              : std::set<std::string>{"iid", "common_copy"});
  if (joint == "mixture") {
    const json& comps = require(j, path, "components");
    const std::string cpath = path + "/components";
    if (!comps.is_array() || comps.empty()) throw ConfigError(cpath, "expected a non-empty array");
    std::vector<double> weights;
    std::vector<JointSizeLaw> laws;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string p = cpath + "/" + std::to_string(i);
      allow_only(comps[i], p, config_schema_keys().at("/mix/classes/*/sizes/components/*"));
      weights.push_back(non_negative(number_at(comps[i], p, "weight", 1.0), p + "/weight"));
      laws.push_back(parse_joint(comps[i], p, d, false));
    }
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw ConfigError(cpath, "component weights must not all be zero");
    for (double& w : weights) w /= total;
    return at_path(path, [&] { return JointSizeLaw::mixture(weights, laws); });
  }
  const SizeDistribution marginal = parse_marginal(require(j, path, "marginal"), path + "/marginal");
  return at_path(path, [&] {
    return joint == "iid" ? JointSizeLaw::iid(marginal, d) : JointSizeLaw::common_copy(marginal, d);
  });
}

}  // namespace

SizeDistribution parse_marginal(const json& j, const std::string& path) {
  allow_only(j, path, kMarginalKeys);
  const std::string kind = string_at(j, path, "kind", "", {"exponential", "deterministic", "uniform",
                                                           "weibull", "hyperexponential", "truncated"});
  if (kind.empty()) throw ConfigError(path + "/kind", "required key missing");
  auto num = [&](const char* key) { return as_number(require(j, path, key), path + "/" + key); };
  return at_path(path, [&]() -> SizeDistribution {
    if (kind == "exponential") return SizeDistribution::exponential(num("rate"));
    if (kind == "deterministic") return SizeDistribution::deterministic(num("value"));
    if (kind == "uniform") return SizeDistribution::uniform(num("upper"));
    if (kind == "weibull") return SizeDistribution::weibull(num("shape"), num("scale"));
    if (kind == "hyperexponential")
      return SizeDistribution::hyperexponential(numbers(require(j, path, "weights"), path + "/weights"),
                                                numbers(require(j, path, "rates"), path + "/rates"));
    return SizeDistribution::truncated(parse_marginal(require(j, path, "inner"), path + "/inner"),
                                       num("cap"));
  });
}

const std::map<std::string, std::set<std::string>>& config_schema_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"/", {"mix", "sim", "grid", "solver", "critical", "dmono", "compare", "output"}},
      {"/mix", {"lambda", "classes"}},
      {"/mix/classes/*", {"name", "d", "k", "weight", "sizes"}},
      {"/mix/classes/*/sizes", {"joint", "marginal", "components"}},
      {"/mix/classes/*/sizes/components/*", {"weight", "joint", "marginal"}},
      {"/mix/classes/*/sizes/marginal", kMarginalKeys},
      {"/sim",
       {"n", "frame", "horizon", "warmup", "sample_interval", "tagged", "seed", "workload_ceiling"}},
      {"/grid", {"step", "max"}},
      {"/solver",
       {"tol", "tail_eps", "collapse_eps", "h_mode", "kernel", "mc_samples", "max_iterations",
        "lambda_tol", "consistency_samples"}},
      {"/critical",
       {"n", "method", "lambda_lo", "lambda_hi", "tolerance", "horizon", "warmup",
        "sample_interval", "eps_load", "workload_ceiling"}},
      {"/dmono", {"offsets", "samples"}},
      {"/compare", {"levy", "sup", "load", "correlation", "ks"}},
      {"/output", {"directory", "formats"}},
  };
  return keys;
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  sim.seed = s;
  solver.seed = s;
  critical.seed = s;
}

ExperimentConfig parse_config(const json& doc) {
  const auto& keys = config_schema_keys();
  allow_only(doc, "", keys.at("/"));
  ExperimentConfig cfg;

  // mix
  const json& mix = require(doc, "", "mix");
  allow_only(mix, "/mix", keys.at("/mix"));
  const double lambda = non_negative(as_number(require(mix, "/mix", "lambda"), "/mix/lambda"), "/mix/lambda");
  const json& classes = require(mix, "/mix", "classes");
  if (!classes.is_array() || classes.empty())
    throw ConfigError("/mix/classes", "expected a non-empty array of classes");
  std::vector<JobClass> jobs;
  std::vector<double> weights;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string p = "/mix/classes/" + std::to_string(i);
    const json& c = classes[i];
    allow_only(c, p, keys.at("/mix/classes/*"));
    const json& dj = require(c, p, "d");
    const json& kj = require(c, p, "k");
    if (!dj.is_number_integer() || dj.get<long long>() < 1) throw ConfigError(p + "/d", "expected an integer >= 1");
    if (!kj.is_number_integer() || kj.get<long long>() < 1 || kj.get<long long>() > dj.get<long long>())
      throw ConfigError(p + "/k", "expected an integer with 1 <= k <= d");
    const int d = dj.get<int>(), k = kj.get<int>();
    const json& sizes = require(c, p, "sizes");
    allow_only(sizes, p + "/sizes", keys.at("/mix/classes/*/sizes"));
    JointSizeLaw law = parse_joint(sizes, p + "/sizes", d, true);
    jobs.push_back(at_path(p, [&] { return JobClass::make(d, k, law); }));
    weights.push_back(non_negative(number_at(c, p, "weight", 1.0), p + "/weight"));
    cfg.class_names.push_back(string_at(c, p, "name", "class" + std::to_string(i), {}));
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ConfigError("/mix/classes", "class weights must not all be zero");
  for (double& w : weights) w /= total;
  cfg.mix = at_path("/mix", [&] { return ClassMix::make(jobs, weights, lambda); });

  // grid
  if (const json* g = find(doc, "grid")) {
    allow_only(*g, "/grid", keys.at("/grid"));
    const double step = positive(as_number(require(*g, "/grid", "step"), "/grid/step"), "/grid/step");
    const double max = positive(as_number(require(*g, "/grid", "max"), "/grid/max"), "/grid/max");
    cfg.grid = Grid::make(step, max);
  } else {
    double work = 0.0;
    for (std::size_t j = 0; j < jobs.size(); ++j) work += weights[j] * jobs[j].d * jobs[j].component_mean();
    cfg.grid = default_grid(cfg.mix, std::min(lambda * work, 0.95));
  }

  // sim
  cfg.sim.mix = cfg.mix;
  cfg.sim.grid = cfg.grid;
  if (const json* s = find(doc, "sim")) {
    const std::string p = "/sim";
    allow_only(*s, p, keys.at("/sim"));
    cfg.sim.n = count_at(*s, p, "n", cfg.sim.n);
    if (const json* f = find(*s, "frame")) {
      if (f->is_string()) {
        const auto v = f->get<std::string>();
        if (v == "infinite") cfg.sim.frame = Frame::infinite();
        else if (v == "free") cfg.sim.frame = Frame::free_system();
        else throw ConfigError(p + "/frame", "must be \"infinite\", \"free\" or a number c >= 0");
      } else {
        cfg.sim.frame = Frame::truncated(non_negative(as_number(*f, p + "/frame"), p + "/frame"));
      }
    }
    cfg.sim.horizon = positive(number_at(*s, p, "horizon", cfg.sim.horizon), p + "/horizon");
    cfg.sim.warmup = optional_number(*s, p, "warmup");
    cfg.sim.sample_interval = positive(number_at(*s, p, "sample_interval", 1.0), p + "/sample_interval");
    cfg.sim.tagged = count_at(*s, p, "tagged", 0);
    cfg.seed = count_at(*s, p, "seed", 1);
    cfg.sim.workload_ceiling = optional_number(*s, p, "workload_ceiling");
  }
  try {
    cfg.sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("/sim", e.what());
  }

  // solver
  if (const json* s = find(doc, "solver")) {
    const std::string p = "/solver";
    allow_only(*s, p, keys.at("/solver"));
    SolverOptions& o = cfg.solver;
    o.tol = positive(number_at(*s, p, "tol", o.tol), p + "/tol");
    o.tail_eps = positive(number_at(*s, p, "tail_eps", o.tail_eps), p + "/tail_eps");
    o.collapse_eps = positive(number_at(*s, p, "collapse_eps", o.collapse_eps), p + "/collapse_eps");
    o.h_mode = string_at(*s, p, "h_mode", "closed_form", {"closed_form", "monte_carlo"}) == "closed_form"
                   ? HMode::closed_form
                   : HMode::monte_carlo;
    const std::string kernel = string_at(*s, p, "kernel", "automatic", {"automatic", "recursive", "direct"});
    o.kernel = kernel == "recursive" ? KernelMode::recursive
               : kernel == "direct"  ? KernelMode::direct
                                     : KernelMode::automatic;
    o.mc_samples = count_at(*s, p, "mc_samples", o.mc_samples);
    if (o.mc_samples < 1) throw ConfigError(p + "/mc_samples", "must be at least 1");
    o.max_iterations = static_cast<int>(count_at(*s, p, "max_iterations", 200));
    cfg.lambda_tol = positive(number_at(*s, p, "lambda_tol", cfg.lambda_tol), p + "/lambda_tol");
    cfg.consistency_samples = count_at(*s, p, "consistency_samples", cfg.consistency_samples);
  }
  if (cfg.solver.h_mode == HMode::closed_form && !cfg.mix.all_iid())
    throw ConfigError("/solver/h_mode", "closed_form needs iid sizes in every class; use monte_carlo");

  // critical
  cfg.critical.grid = cfg.grid;
  cfg.critical_n = cfg.sim.n;
  if (const json* s = find(doc, "critical")) {
    const std::string p = "/critical";
    allow_only(*s, p, keys.at("/critical"));
    CriticalOptions& o = cfg.critical;
    cfg.critical_n = count_at(*s, p, "n", cfg.critical_n);
    o.method = string_at(*s, p, "method", "free_drift", {"free_drift", "load_bisection"}) == "free_drift"
                   ? CriticalMethod::free_drift
                   : CriticalMethod::load_bisection;
    o.lambda_lo = non_negative(number_at(*s, p, "lambda_lo", o.lambda_lo), p + "/lambda_lo");
    o.lambda_hi = positive(number_at(*s, p, "lambda_hi", o.lambda_hi), p + "/lambda_hi");
    if (!(o.lambda_hi > o.lambda_lo)) throw ConfigError(p + "/lambda_hi", "must exceed lambda_lo");
    o.tolerance = positive(number_at(*s, p, "tolerance", o.tolerance), p + "/tolerance");
    o.horizon = positive(number_at(*s, p, "horizon", o.horizon), p + "/horizon");
    o.warmup = optional_number(*s, p, "warmup");
    o.sample_interval = positive(number_at(*s, p, "sample_interval", o.sample_interval), p + "/sample_interval");
    o.eps_load = positive(number_at(*s, p, "eps_load", o.eps_load), p + "/eps_load");
    o.workload_ceiling = optional_number(*s, p, "workload_ceiling");
  }
  if (static_cast<int>(cfg.critical_n) < cfg.mix.dbar())
    throw ConfigError("/critical/n", "must be at least max_j d_j");

  // dmono
  if (const json* s = find(doc, "dmono")) {
    const std::string p = "/dmono";
    allow_only(*s, p, keys.at("/dmono"));
    if (const json* o = find(*s, "offsets")) {
      cfg.dmono_offsets = numbers(*o, p + "/offsets");
      for (std::size_t i = 0; i < cfg.dmono_offsets.size(); ++i)
        non_negative(cfg.dmono_offsets[i], p + "/offsets/" + std::to_string(i));
    }
    cfg.dmono_samples = count_at(*s, p, "samples", cfg.dmono_samples);
    if (cfg.dmono_samples < 2) throw ConfigError(p + "/samples", "must be at least 2");
  }

  // compare
  if (const json* s = find(doc, "compare")) {
    const std::string p = "/compare";
    allow_only(*s, p, keys.at("/compare"));
    Budgets& b = cfg.budgets;
    b.levy = positive(number_at(*s, p, "levy", b.levy), p + "/levy");
    b.sup = optional_number(*s, p, "sup");
    b.load = positive(number_at(*s, p, "load", b.load), p + "/load");
    b.correlation = positive(number_at(*s, p, "correlation", b.correlation), p + "/correlation");
    b.ks = positive(number_at(*s, p, "ks", b.ks), p + "/ks");
  }

  // output
  if (const json* s = find(doc, "output")) {
    const std::string p = "/output";
    allow_only(*s, p, keys.at("/output"));
    cfg.output_directory = string_at(*s, p, "directory", cfg.output_directory, {});
    if (const json* f = find(*s, "formats")) {
      if (!f->is_array()) throw ConfigError(p + "/formats", "expected an array");
      cfg.formats.clear();
      for (std::size_t i = 0; i < f->size(); ++i) {
        const std::string fp = p + "/formats/" + std::to_string(i);
        if (!(*f)[i].is_string()) throw ConfigError(fp, "expected a string");
        const auto v = (*f)[i].get<std::string>();
        if (v != "json" && v != "csv") throw ConfigError(fp, "must be \"json\" or \"csv\"");
        cfg.formats.insert(v);
      }
    }
  }

  cfg.set_seed(cfg.seed);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace coc
