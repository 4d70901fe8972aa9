#include "coc/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coc/analysis.hpp"
#include "coc/config.hpp"
#include "coc/meanfield.hpp"
#include "coc/simulator.hpp"

namespace coc {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e || b == e) throw InputError(where + ": not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// Numeric CSV with a fixed header; returns the data rows.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                  std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  const auto head = split(trim_cr(line), ',');
  if (header) *header = head;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != head.size())
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(head.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, path + ":" + std::to_string(lineno)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": malformed JSON: " + e.what());
  }
}

double json_number(const json& j, const char* key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) throw InputError(path + ": missing numeric field '" + key + "'");
  return it->get<double>();
}

class OutputDir {
 public:
  OutputDir(std::string dir, std::set<std::string> formats)
      : dir_(std::move(dir)), formats_(std::move(formats)) {
    fs::create_directories(dir_);
  }
  [[nodiscard]] bool wants(const std::string& format) const { return formats_.count(format) > 0; }
  void write_json(const std::string& name, const json& j) const {
    if (!wants("json")) return;
    std::ofstream o(path(name));
    o << j.dump(2) << "\n";
    check(o, name);
  }
  void write_text(const std::string& name, const std::string& text) const {
    if (!wants("csv")) return;
    std::ofstream o(path(name));
    o << text;
    check(o, name);
  }
  [[nodiscard]] std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

 private:
  void check(const std::ofstream& o, const std::string& name) const {
    if (!o) throw std::runtime_error("failed to write " + path(name));
  }
  std::string dir_;
  std::set<std::string> formats_;
};

std::string ccdf_csv(const Ccdf& x) {
  std::string s = "w,x_w\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    s += format_number(static_cast<double>(i) * x.step) + "," + format_number(x.values[i]) + "\n";
  return s;
}

json ccdf_json(const Ccdf& x) {
  return json{{"step", x.step}, {"values", x.values}, {"tail", x.tail}};
}

json frame_json(const Frame& f) {
  if (f.mode == FrameMode::truncated) return f.cap;
  return f.mode == FrameMode::free ? "free" : "infinite";
}

json fp_json(const FixedPointResult& fp, const Grid& grid) {
  json j;
  j["lambda"] = fp.lambda;
  j["rho"] = fp.rho;
  j["frame"] = fp.frame ? json(*fp.frame) : json("infinite");
  j["verdict"] = fp.supercritical() ? "supercritical" : "proper";
  j["residual"] = fp.residual;
  j["diagnostics"] = json{{"iterations", fp.iterations},
                          {"bracket_width", fp.bracket_width},
                          {"upper_tail", fp.upper_tail},
                          {"tail_resolved", fp.tail_resolved}};
  j["grid"] = json{{"step", grid.step}, {"max", grid.max}};
  return j;
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

ExperimentConfig load_with_overrides(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed_set) cfg.set_seed(c.seed);
  if (!c.out.empty()) cfg.output_directory = c.out;
  return cfg;
}

int cmd_simulate(const Common& c, std::ostream& out) {
  ExperimentConfig cfg = load_with_overrides(c);
  const SimMetrics m = run_simulation(cfg.sim);
  const OutputDir dir(cfg.output_directory, cfg.formats);

  json j;
  j["command"] = "simulate";
  j["n"] = cfg.sim.n;
  j["lambda"] = cfg.mix.lambda;
  j["frame"] = frame_json(cfg.sim.frame);
  j["seed"] = cfg.sim.seed;
  j["horizon"] = cfg.sim.horizon;
  j["warmup"] = cfg.sim.effective_warmup();
  j["sample_interval"] = cfg.sim.sample_interval;
  j["load"] = m.load;
  j["load_stderr"] = m.load_stderr;
  j["phi1"] = m.phi1;
  j["phi1_stderr"] = m.phi1_stderr;
  j["mean_workload"] = m.mean_workload;
  j["max_workload"] = m.max_workload;
  j["added_per_job"] = m.added_per_job;
  j["added_per_job_stderr"] = m.added_per_job_stderr;
  j["arrivals"] = m.arrivals;
  j["snapshots"] = m.snapshot_times.size();
  j["drift"] = m.drift ? json(*m.drift) : json(nullptr);
  j["drift_stderr"] = m.drift_stderr ? json(*m.drift_stderr) : json(nullptr);
  j["aborted"] = m.aborted;
  j["tagged"] = cfg.sim.tagged;
  j["ccdf"] = ccdf_json(m.empirical_ccdf);
  dir.write_json("metrics.json", j);
  dir.write_text("ccdf.csv", ccdf_csv(m.empirical_ccdf));

  std::string tagged = "epoch";
  for (std::size_t i = 0; i < cfg.sim.tagged; ++i) tagged += ",W_" + std::to_string(i + 1);
  tagged += "\n";
  for (std::size_t s = 0; s < m.tagged_samples.size(); ++s) {
    tagged += format_number(m.snapshot_times[s]);
    for (double w : m.tagged_samples[s]) tagged += "," + format_number(w);
    tagged += "\n";
  }
  dir.write_text("tagged.csv", tagged);
  out << "load " << format_number(m.load) << " over " << m.snapshot_times.size() << " snapshots\n";
  return kExitOk;
}

int cmd_solve_fp(const Common& c, const std::string& frame, std::ostream& out) {
  ExperimentConfig cfg = load_with_overrides(c);
  std::optional<double> cap;
  if (frame != "infinite") {
    try {
      std::size_t used = 0;
      cap = std::stod(frame, &used);
      if (used != frame.size()) throw std::invalid_argument(frame);
    } catch (const std::exception&) {
      throw ConfigError("", "--frame must be 'infinite' or a number");
    }
    if (!(*cap >= 0.0) || *cap > cfg.grid.max) throw ConfigError("/grid/max", "--frame must lie in [0, grid.max]");
  }
  const FixedPointResult fp = cap ? solve_fp_finite_frame(*cap, cfg.mix, cfg.grid, cfg.solver)
                                  : solve_fp_infinite(cfg.mix, cfg.grid, cfg.solver);
  const OutputDir dir(cfg.output_directory, cfg.formats);
  dir.write_json("fp.json", fp_json(fp, cfg.grid));
  dir.write_text("fp.csv", ccdf_csv(fp.x));
  out << (fp.supercritical() ? "supercritical" : "rho " + format_number(fp.rho)) << "\n";
  return kExitOk;
}

int cmd_sweep(const Common& c, const std::string& list, std::ostream& out) {
  ExperimentConfig cfg = load_with_overrides(c);
  std::vector<double> lambdas;
  for (const auto& cell : split(list, ',')) {
    try {
      lambdas.push_back(parse_double(cell, "--lambda-list"));
    } catch (const InputError& e) {
      throw ConfigError("", e.what());
    }
    if (!(lambdas.back() >= 0.0)) throw ConfigError("", "--lambda-list entries must be non-negative");
  }
  if (lambdas.empty()) throw ConfigError("", "--lambda-list is empty");
  const auto rows = rho_curve(cfg.mix, lambdas, cfg.grid, cfg.solver);
  std::string csv = "lambda,rho,frame_or_supercritical\n";
  bool any_ok = false;
  for (const auto& r : rows) {
    std::string status;
    if (!r.error.empty()) {
      status = "error";
    } else {
      any_ok = true;
      status = r.status == FpStatus::supercritical ? "supercritical" : "infinite";
    }
    csv += format_number(r.lambda) + "," + (r.error.empty() ? format_number(r.rho) : "nan") + "," + status + "\n";
  }
  const OutputDir dir(cfg.output_directory, cfg.formats);
  dir.write_text("rho_curve.csv", csv);
  out << rows.size() << " rows\n";
  return any_ok ? kExitOk : kExitRuntime;
}

struct CompareArgs {
  std::string metrics, fp, fp_csv, tagged;
  std::optional<double> levy, sup, load, correlation, ks;
};

int cmd_compare(const Common& c, const CompareArgs& a, std::ostream& out) {
  Budgets budgets;
  std::string out_dir = fs::path(a.metrics).parent_path().string();
  std::set<std::string> formats{"json", "csv"};
  if (!c.config.empty()) {
    const ExperimentConfig cfg = load_with_overrides(c);
    budgets = cfg.budgets;
    out_dir = cfg.output_directory;
    formats = cfg.formats;
  }
  if (!c.out.empty()) out_dir = c.out;
  if (out_dir.empty()) out_dir = ".";
  if (a.levy) budgets.levy = *a.levy;
  if (a.sup) budgets.sup = *a.sup;
  if (a.load) budgets.load = *a.load;
  if (a.correlation) budgets.correlation = *a.correlation;
  if (a.ks) budgets.ks = *a.ks;

  const json metrics = read_json_file(a.metrics);
  const auto cit = metrics.find("ccdf");
  if (cit == metrics.end() || !cit->is_object()) throw InputError(a.metrics + ": missing 'ccdf' object");
  Ccdf empirical;
  empirical.step = json_number(*cit, "step", a.metrics);
  empirical.tail = json_number(*cit, "tail", a.metrics);
  const auto vit = cit->find("values");
  if (vit == cit->end() || !vit->is_array()) throw InputError(a.metrics + ": missing ccdf values");
  for (const auto& v : *vit) {
    if (!v.is_number()) throw InputError(a.metrics + ": non-numeric ccdf value");
    empirical.values.push_back(v.get<double>());
  }
  if (!(empirical.step > 0.0) || !empirical.is_valid()) throw InputError(a.metrics + ": invalid ccdf");
  const double load = json_number(metrics, "load", a.metrics);

  const json fpj = read_json_file(a.fp);
  const auto verdict = fpj.find("verdict");
  if (verdict == fpj.end() || !verdict->is_string()) throw InputError(a.fp + ": missing 'verdict'");
  if (verdict->get<std::string>() == "supercritical")
    throw std::runtime_error("fixed point is supercritical; nothing to compare against");
  FixedPointResult fp;
  fp.rho = json_number(fpj, "rho", a.fp);
  fp.lambda = json_number(fpj, "lambda", a.fp);
  const std::string fp_csv = a.fp_csv.empty() ? (fs::path(a.fp).parent_path() / "fp.csv").string() : a.fp_csv;
  fp.x = read_ccdf_csv(fp_csv);

  const ComparisonReport cmp = compare_ccdf_to_fp(empirical, load, fp);
  json report;
  report["levy"] = cmp.levy;
  report["sup"] = cmp.sup;
  report["load_gap"] = cmp.load_gap;
  json checks = json::array();
  bool pass = true;
  auto check = [&](const char* name, double value, double budget) {
    const bool ok = value <= budget;
    pass = pass && ok;
    checks.push_back(json{{"name", name}, {"value", value}, {"budget", budget}, {"pass", ok}});
  };
  check("levy", cmp.levy, budgets.levy);
  check("load_gap", cmp.load_gap, budgets.load);
  if (budgets.sup) check("sup", cmp.sup, *budgets.sup);

  const std::string tagged_path =
      a.tagged.empty() ? (fs::path(a.metrics).parent_path() / "tagged.csv").string() : a.tagged;
  report["independence"] = nullptr;
  if (fs::exists(tagged_path)) {
    std::vector<std::string> header;
    const auto rows = read_numeric_csv(tagged_path, &header);
    if (header.empty() || header[0] != "epoch") throw InputError(tagged_path + ": expected an 'epoch' column first");
    if (header.size() >= 3 && rows.size() >= 30) {
      std::vector<std::vector<double>> samples;
      for (const auto& r : rows) samples.emplace_back(r.begin() + 1, r.end());
      const IndependenceReport ind = independence_report(samples);
      report["independence"] = json{{"max_abs_correlation", ind.max_abs_correlation()},
                                    {"ks_product", ind.ks_product},
                                    {"sample_count", ind.sample_count},
                                    {"correlations", ind.correlations},
                                    {"degenerate", ind.any_degenerate()}};
      check("max_abs_correlation", ind.max_abs_correlation(), budgets.correlation);
      check("ks_product", ind.ks_product, budgets.ks);
    }
  }
  report["checks"] = checks;
  report["pass"] = pass;
  const OutputDir dir(out_dir, formats);
  dir.write_json("report.json", report);
  out << (pass ? "pass" : "FAIL") << " levy " << format_number(cmp.levy) << "\n";
  return pass ? kExitOk : kExitRuntime;
}

int cmd_critical(const Common& c, const std::string& mode, std::ostream& out) {
  ExperimentConfig cfg = load_with_overrides(c);
  json j;
  j["mode"] = mode;
  if (mode == "mf") {
    const LambdaBarResult r = estimate_lambda_bar(cfg.mix, cfg.grid, cfg.lambda_tol, cfg.solver);
    j["method"] = "fixed_point_bisection";
    j["lambda_bar"] = r.lambda_bar;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["half_width"] = 0.5 * (r.upper - r.lower);
    j["evaluations"] = r.evaluations;
  } else {
    const CriticalEstimate r = estimate_critical_lambda_n(cfg.critical_n, cfg.mix, cfg.critical);
    j["method"] = to_string(r.method);
    j["n"] = cfg.critical_n;
    j["lambda_bar"] = r.lambda;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["half_width"] = r.half_width;
    j["evaluations"] = r.evaluations;
  }
  const OutputDir dir(cfg.output_directory, cfg.formats);
  dir.write_json("lambda_bar.json", j);
  out << "lambda_bar " << format_number(j["lambda_bar"].get<double>()) << "\n";
  return kExitOk;
}

std::string offsets_cell(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + format_number(x);
  return s;
}

int cmd_dmono(const Common& c, std::ostream& out) {
  ExperimentConfig cfg = load_with_overrides(c);
  std::string csv =
      "class,d,k,hazard,direction,sup_mean,sup_stderr,witness_from,witness_to,witness_difference,"
      "witness_stderr\n";
  const RngStream root(cfg.seed);
  DMonoOptions opts;
  opts.samples = cfg.dmono_samples;
  for (std::size_t j = 0; j < cfg.mix.classes.size(); ++j) {
    const JobClass& jc = cfg.mix.classes[j];
    const auto chains = default_chains(jc.d, cfg.dmono_offsets);
    const DMonotonicityVerdict v = dmono_scan(jc, chains, root.child(j), opts, cfg.class_names[j]);
    csv += v.class_id + "," + std::to_string(jc.d) + "," + std::to_string(jc.k) + "," +
           to_string(v.hazard) + "," + to_string(v.direction) + "," + format_number(v.sup_mean) + "," +
           format_number(v.sup_stderr) + ",";
    if (v.witness) {
      const auto& w = *v.witness;
      csv += offsets_cell(v.points[w.chain][w.from].offsets) + "," +
             offsets_cell(v.points[w.chain][w.to].offsets) + "," + format_number(w.difference) + "," +
             format_number(w.stderr_) + "\n";
    } else {
      csv += ",,,\n";
    }
    out << v.class_id << " " << to_string(v.direction) << "\n";
  }
  const OutputDir dir(cfg.output_directory, cfg.formats);
  dir.write_text("dmono.csv", csv);
  return kExitOk;
}

}  // namespace

Ccdf read_ccdf_csv(const std::string& path) {
  std::vector<std::string> header;
  const auto rows = read_numeric_csv(path, &header);
  if (header.size() != 2 || header[0] != "w" || header[1] != "x_w")
    throw InputError(path + ": expected header 'w,x_w'");
  if (rows.size() < 2) throw InputError(path + ": need at least two grid rows");
  Ccdf x;
  x.step = rows[1][0] - rows[0][0];
  if (rows[0][0] != 0.0 || !(x.step > 0.0)) throw InputError(path + ": grid must start at 0 and increase");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double expect = static_cast<double>(i) * x.step;
    if (std::abs(rows[i][0] - expect) > 1e-6 * x.step * static_cast<double>(i + 1))
      throw InputError(path + ": grid is not uniform at row " + std::to_string(i + 2));
    x.values.push_back(rows[i][1]);
  }
  if (!x.is_valid()) throw InputError(path + ": values are not a non-increasing function in [0,1]");
  x.tail = 0.0;
  return x;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("cocsim");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cancel-on-completion redundancy: simulator and mean-field solver", "cocsim"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", common.config, "Experiment config (JSON)");
    if (need_config) opt->required();
    sub->add_option("--seed", common.seed, "Override the config seed")
        ->each([&](const std::string&) { common.seed_set = true; });
    sub->add_option("--out", common.out, "Output directory (overrides output.directory)");
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate the n-server system");
  add_common(simulate, true);

  std::string frame = "infinite";
  auto* solve = app.add_subcommand("solve-fp", "Solve the mean-field fixed point");
  add_common(solve, true);
  solve->add_option("--frame", frame, "infinite, or a frame size c");

  std::string lambda_list;
  auto* sweep = app.add_subcommand("sweep", "Fixed-point load over a list of arrival rates");
  add_common(sweep, true);
  sweep->add_option("--lambda-list", lambda_list, "Comma-separated arrival rates")->required();

  CompareArgs cargs;
  auto* compare = app.add_subcommand("compare", "Compare simulation metrics with a fixed point");
  add_common(compare, false);
  compare->add_option("--metrics", cargs.metrics, "metrics.json from simulate")->required();
  compare->add_option("--fp", cargs.fp, "fp.json from solve-fp")->required();
  compare->add_option("--fp-csv", cargs.fp_csv, "fp.csv (defaults to the sibling of --fp)");
  compare->add_option("--tagged", cargs.tagged, "tagged.csv (defaults to the sibling of --metrics)");
  compare->add_option("--levy-budget", cargs.levy);
  compare->add_option("--sup-budget", cargs.sup);
  compare->add_option("--load-budget", cargs.load);
  compare->add_option("--correlation-budget", cargs.correlation);
  compare->add_option("--ks-budget", cargs.ks);

  std::string mode = "mf";
  auto* critical = app.add_subcommand("critical", "Estimate the critical arrival rate");
  add_common(critical, true);
  critical->add_option("--mode", mode, "mf or fixed_n")->check(CLI::IsMember({"mf", "fixed_n"}));

  auto* dmono = app.add_subcommand("dmono", "Scan E eta(D) monotonicity per class");
  add_common(dmono, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common, out);
    if (solve->parsed()) return cmd_solve_fp(common, frame, out);
    if (sweep->parsed()) return cmd_sweep(common, lambda_list, out);
    if (compare->parsed()) return cmd_compare(common, cargs, out);
    if (critical->parsed()) return cmd_critical(common, mode, out);
    if (dmono->parsed()) return cmd_dmono(common, out);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace coc
