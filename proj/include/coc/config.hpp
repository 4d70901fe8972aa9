#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coc/analysis.hpp"
#include "coc/ccdf.hpp"
#include "coc/distributions.hpp"
#include "coc/meanfield.hpp"
#include "coc/simulator.hpp"

namespace coc {

/// Bad configuration; `path` is a JSON pointer into the document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error("config error at " + (path.empty() ? std::string("/") : path) + ": " +
                           message),
        path_(std::move(path)) {}
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Budgets {
  double levy = 0.02;
  std::optional<double> sup;
  double load = 0.01;
  double correlation = 0.05;
  double ks = 0.05;
};

struct ExperimentConfig {
  ClassMix mix;
  std::vector<std::string> class_names;
  SimConfig sim;
  Grid grid;
  SolverOptions solver;
  /// Tolerance of the mean-field critical-rate bisection.
  double lambda_tol = 1e-3;
  std::size_t consistency_samples = 100000;
  CriticalOptions critical;
  std::size_t critical_n = 100;
  std::vector<double> dmono_offsets{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::size_t dmono_samples = 100000;
  Budgets budgets;
  std::string output_directory = "out";
  std::set<std::string> formats{"json", "csv"};
  std::uint64_t seed = 1;

  /// Re-seeds every consumer of the seed.
  void set_seed(std::uint64_t s);
};

/// Parses and validates a config document; throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

/// Size-law part of a config, reusable on its own.
SizeDistribution parse_marginal(const nlohmann::json& j, const std::string& path);

/// Allowed keys per object path ("/mix/classes/*" for array items); the
/// shipped JSON schema must list exactly these.
const std::map<std::string, std::set<std::string>>& config_schema_keys();

}  // namespace coc
