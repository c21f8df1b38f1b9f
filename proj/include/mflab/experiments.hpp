#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mflab/config.hpp"
#include "mflab/model.hpp"
#include "mflab/table.hpp"

namespace mflab {

constexpr std::uint64_t kDefaultSeed = 20261016;

/// Parsed experiment file: common knobs plus the experiment-specific keys,
/// which stay in `params` and are read by the experiment itself.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir;
  bool plots = true;
  Config params;
};

/// Reads `experiment`, `seed`, `out` and `plots`; throws ConfigError when the
/// experiment is not registered.
ExperimentConfig make_experiment_config(const Config& c);
ExperimentConfig load_experiment_config(const std::string& path);

struct ExperimentResult {
  std::vector<ResultTable> tables;
  /// Headline numbers (rates, slopes, worst ratios) used by the acceptance checks.
  nlohmann::json summary = nlohmann::json::object();
  bool diverged = false;
  std::string error;
};

struct ExperimentInfo {
  std::string name;
  std::string claim;  ///< the statement the experiment exercises
};

const std::vector<ExperimentInfo>& experiment_registry();

/// Parses and validates every key without running; throws ConfigError.
void check_experiment(const ExperimentConfig& cfg);

/// Runs the experiment. A divergence stops the run and returns the tables
/// finished so far plus an error table, with `diverged` set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes all tables and <experiment>.meta.json-style metadata; returns paths.
std::vector<std::string> emit_experiment(const ExperimentResult& r, const ExperimentConfig& cfg, double wall_seconds);

/// Model from `model = langevin | linear_gaussian | geometric` and its keys.
ModelPtr model_from_config(const Config& c);

/// Row-major square matrix from a list of n*n numbers.
Matrix square_matrix(const std::vector<double>& v, const std::string& what);

}  // namespace mflab
