#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "duality_lab/filtered_space.hpp"

namespace dlab {

inline constexpr const char* kConfigVersion = "duality-lab/1";

struct UtilitySpec {
  std::string kind = "log";  // log | power | table
  double p = 0.5;
  std::vector<std::pair<double, double>> points;
  double tail_exponent = 0.5;
};

struct SequenceSpec {
  std::vector<RandomVariable> delta;  // per period, per scenario
  std::string decay = "1/n";          // 1/n | 1/n^2 | table
  std::vector<double> table;
  int n_max = 64;
  bool joint_xi = false;
  double x0 = 1.0;
};

struct NetSpec {
  std::vector<double> lower;  // per atom of F_tau
  std::vector<double> upper;
  double r = 1e-2;
  std::size_t samples = 10000;
};

struct MinimaxSpec {
  std::vector<double> steps{0.01, 0.005};
  std::vector<double> truncations{1.0, 4.0, 16.0};
};

/// A parsed experiment. Scenario-indexed fields are expanded from the
/// per-cell / per-atom / scalar forms accepted in the file.
struct ExperimentConfig {
  std::string name;
  std::vector<double> prob;
  std::vector<Partition> partitions;
  std::vector<std::string> scenario_names;
  std::vector<RandomVariable> dM;
  std::vector<RandomVariable> lam;
  UtilitySpec utility;
  std::vector<int> tau;
  RandomVariable xi;
  RandomVariable eta;
  std::vector<double> etas{0.5, 1.0, 2.0};
  int grid_points = 32;
  std::optional<SequenceSpec> sequence;
  std::optional<NetSpec> nets;
  MinimaxSpec minimax;
  std::vector<std::string> checks;
  std::map<std::string, double> tolerances;
  std::uint64_t seed = 20240601;
  std::string out_dir = "out";
  std::string json_name = "report.json";
  std::string csv_name = "report.csv";
};

/// Default tolerance table; config overrides must use these keys.
const std::map<std::string, double>& default_tolerances();

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // every violation found, in file order
};

/// Parses and validates a JSON config text (no solves).
ParseResult parse_config(const std::string& text);
ParseResult load_config(const std::string& path);

struct RunOptions {
  std::optional<std::string> out_dir;
  double tol_scale = 1.0;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

struct RunOutcome {
  int exit_code = 0;        // 0 pass, 1 failed check, 2 config error, 3 solver/model failure
  std::vector<std::string> messages;
  std::string json;         // report.json contents
  std::string csv;          // report.csv contents
  std::string json_path;
  std::string csv_path;
};

/// Executes the configured checks in order and writes both reports.
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options);

}  // namespace dlab
