#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace artifact {

enum class Pipeline { Solve, Gauge, Wp, Bergman, RicciLimit, Energy, All, Selftest };

Pipeline parse_pipeline(const std::string& name);  // ConfigError on unknown names
std::string pipeline_name(Pipeline p);

// Parsed experiment. Absent optionals fall back to per-pipeline defaults.
struct ExperimentConfig {
  Pipeline pipeline = Pipeline::Solve;
  std::optional<nlohmann::json> backend;
  int order = 3;
  std::optional<int> kmin, kmax;
  std::string basis = "harmonic";  // harmonic | compatible | mixed
  std::vector<double> t_values{0.02, 0.04, 0.08};
  int grid = 5;
  double radius = 0.2;
  std::vector<double> direction{0.5, 0.0};   // Beltrami coefficient c for the energy scan
  std::vector<std::vector<double>> map_linear{{1.0, 0.0}, {0.0, 1.0}};
  std::optional<double> tol;
  unsigned seed = 1;
  std::optional<std::string> out;
};

// Validates keys, ranges and the backend block. Throws ConfigError.
ExperimentConfig parse_experiment(const nlohmann::json& j);

struct Overrides {
  std::optional<int> order, kmin, kmax, grid;
  std::optional<unsigned> seed;
  std::optional<double> tol;
  std::optional<std::string> out;
};
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

struct RunResult {
  std::map<std::string, std::string> files;  // file name -> contents
  std::vector<std::string> failures;         // tolerance checks that did not hold
  bool ok() const { return failures.empty(); }
};

// Runs the pipeline in memory. ConfigError for inconsistent configs; numerical errors propagate.
RunResult run_pipeline(const ExperimentConfig& cfg);
void write_outputs(const RunResult& r, const std::filesystem::path& dir);

// Full CLI: parse arguments, run, write, return the exit code.
int run_cli(int argc, char** argv);

}  // namespace artifact
