#pragma once

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <ostream>
#include <string>
#include <vector>

namespace nvsim::cli {

using nlohmann::json;

enum class ParamKind { Number, Integer, Text, Vec3, Flag };

struct ParamSpec {
  std::string name;  // config key; the flag is --name with '_' -> '-'
  ParamKind kind = ParamKind::Number;
  json default_value;  // null: optional, module preset applies
  std::string help;
  std::vector<std::string> choices;  // Text only
  std::optional<double> min;         // inclusive bound for Number / Integer
  bool positive = false;             // strict > 0
};

/// Output of one experiment: an optional curve (CSV text) and a JSON summary.
struct ExperimentOutput {
  std::optional<std::string> csv;
  json curve;  // same data as the CSV, column name -> values
  json summary = json::object();
};

struct ExperimentConfig {
  std::string experiment;
  json params = json::object();  // fully resolved, defaults filled in
  std::string out_dir = ".";
  std::string format = "csv";  // csv | json
  std::uint64_t seed = 1;
};

struct Experiment {
  std::string name;
  std::string anchor;  // written to every CSV header
  bool has_curve = true;
  std::vector<ParamSpec> params;
  /// Builds and validates the module inputs; runs only when `execute` is set.
  std::function<ExperimentOutput(const ExperimentConfig&, bool execute)> body;
};

const std::vector<Experiment>& experiments();
const Experiment* find_experiment(const std::string& name);
std::string experiment_names();

/// Validation failure with a location ("config: params.lifetime_ns", "--n", ...).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what) {}
};

/// Everything given on the command line.
struct CommandLine {
  std::string experiment;
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> params;  // --name value, in order
};

/// Merges a JSON config document and command-line values (which win) into a
/// resolved config. Unknown keys are rejected at every level.
ExperimentConfig resolve_config(const std::optional<json>& file, const CommandLine& cl);

/// Checks everything that run() would check, without running.
void validate_config(const ExperimentConfig& cfg);

struct RunResult {
  std::vector<std::string> files;
  ExperimentOutput output;
};

/// Runs the experiment and writes <experiment>.<format> plus manifest.json
/// into cfg.out_dir. Files written before a failure are removed.
RunResult run(const ExperimentConfig& cfg, const std::vector<std::string>& argv = {});

/// Entry point; returns 0 (ok), 1 (validation), 2 (runtime).
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace nvsim::cli
