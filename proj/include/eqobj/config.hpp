#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eqobj {

enum class ExperimentKind { Impossibility, StandardModel, SbsScaling, EquilibrationBounds, Custom };

const char* to_string(ExperimentKind kind);

/// Tolerances every verdict may use; overridable per config file.
struct Tolerances {
  // [tolerances.equilibration]
  double bound_slack = 1e-9;
  double dense_agreement = 1e-10;
  // [tolerances.objectivity]
  double fidelity_slack = 1e-9;
  double mutual_information = 1e-10;
  double product_distance = 1e-10;
  double cq_distance = 1e-10;
  double product_law = 1e-10;
  double log_linear_residual = 1e-9;
};

/// One experiment, as read from an INI-style file. The schema is documented in README.md.
struct ScenarioConfig {
  std::string name;
  ExperimentKind experiment = ExperimentKind::Custom;
  std::uint64_t seed = 0;
  int instances = 1;

  int system_dim = 2;
  std::vector<int> env_dims;

  std::string family;                 // star | conditional | von-neumann | gue
  std::vector<double> pointer_values; // von-neumann x_i; drawn when empty
  int env_rank = 0;                   // 0: drawn per instance
  bool iid_observers = false;

  std::vector<double> time_window_multiples;
  int time_samples = 4000;
  std::vector<int> partition_sizes;

  std::string output_path;
  Tolerances tolerances;
  int threads = 1;

  long env_dim() const;
  long total_dim() const;
};

/// Parses the text of a config file. `source` names it in error messages.
ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);

/// Semantic checks beyond syntax (dimension limits, experiment requirements).
void validate_config(const ScenarioConfig& config);

}  // namespace eqobj
