#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eqobj/config.hpp"

namespace eqobj {

/// A pass/fail check. Passing means `value <= tolerance`.
struct Verdict {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string description;
};

struct DecayRow {
  int group_size = 0;
  int pair_i = 0;
  int pair_j = 0;
  double fidelity = 0.0;
  double gamma = 0.0;
  double bound = 0.0;
};

struct FidelityEntry {
  int observer = 0;
  int i = 0;
  int j = 0;
  double value = 0.0;
};

struct ResultRecord {
  ScenarioConfig config;
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();  // one entry per instance
  std::vector<DecayRow> decay;
  std::vector<FidelityEntry> fidelities;
  std::vector<Verdict> verdicts;
  std::vector<std::pair<std::string, double>> wall_time;  // seconds per stage

  bool all_passed() const;
};

/// Finite doubles as numbers, infinities as "inf"/"-inf", NaN as null.
nlohmann::ordered_json json_number(double x);

nlohmann::ordered_json config_to_json(const ScenarioConfig& config);

/// Everything except wall time; byte-identical for identical (config, seed).
std::string deterministic_json(const ResultRecord& record);
std::string timing_json(const ResultRecord& record);

/// %.17g, with "inf"/"-inf"/"nan" for non-finite values.
std::string format_double(double x);

/// Writes `<stem>.decay.csv` and `<stem>.fidelity.csv`.
void emit_csv(const ResultRecord& record, const std::filesystem::path& stem);

/// Writes `<stem>.json` and `<stem>.timing.json` atomically, then the CSVs.
void write_results(const ResultRecord& record, const std::filesystem::path& stem);

/// Writes `content` to a temporary file in the target directory and renames it.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace eqobj
