#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eqobj/errors.hpp"
#include "eqobj/results.hpp"

namespace eqobj {

/// Runs the configured experiment. Instances are independent and may run on
/// `config.threads` threads; results are collected by instance index, so the
/// record does not depend on the thread count.
ResultRecord run(const ScenarioConfig& config);

/// Outcome of one config inside a suite run.
struct SuiteEntry {
  std::filesystem::path config_path;
  std::string name;
  int exit_code = 0;  // same contract as the CLI
  std::string message;
  int verdicts_passed = 0;
  int verdicts_total = 0;
};

struct SuiteOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> threads;
};

/// Runs every `*.ini` in `dir` in lexicographic order, writes each record
/// and a `suite.json` summary into the output directory.
std::vector<SuiteEntry> run_suite(const std::filesystem::path& dir, const SuiteOverrides& overrides);

/// Maps a library error to the CLI exit code (2 configuration, 3 numerical).
int exit_code_for(const Error& error);

}  // namespace eqobj
