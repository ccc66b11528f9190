#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eqobj/experiments.hpp"
#include "eqobj/qops.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> max_dim;
  std::optional<int> threads;
};

// Relative output paths in a config are taken relative to the config file.
fs::path output_stem(const eqobj::ScenarioConfig& config, const fs::path& config_path, const Options& opts) {
  if (opts.out) return fs::path(*opts.out);
  const fs::path base = config_path.parent_path();
  if (!config.output_path.empty()) {
    fs::path p(config.output_path);
    return p.is_absolute() ? p : base / p;
  }
  return base / "results" / config_path.stem();
}

eqobj::ScenarioConfig load(const Options& opts) {
  eqobj::ScenarioConfig config = eqobj::load_config(opts.config);
  if (opts.seed) config.seed = *opts.seed;
  if (opts.threads) config.threads = *opts.threads;
  eqobj::validate_config(config);
  return config;
}

int cmd_validate(const Options& opts) {
  const auto config = load(opts);
  std::cout << "ok: " << config.name << " (" << eqobj::to_string(config.experiment) << ", dim "
            << config.total_dim() << ")\n";
  return 0;
}

int cmd_run(const Options& opts) {
  const auto config = load(opts);
  const auto record = eqobj::run(config);
  const fs::path stem = output_stem(config, opts.config, opts);
  eqobj::write_results(record, stem);
  for (const auto& v : record.verdicts)
    std::cout << (v.passed ? "PASS " : "FAIL ") << v.name << " value=" << eqobj::format_double(v.value)
              << " tolerance=" << eqobj::format_double(v.tolerance) << "\n";
  std::cout << "wrote " << stem.string() << ".json\n";
  return record.all_passed() ? 0 : 1;
}

int cmd_suite(const Options& opts) {
  eqobj::SuiteOverrides overrides;
  overrides.seed = opts.seed;
  overrides.threads = opts.threads;
  if (opts.out) overrides.out_dir = fs::path(*opts.out);
  const auto entries = eqobj::run_suite(opts.dir, overrides);
  int code = 0;
  for (const auto& e : entries) {
    std::cout << (e.exit_code == 0 ? "PASS " : "FAIL ") << e.name << " verdicts " << e.verdicts_passed << "/"
              << e.verdicts_total;
    if (!e.message.empty()) std::cout << " (" << e.message << ")";
    std::cout << "\n";
    // numerical errors outrank configuration errors, which outrank verdict failures
    if (e.exit_code == 3 || (e.exit_code == 2 && code != 3) || (e.exit_code == 1 && code == 0)) code = e.exit_code;
  }
  return code;
}

template <class T>
std::optional<T> env_value(const char* name) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return std::nullopt;
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      return std::string(raw);
    } else if constexpr (std::is_same_v<T, int>) {
      return std::stoi(raw);
    } else {
      return static_cast<T>(std::stoull(raw));
    }
  } catch (const std::exception&) {
    throw eqobj::Error(eqobj::ErrorKind::ConfigParseError, std::string("environment variable ") + name +
                                                                " has an invalid value '" + raw + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equilibration and objectivity experiments"};
  app.require_subcommand(1);
  Options opts;

  std::uint64_t seed = 0;
  std::string out;
  std::size_t max_dim = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override the config seed (env EQOBJ_SEED)");
    sub->add_option("--out", out, "output stem for run, output directory for suite (env EQOBJ_OUT)");
    sub->add_option("--max-dim", max_dim, "largest operator dimension allowed (env EQOBJ_MAX_DIM)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "instance-level worker threads (env EQOBJ_THREADS)")
        ->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", opts.config, "config file")->required()->check(CLI::ExistingFile);
  add_common(run);
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", opts.config, "config file")->required()->check(CLI::ExistingFile);
  add_common(validate);
  auto* suite = app.add_subcommand("suite", "run every *.ini config in a directory");
  suite->add_option("dir", opts.dir, "config directory")->required()->check(CLI::ExistingDirectory);
  add_common(suite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? 0 : 2;
  }

  try {
    // flags take precedence over environment variables
    CLI::App* sub = app.get_subcommands().front();
    opts.seed = sub->count("--seed") ? std::optional<std::uint64_t>(seed) : env_value<std::uint64_t>("EQOBJ_SEED");
    opts.out = sub->count("--out") ? std::optional<std::string>(out) : env_value<std::string>("EQOBJ_OUT");
    opts.max_dim = sub->count("--max-dim") ? std::optional<std::size_t>(max_dim) : env_value<std::size_t>("EQOBJ_MAX_DIM");
    opts.threads = sub->count("--threads") ? std::optional<int>(threads) : env_value<int>("EQOBJ_THREADS");
    if (opts.max_dim) eqobj::set_max_dim(*opts.max_dim);
    if (opts.threads && *opts.threads < 1)
      throw eqobj::Error(eqobj::ErrorKind::ConfigParseError, "thread count must be positive");

    if (*run) return cmd_run(opts);
    if (*validate) return cmd_validate(opts);
    return cmd_suite(opts);
  } catch (const eqobj::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return eqobj::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
