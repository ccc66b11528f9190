#include "eqobj/results.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "eqobj/errors.hpp"

namespace eqobj {

using ojson = nlohmann::ordered_json;

bool ResultRecord::all_passed() const {
  for (const auto& v : verdicts)
    if (!v.passed) return false;
  return true;
}

ojson json_number(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ojson config_to_json(const ScenarioConfig& c) {
  ojson tol;
  tol["bound_slack"] = c.tolerances.bound_slack;
  tol["dense_agreement"] = c.tolerances.dense_agreement;
  tol["fidelity_slack"] = c.tolerances.fidelity_slack;
  tol["mutual_information"] = c.tolerances.mutual_information;
  tol["product_distance"] = c.tolerances.product_distance;
  tol["cq_distance"] = c.tolerances.cq_distance;
  tol["product_law"] = c.tolerances.product_law;
  tol["log_linear_residual"] = c.tolerances.log_linear_residual;

  ojson j;
  j["name"] = c.name;
  j["experiment"] = to_string(c.experiment);
  // u64 seeds above 2^53 survive as integers in nlohmann; keep them exact
  j["seed"] = c.seed;
  j["instances"] = c.instances;
  j["system_dim"] = c.system_dim;
  j["env_dims"] = c.env_dims;
  j["family"] = c.family;
  j["pointer_values"] = c.pointer_values;
  j["env_rank"] = c.env_rank;
  j["iid_observers"] = c.iid_observers;
  j["time_window_multiples"] = c.time_window_multiples;
  j["time_samples"] = c.time_samples;
  j["partition_sizes"] = c.partition_sizes;
  j["tolerances"] = tol;
  return j;
}

std::string deterministic_json(const ResultRecord& r) {
  ojson j;
  j["config"] = config_to_json(r.config);
  ojson verdicts = ojson::array();
  for (const auto& v : r.verdicts) {
    ojson e;
    e["name"] = v.name;
    e["passed"] = v.passed;
    e["value"] = json_number(v.value);
    e["tolerance"] = json_number(v.tolerance);
    e["description"] = v.description;
    verdicts.push_back(e);
  }
  j["verdicts"] = verdicts;
  j["all_passed"] = r.all_passed();
  ojson decay = ojson::array();
  for (const auto& d : r.decay)
    decay.push_back(ojson{{"group_size", d.group_size},
                          {"pair_i", d.pair_i},
                          {"pair_j", d.pair_j},
                          {"fidelity", json_number(d.fidelity)},
                          {"gamma", json_number(d.gamma)},
                          {"bound", json_number(d.bound)}});
  j["decay"] = decay;
  j["reports"] = r.reports;
  return j.dump(2) + "\n";
}

std::string timing_json(const ResultRecord& r) {
  ojson j;
  j["name"] = r.config.name;
  ojson stages = ojson::object();
  double total = 0.0;
  for (const auto& [stage, seconds] : r.wall_time) {
    stages[stage] = seconds;
    total += seconds;
  }
  j["wall_time_seconds"] = stages;
  j["total_seconds"] = total;
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::IoError, "cannot rename into " + path.string());
  }
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  std::filesystem::path p = stem;
  p += suffix;
  return p;
}

}  // namespace

void emit_csv(const ResultRecord& r, const std::filesystem::path& stem) {
  std::ostringstream decay;
  decay << "group_size,pair_i,pair_j,fidelity,gamma,bound\n";
  for (const auto& d : r.decay)
    decay << d.group_size << ',' << d.pair_i << ',' << d.pair_j << ',' << format_double(d.fidelity) << ','
          << format_double(d.gamma) << ',' << format_double(d.bound) << '\n';
  write_file_atomic(with_suffix(stem, ".decay.csv"), decay.str());

  std::ostringstream fid;
  fid << "observer,i,j,value\n";
  for (const auto& f : r.fidelities)
    fid << f.observer << ',' << f.i << ',' << f.j << ',' << format_double(f.value) << '\n';
  write_file_atomic(with_suffix(stem, ".fidelity.csv"), fid.str());
}

void write_results(const ResultRecord& r, const std::filesystem::path& stem) {
  write_file_atomic(with_suffix(stem, ".json"), deterministic_json(r));
  write_file_atomic(with_suffix(stem, ".timing.json"), timing_json(r));
  emit_csv(r, stem);
}

}  // namespace eqobj
