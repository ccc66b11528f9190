#include "eqobj/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "eqobj/errors.hpp"
#include "eqobj/qops.hpp"

namespace eqobj {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Impossibility: return "impossibility";
    case ExperimentKind::StandardModel: return "standard-model";
    case ExperimentKind::SbsScaling: return "sbs-scaling";
    case ExperimentKind::EquilibrationBounds: return "equilibration-bounds";
    case ExperimentKind::Custom: return "custom";
  }
  return "custom";
}

long ScenarioConfig::env_dim() const {
  long d = 1;
  for (int k : env_dims) {
    d *= k;
    if (d > std::numeric_limits<int>::max()) return d;
  }
  return d;
}

long ScenarioConfig::total_dim() const { return env_dim() * system_dim; }

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Located {
  std::string source;
  int line = 0;
  std::string field;

  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << source << ":" << line;
    if (!field.empty()) os << ": field '" << field << "'";
    os << ": " << msg;
    throw Error(ErrorKind::ConfigParseError, os.str());
  }
};

std::uint64_t parse_u64(const std::string& v, const Located& at) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) at.fail("expected a non-negative integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& v, const Located& at) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) at.fail("expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v, const Located& at) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    at.fail("expected a finite number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const Located& at) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  at.fail("expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> items;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) items.push_back(trim(cur));
  if (items.size() == 1 && items[0].empty()) items.clear();
  return items;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& v, const Located& at, F item) {
  std::vector<T> out;
  for (const auto& s : split_list(v)) {
    if (s.empty()) at.fail("empty list item");
    out.push_back(item(s, at));
  }
  return out;
}

// "2,2,4" or "2x8" (eight factors of dimension 2)
std::vector<int> parse_dims(const std::string& v, const Located& at) {
  auto x = v.find('x');
  if (x != std::string::npos) {
    int d = parse_int(trim(v.substr(0, x)), at);
    int n = parse_int(trim(v.substr(x + 1)), at);
    if (n < 0 || n > 64) at.fail("repeat count out of range");
    return std::vector<int>(static_cast<std::size_t>(n), d);
  }
  return parse_list<int>(v, at, parse_int);
}

ExperimentKind parse_kind(const std::string& v, const Located& at) {
  for (auto k : {ExperimentKind::Impossibility, ExperimentKind::StandardModel, ExperimentKind::SbsScaling,
                 ExperimentKind::EquilibrationBounds, ExperimentKind::Custom})
    if (v == to_string(k)) return k;
  at.fail("unknown experiment '" + v + "'");
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, const Located&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["experiment.kind"] = [](auto& c, auto& v, auto& at) { c.experiment = parse_kind(v, at); };
    t["experiment.name"] = [](auto& c, auto& v, auto&) { c.name = v; };
    t["experiment.seed"] = [](auto& c, auto& v, auto& at) { c.seed = parse_u64(v, at); };
    t["experiment.instances"] = [](auto& c, auto& v, auto& at) { c.instances = parse_int(v, at); };
    t["experiment.output"] = [](auto& c, auto& v, auto&) { c.output_path = v; };
    t["experiment.threads"] = [](auto& c, auto& v, auto& at) { c.threads = parse_int(v, at); };
    t["dims.system"] = [](auto& c, auto& v, auto& at) { c.system_dim = parse_int(v, at); };
    t["dims.env"] = [](auto& c, auto& v, auto& at) { c.env_dims = parse_dims(v, at); };
    t["hamiltonian.family"] = [](auto& c, auto& v, auto& at) {
      if (v != "star" && v != "conditional" && v != "von-neumann" && v != "gue")
        at.fail("unknown family '" + v + "'");
      c.family = v;
    };
    t["hamiltonian.pointer_values"] = [](auto& c, auto& v, auto& at) {
      c.pointer_values = parse_list<double>(v, at, parse_double);
    };
    t["hamiltonian.env_rank"] = [](auto& c, auto& v, auto& at) { c.env_rank = parse_int(v, at); };
    t["hamiltonian.iid_observers"] = [](auto& c, auto& v, auto& at) { c.iid_observers = parse_bool(v, at); };
    t["time.window_multiples"] = [](auto& c, auto& v, auto& at) {
      c.time_window_multiples = parse_list<double>(v, at, parse_double);
    };
    t["time.samples"] = [](auto& c, auto& v, auto& at) { c.time_samples = parse_int(v, at); };
    t["partition.sizes"] = [](auto& c, auto& v, auto& at) { c.partition_sizes = parse_list<int>(v, at, parse_int); };

    auto tol = [&t](const std::string& key, double Tolerances::*member) {
      t[key] = [member](auto& c, auto& v, auto& at) {
        double x = parse_double(v, at);
        if (x < 0.0) at.fail("tolerance must be non-negative");
        c.tolerances.*member = x;
      };
    };
    tol("tolerances.equilibration.bound_slack", &Tolerances::bound_slack);
    tol("tolerances.equilibration.dense_agreement", &Tolerances::dense_agreement);
    tol("tolerances.objectivity.fidelity_slack", &Tolerances::fidelity_slack);
    tol("tolerances.objectivity.mutual_information", &Tolerances::mutual_information);
    tol("tolerances.objectivity.product_distance", &Tolerances::product_distance);
    tol("tolerances.objectivity.cq_distance", &Tolerances::cq_distance);
    tol("tolerances.objectivity.product_law", &Tolerances::product_law);
    tol("tolerances.objectivity.log_linear_residual", &Tolerances::log_linear_residual);
    return t;
  }();
  return table;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& source) {
  ScenarioConfig config;
  std::istringstream in(text);
  std::string raw, section;
  std::set<std::string> seen;
  Located at{source, 0, {}};
  while (std::getline(in, raw)) {
    ++at.line;
    at.field.clear();
    auto hash = raw.find_first_of("#;");
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) at.fail("empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) at.fail("expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("missing key");
    std::string full = section.empty() ? key : section + "." + key;
    at.field = full;
    auto it = setters().find(full);
    if (it == setters().end()) at.fail("unknown key");
    if (!seen.insert(full).second) at.fail("duplicate key");
    if (value.empty()) at.fail("missing value");
    it->second(config, value, at);
  }
  if (!seen.count("experiment.kind")) throw Error(ErrorKind::ConfigParseError, source + ": missing field 'experiment.kind'");
  if (!seen.count("experiment.seed")) throw Error(ErrorKind::ConfigParseError, source + ": missing field 'experiment.seed'");
  return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  ScenarioConfig config = parse_config(buf.str(), path.string());
  if (config.name.empty()) config.name = path.stem().string();
  return config;
}

void validate_config(const ScenarioConfig& c) {
  auto bad = [](const std::string& field, const std::string& msg) {
    throw Error(ErrorKind::ConfigParseError, "field '" + field + "': " + msg);
  };
  if (c.instances < 1) bad("experiment.instances", "must be >= 1");
  if (c.threads < 1) bad("experiment.threads", "must be >= 1");
  if (c.system_dim < 2) bad("dims.system", "must be >= 2");
  if (c.env_dims.empty()) bad("dims.env", "at least one environment factor is required");
  for (int d : c.env_dims)
    if (d < 2) bad("dims.env", "every factor must have dimension >= 2");
  if (c.total_dim() > static_cast<long>(max_dim()))
    throw Error(ErrorKind::DimensionOverflow, "total dimension " + std::to_string(c.total_dim()) +
                                                  " exceeds max_dim " + std::to_string(max_dim()));
  if (c.env_rank < 0 || c.env_rank > c.env_dim()) bad("hamiltonian.env_rank", "must be in [0, d_E]");
  if (c.time_samples < 1) bad("time.samples", "must be >= 1");
  for (double w : c.time_window_multiples)
    if (w <= 0.0) bad("time.window_multiples", "must be positive");
  if (!c.pointer_values.empty() && static_cast<int>(c.pointer_values.size()) != c.system_dim)
    bad("hamiltonian.pointer_values", "needs one value per pointer state");
  for (int s : c.partition_sizes)
    if (s < 1 || s > static_cast<int>(c.env_dims.size()))
      bad("partition.sizes", "sizes must lie in [1, number of environment factors]");

  switch (c.experiment) {
    case ExperimentKind::SbsScaling:
      if (c.partition_sizes.empty()) bad("partition.sizes", "required for sbs-scaling");
      if (!c.family.empty() && c.family != "star") bad("hamiltonian.family", "sbs-scaling uses the star family");
      break;
    case ExperimentKind::EquilibrationBounds:
      if (c.time_window_multiples.empty()) bad("time.window_multiples", "required for equilibration-bounds");
      if (!c.family.empty() && c.family != "gue" && c.family != "conditional")
        bad("hamiltonian.family", "equilibration-bounds supports gue or conditional");
      break;
    case ExperimentKind::StandardModel:
      if (!c.family.empty() && c.family != "von-neumann") bad("hamiltonian.family", "standard-model uses von-neumann");
      break;
    case ExperimentKind::Impossibility:
      if (!c.family.empty() && c.family != "conditional" && c.family != "star")
        bad("hamiltonian.family", "impossibility supports conditional or star");
      break;
    case ExperimentKind::Custom:
      if (c.family.empty()) bad("hamiltonian.family", "required for custom experiments");
      break;
  }
}

}  // namespace eqobj
