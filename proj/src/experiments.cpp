#include "eqobj/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "eqobj/equilibration.hpp"
#include "eqobj/objectivity.hpp"

namespace eqobj {

using ojson = nlohmann::ordered_json;

namespace {

struct CheckSpec {
  std::string name;
  double tolerance;
  std::string description;
};

struct InstanceOutput {
  ojson report = ojson::object();
  std::vector<std::pair<std::string, double>> measures;  // smaller is better
  std::vector<DecayRow> decay;
  std::vector<FidelityEntry> fidelities;

  void measure(const std::string& name, double value) { measures.emplace_back(name, value); }
};

using InstanceFn = std::function<InstanceOutput(int index, std::uint64_t seed)>;

struct Plan {
  std::vector<CheckSpec> checks;
  InstanceFn instance;
};

ojson matrix_json(const RealMatrix& m) {
  ojson rows = ojson::array();
  for (int i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(json_number(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

ojson vector_json(const std::vector<double>& v) {
  ojson out = ojson::array();
  for (double x : v) out.push_back(json_number(x));
  return out;
}

int draw_rank(const ScenarioConfig& c, int dim, Rng& rng) {
  if (c.env_rank > 0) return std::min(c.env_rank, dim);
  return std::uniform_int_distribution<int>(1, dim)(rng);
}

std::vector<double> draw_pointer_values(const ScenarioConfig& c, Rng& rng) {
  if (!c.pointer_values.empty()) return c.pointer_values;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> x(c.system_dim);
  for (double& v : x) v = u(rng);
  return x;
}

/// Each instance is independent; slots are written by index so the result is
/// the same for any thread count.
std::vector<InstanceOutput> run_instances(int n, int threads, const InstanceFn& fn, std::uint64_t seed) {
  std::vector<InstanceOutput> out(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](int t) {
    for (int s = t; s < n; s += threads) {
      try {
        out[s] = fn(s, derive_seed(seed, static_cast<std::uint64_t>(s)));
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (int s = 0; s < n; ++s) {
    if (!errors[s]) continue;
    try {
      std::rethrow_exception(errors[s]);
    } catch (const Error& e) {
      throw Error(e.kind(), "instance " + std::to_string(s) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Plan impossibility_plan(const ScenarioConfig& c) {
  Plan plan;
  plan.checks = {
      {"fidelity-above-tight-bound", c.tolerances.fidelity_slack,
       "max over branch pairs of Tr(rho_E0^2)/(d_i d_j) - F(rho_E^(i), rho_E^(j))"},
      {"fidelity-above-loose-bound", c.tolerances.fidelity_slack, "max over branch pairs of 1/d_E^2 - F"},
      {"cq-form", c.tolerances.cq_distance, "trace distance of the equilibrium to its pointer-dephased version"},
  };
  plan.instance = [c](int, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0));
    const int d_s = c.system_dim;
    const int d_e = static_cast<int>(c.env_dim());
    ConditionalHamiltonianSpec spec =
        c.family == "star" ? random_branch_ensemble(HilbertFactorization(d_s, c.env_dims), derive_seed(seed, 1))
                                 .to_conditional()
                           : random_conditional(d_s, c.env_dims, derive_seed(seed, 1));
    const DensityMatrix rho_s0 = random_density(d_s, d_s, rng);
    const int rank = draw_rank(c, d_e, rng);
    const DensityMatrix rho_e0 = random_density(d_e, rank, rng).with_factor_dims(c.env_dims);
    const auto eq = conditional_equilibrium(spec, rho_s0, rho_e0, EquilibriumPath::Branchwise);

    InstanceOutput out;
    double worst_tight = -std::numeric_limits<double>::infinity(), worst_loose = worst_tight;
    ojson pairs = ojson::array();
    std::vector<int> levels;
    for (const auto& s : eq.branch_spectra) levels.push_back(s.num_clusters());
    for (int i = 0; i < d_s; ++i) {
      if (eq.probabilities[i] <= kProbabilityFloor) continue;
      for (int j = i + 1; j < d_s; ++j) {
        if (eq.probabilities[j] <= kProbabilityFloor) continue;
        const double f = fidelity(eq.env_states[i], eq.env_states[j]);
        const auto lb = fidelity_lower_bound(rho_e0, levels[i], levels[j], d_e);
        worst_tight = std::max(worst_tight, lb.tight - f);
        worst_loose = std::max(worst_loose, lb.loose - f);
        pairs.push_back(ojson{{"i", i},
                              {"j", j},
                              {"fidelity", json_number(f)},
                              {"tight_bound", json_number(lb.tight)},
                              {"loose_bound", json_number(lb.loose)},
                              // only guaranteed for pure rho_E0 or degenerate branches
                              {"tight_at_least_loose", lb.tight >= lb.loose - c.tolerances.fidelity_slack}});
        out.fidelities.push_back({0, i, j, f});
      }
    }
    const double cq = cq_distance(eq.state, spec.basis);
    out.measure("fidelity-above-tight-bound", worst_tight);
    out.measure("fidelity-above-loose-bound", worst_loose);
    out.measure("cq-form", cq);
    out.report["probabilities"] = vector_json(eq.probabilities);
    out.report["env_rank"] = rank;
    out.report["env_purity"] = json_number(rho_e0.purity());
    out.report["branch_levels"] = levels;
    out.report["pairs"] = pairs;
    out.report["cq_distance"] = json_number(cq);
    out.report["faithful"] = check_faithfulness(eq.state, spec.basis).faithful;
    return out;
  };
  return plan;
}

Plan standard_model_plan(const ScenarioConfig& c) {
  Plan plan;
  plan.checks = {
      {"no-correlation", c.tolerances.mutual_information, "mutual information I(S:E) of the equilibrium, in nats"},
      {"product-form", c.tolerances.product_distance,
       "trace distance to (dephased rho_S0) (x) (rho_E0 pinched by the environment observable)"},
      {"dense-agreement", c.tolerances.dense_agreement, "trace distance to the dense full-space pinching"},
  };
  plan.instance = [c](int, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0));
    const int d_s = c.system_dim;
    const int d_e = static_cast<int>(c.env_dim());
    VonNeumannSpec spec;
    spec.basis = PointerBasis(d_s);
    spec.pointer_values = draw_pointer_values(c, rng);
    spec.env_op = random_gue(d_e, rng);
    const DensityMatrix rho_s0 = random_density(d_s, d_s, rng);
    const DensityMatrix rho_e0 = random_density(d_e, draw_rank(c, d_e, rng), rng).with_factor_dims(c.env_dims);
    const auto eq = von_neumann_equilibrium(spec, rho_s0, rho_e0);

    const double mi = mutual_information(eq.state, d_s, d_e);
    const ComplexOperator dephased = rho_s0.op().diagonal().asDiagonal();
    const ComplexOperator expected = tensor(dephased, pinch(rho_e0.op(), hermitian_eig(spec.env_op)));
    const double product_distance = trace_distance(eq.state.op(), expected);
    const DensityMatrix parts[2] = {rho_s0, rho_e0};
    const ComplexOperator dense = pinch(product_state(parts).op(), hermitian_eig(assemble(spec)));
    const double dense_distance = trace_distance(eq.state.op(), dense);

    InstanceOutput out;
    out.measure("no-correlation", mi);
    out.measure("product-form", product_distance);
    out.measure("dense-agreement", dense_distance);
    for (int i = 0; i < d_s; ++i)
      for (int j = i + 1; j < d_s; ++j) out.fidelities.push_back({0, i, j, fidelity(eq.env_states[i], eq.env_states[j])});
    out.report["pointer_values"] = vector_json(spec.pointer_values);
    out.report["probabilities"] = vector_json(eq.probabilities);
    out.report["mutual_information"] = json_number(mi);
    out.report["product_distance"] = json_number(product_distance);
    out.report["dense_distance"] = json_number(dense_distance);
    return out;
  };
  return plan;
}

StarHamiltonianSpec draw_star(const ScenarioConfig& c, std::uint64_t seed) {
  const HilbertFactorization fact(c.system_dim, c.env_dims);
  if (!c.iid_observers) return random_branch_ensemble(fact, seed);
  for (int attempt = 0; attempt <= kMaxEnsembleRedraws; ++attempt) {
    StarHamiltonianSpec spec = random_branch_ensemble(fact, derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    for (auto& branch : spec.local_ops)
      for (auto& op : branch) op = branch.front();
    const RealVector spectrum = star_spectrum(spec);
    const double range = spectrum(spectrum.size() - 1) - spectrum(0);
    if (diagnose_eigenvalues(spectrum, kDefaultGapTolerance * range, false).is_nondegenerate) return spec;
  }
  throw Error(ErrorKind::DegenerateAfterRetries, "replicated star Hamiltonian stayed degenerate");
}

Plan sbs_scaling_plan(const ScenarioConfig& c) {
  Plan plan;
  plan.checks = {
      {"macro-bound", c.tolerances.fidelity_slack, "max over sizes and pairs of F_macro - exp(-gamma |N_q^(ij)|)"},
      {"product-law", c.tolerances.product_law,
       "max |F_macro - F(dense group states)| over sizes and pairs"},
      {"monotone", c.tolerances.fidelity_slack, "max increase of F_macro between consecutive group sizes"},
      {"sbs-consistency", c.tolerances.product_law,
       "|max pairwise F from the full equilibrium state - max F_macro| per size"},
  };
  if (c.iid_observers)
    plan.checks.push_back({"log-linear", c.tolerances.log_linear_residual,
                           "max residual of a least-squares line through log F(dense) against group size"});
  std::vector<int> sizes = c.partition_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  plan.instance = [c, sizes](int, std::uint64_t seed) {
    if (c.iid_observers && std::adjacent_find(c.env_dims.begin(), c.env_dims.end(), std::not_equal_to<>()) !=
                               c.env_dims.end())
      throw Error(ErrorKind::InvalidArgument, "i.i.d. observers need equal environment factor dimensions");
    Rng rng(derive_seed(seed, 0));
    const int d_s = c.system_dim;
    const int n_env = static_cast<int>(c.env_dims.size());
    const StarHamiltonianSpec spec = draw_star(c, derive_seed(seed, 1));
    const DensityMatrix rho_s0 = random_density(d_s, d_s, rng);
    std::vector<DensityMatrix> factors;
    for (int k = 0; k < n_env; ++k) {
      if (c.iid_observers && k > 0) {
        factors.push_back(factors.front());
        continue;
      }
      factors.push_back(random_density(c.env_dims[k], draw_rank(c, c.env_dims[k], rng), rng));
    }
    const auto conditionals = star_conditionals(spec, rho_s0, factors);
    const auto eq = conditional_equilibrium(spec, rho_s0, factors, EquilibriumPath::FactorWise);

    InstanceOutput out;
    const auto& p = conditionals.probabilities;
    std::map<std::pair<int, int>, std::vector<double>> log_dense;
    std::map<std::pair<int, int>, double> previous;
    double worst_bound = -std::numeric_limits<double>::infinity();
    double worst_product = 0.0, worst_monotone = -std::numeric_limits<double>::infinity(), worst_sbs = 0.0;
    ojson per_size = ojson::array();
    MacroFidelity last;
    for (int s : sizes) {
      const MacroPartition partition = MacroPartition::leading(s);
      last = macro_fidelity_matrix(conditionals, partition);
      const auto& g = last.groups.front();
      double max_f = 0.0, max_bound = 0.0;
      ojson pairs = ojson::array();
      for (int i = 0; i < d_s; ++i) {
        if (p[i] <= kProbabilityFloor) continue;
        for (int j = i + 1; j < d_s; ++j) {
          if (p[j] <= kProbabilityFloor) continue;
          const double f = g.fidelity(i, j);
          std::vector<ComplexOperator> gi, gj;
          for (int k = 0; k < s; ++k) {
            gi.push_back(conditionals.states[i][k].op());
            gj.push_back(conditionals.states[j][k].op());
          }
          const double f_dense = fidelity(tensor_all(gi), tensor_all(gj));
          worst_bound = std::max(worst_bound, f - g.bound(i, j));
          worst_product = std::max(worst_product, std::abs(f - f_dense));
          auto key = std::make_pair(i, j);
          if (previous.count(key)) worst_monotone = std::max(worst_monotone, f - previous[key]);
          previous[key] = f;
          log_dense[key].push_back(std::log(f_dense));
          max_f = std::max(max_f, f);
          max_bound = std::max(max_bound, g.bound(i, j));
          out.decay.push_back({s, i, j, f, g.gamma(i, j), g.bound(i, j)});
          pairs.push_back(ojson{{"i", i},
                                {"j", j},
                                {"fidelity", json_number(f)},
                                {"fidelity_dense", json_number(f_dense)},
                                {"gamma", json_number(g.gamma(i, j))},
                                {"active_sites", g.active_sites(i, j)},
                                {"bound", json_number(g.bound(i, j))}});
        }
      }
      const SbsDeviation dev = sbs_deviation(eq.state, spec.basis, partition);
      worst_sbs = std::max(worst_sbs, std::abs(dev.max_fidelity - max_f));
      per_size.push_back(ojson{{"group_size", s},
                               {"max_fidelity", json_number(max_f)},
                               {"max_bound", json_number(max_bound)},
                               {"sbs_deviation", json_number(dev.value)},
                               {"cq_distance", json_number(dev.cq_distance)},
                               {"independence_deviation", json_number(dev.independence_deviation)},
                               {"pairs", pairs}});
    }
    if (worst_monotone == -std::numeric_limits<double>::infinity()) worst_monotone = 0.0;
    out.measure("macro-bound", worst_bound);
    out.measure("product-law", worst_product);
    out.measure("monotone", worst_monotone);
    out.measure("sbs-consistency", worst_sbs);

    if (c.iid_observers) {
      double residual = 0.0;
      for (const auto& [key, logs] : log_dense) {
        if (logs.size() < 3) continue;
        // least-squares line through (size, log F)
        const double n = static_cast<double>(logs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t a = 0; a < logs.size(); ++a) {
          sx += sizes[a];
          sy += logs[a];
          sxx += static_cast<double>(sizes[a]) * sizes[a];
          sxy += sizes[a] * logs[a];
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double intercept = (sy - slope * sx) / n;
        for (std::size_t a = 0; a < logs.size(); ++a)
          residual = std::max(residual, std::abs(logs[a] - (intercept + slope * sizes[a])));
      }
      out.measure("log-linear", residual);
    }

    for (int k = 0; k < n_env; ++k)
      for (int i = 0; i < d_s; ++i)
        for (int j = i + 1; j < d_s; ++j)
          if (p[i] > kProbabilityFloor && p[j] > kProbabilityFloor)
            out.fidelities.push_back({k, i, j, last.fidelity_micro[k](i, j)});

    ojson eta = ojson::array();
    for (const auto& e : last.eta) eta.push_back(matrix_json(e));
    out.report["couplings"] = vector_json(spec.couplings);
    out.report["probabilities"] = vector_json(p);
    out.report["eta"] = eta;
    out.report["sizes"] = per_size;
    return out;
  };
  return plan;
}

ComplexOperator draw_generic_hamiltonian(const ScenarioConfig& c, std::uint64_t seed) {
  const int total = static_cast<int>(c.total_dim());
  for (int attempt = 0; attempt <= kMaxEnsembleRedraws; ++attempt) {
    const std::uint64_t s = derive_seed(seed, 100 + static_cast<std::uint64_t>(attempt));
    ComplexOperator h;
    if (c.family == "conditional") {
      h = assemble(random_conditional(c.system_dim, c.env_dims, s));
    } else {
      Rng rng(s);
      h = random_gue(total, rng);
    }
    const auto diag = diagnose_spectrum(h);
    if (diag.is_nondegenerate && !diag.has_equal_gaps) return h;
  }
  throw Error(ErrorKind::DegenerateAfterRetries, "no Hamiltonian free of equal gaps after redraws");
}

Plan equilibration_bounds_plan(const ScenarioConfig& c) {
  Plan plan;
  plan.checks = {
      {"observable-bound", c.tolerances.bound_slack,
       "max over large windows of <|Tr O rho(t) - Tr O rho_inf|^2> - ||O||^2 / d_eff"},
      {"subsystem-bound", c.tolerances.bound_slack,
       "max over large windows of <D(rho_S(t), rho_S,inf)> - (1/2) sqrt(d_S^2 / d_eff)"},
  };
  plan.instance = [c](int, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0));
    const int d_s = c.system_dim;
    const int d_e = static_cast<int>(c.env_dim());
    const ComplexOperator h = draw_generic_hamiltonian(c, derive_seed(seed, 1));
    const DensityMatrix rho_s0 = random_density(d_s, d_s, rng);
    const DensityMatrix rho_e0 = random_density(d_e, draw_rank(c, d_e, rng), rng).with_factor_dims(c.env_dims);
    const DensityMatrix parts[2] = {rho_s0, rho_e0};
    const DensityMatrix rho0 = product_state(parts);
    const ComplexOperator observable = random_gue(rho0.dim(), rng);
    const double gap = min_gap(h);
    const int keep[1] = {0};

    InstanceOutput out;
    ojson windows = ojson::array();
    double worst_obs = -std::numeric_limits<double>::infinity(), worst_sub = worst_obs;
    bool any_large = false;
    for (double w : c.time_window_multiples) {
      const double window = w / gap;
      const auto obs = check_observable_bound(rho0, h, observable, window, c.time_samples);
      const auto sub = check_subsystem_bound(rho0, h, keep, window, c.time_samples);
      if (obs.large_window) {
        any_large = true;
        worst_obs = std::max(worst_obs, obs.observable_bound_lhs - obs.observable_bound_rhs);
        worst_sub = std::max(worst_sub, sub.subsystem_bound_lhs - sub.subsystem_bound_rhs);
      }
      windows.push_back(ojson{{"multiple", json_number(w)},
                              {"window", json_number(window)},
                              {"large_window", obs.large_window},
                              {"d_eff", json_number(obs.d_eff)},
                              {"observable_lhs", json_number(obs.observable_bound_lhs)},
                              {"observable_rhs", json_number(obs.observable_bound_rhs)},
                              {"subsystem_lhs", json_number(sub.subsystem_bound_lhs)},
                              {"subsystem_rhs", json_number(sub.subsystem_bound_rhs)}});
    }
    if (any_large) {
      out.measure("observable-bound", worst_obs);
      out.measure("subsystem-bound", worst_sub);
    }
    out.report["min_gap"] = json_number(gap);
    out.report["windows"] = windows;
    return out;
  };
  return plan;
}

Plan custom_plan(const ScenarioConfig& c) {
  Plan plan;
  plan.checks = {{"dense-agreement", c.tolerances.dense_agreement,
                  "trace distance between the structured equilibrium and dense full-space pinching"}};
  plan.instance = [c](int, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0));
    const int d_s = c.system_dim;
    const int d_e = static_cast<int>(c.env_dim());
    const PointerBasis basis(d_s);
    const DensityMatrix rho_s0 = random_density(d_s, d_s, rng);
    std::vector<DensityMatrix> factors;
    for (int d : c.env_dims) factors.push_back(random_density(d, draw_rank(c, d, rng), rng));
    const DensityMatrix rho_e0 = product_state(factors).with_factor_dims(c.env_dims);
    const DensityMatrix parts[2] = {rho_s0, rho_e0};
    const DensityMatrix rho0 = product_state(parts);

    ComplexOperator h;
    std::optional<DensityMatrix> structured;
    if (c.family == "star") {
      const auto spec = random_branch_ensemble(HilbertFactorization(d_s, c.env_dims), derive_seed(seed, 1));
      h = assemble(spec);
      structured = conditional_equilibrium(spec, rho_s0, factors).state;
    } else if (c.family == "conditional") {
      const auto spec = random_conditional(d_s, c.env_dims, derive_seed(seed, 1));
      h = assemble(spec);
      structured = conditional_equilibrium(spec, rho_s0, rho_e0).state;
    } else if (c.family == "von-neumann") {
      VonNeumannSpec spec{basis, draw_pointer_values(c, rng), random_gue(d_e, rng)};
      h = assemble(spec);
      structured = von_neumann_equilibrium(spec, rho_s0, rho_e0).state;
    } else {
      Rng hr(derive_seed(seed, 1));
      h = random_gue(rho0.dim(), hr);
    }
    const DensityMatrix dense = pinch(rho0, h);
    const DensityMatrix& state = structured ? *structured : dense;

    InstanceOutput out;
    if (structured) out.measure("dense-agreement", trace_distance(structured->op(), dense.op()));
    const double cq = cq_distance(state, basis);
    out.report["family"] = c.family;
    out.report["cq_distance"] = json_number(cq);
    out.report["mutual_information"] = json_number(mutual_information(state, d_s, d_e));
    if (cq <= 1e-8) out.report["faithful"] = check_faithfulness(state, basis).faithful;
    ojson sbs = ojson::array();
    for (int s : c.partition_sizes) {
      const auto dev = sbs_deviation(state, basis, MacroPartition::leading(s));
      sbs.push_back(ojson{{"group_size", s},
                          {"value", json_number(dev.value)},
                          {"max_fidelity", json_number(dev.max_fidelity)},
                          {"independence_deviation", json_number(dev.independence_deviation)}});
    }
    out.report["sbs"] = sbs;
    return out;
  };
  return plan;
}

Plan make_plan(const ScenarioConfig& c) {
  switch (c.experiment) {
    case ExperimentKind::Impossibility: return impossibility_plan(c);
    case ExperimentKind::StandardModel: return standard_model_plan(c);
    case ExperimentKind::SbsScaling: return sbs_scaling_plan(c);
    case ExperimentKind::EquilibrationBounds: return equilibration_bounds_plan(c);
    case ExperimentKind::Custom: return custom_plan(c);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown experiment");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ResultRecord run(const ScenarioConfig& config) {
  validate_config(config);
  const std::string scenario = config.name.empty() ? std::string(to_string(config.experiment)) : config.name;
  try {
    ResultRecord record;
    record.config = config;
    auto start = std::chrono::steady_clock::now();
    const Plan plan = make_plan(config);
    record.wall_time.emplace_back("setup", seconds_since(start));

    start = std::chrono::steady_clock::now();
    auto outputs = run_instances(config.instances, config.threads, plan.instance, config.seed);
    record.wall_time.emplace_back("instances", seconds_since(start));

    start = std::chrono::steady_clock::now();
    std::map<std::string, double> worst;
    for (int s = 0; s < config.instances; ++s) {
      auto& o = outputs[s];
      ojson entry;
      entry["instance"] = s;
      entry["seed"] = derive_seed(config.seed, static_cast<std::uint64_t>(s));
      ojson measures = ojson::object();
      for (const auto& [name, value] : o.measures) {
        measures[name] = json_number(value);
        auto it = worst.find(name);
        if (it == worst.end() || value > it->second || std::isnan(value)) worst[name] = value;
      }
      entry["measures"] = measures;
      entry["report"] = std::move(o.report);
      record.reports.push_back(std::move(entry));
    }
    // Plot tables describe the first instance; every instance is in `reports`.
    if (!outputs.empty()) {
      record.decay = std::move(outputs.front().decay);
      record.fidelities = std::move(outputs.front().fidelities);
    }
    for (const auto& check : plan.checks) {
      auto it = worst.find(check.name);
      if (it == worst.end()) continue;
      const double value = it->second;
      record.verdicts.push_back({check.name, !std::isnan(value) && value <= check.tolerance, value, check.tolerance,
                                 check.description});
    }
    record.wall_time.emplace_back("aggregate", seconds_since(start));
    return record;
  } catch (const Error& e) {
    throw Error(e.kind(), "scenario '" + scenario + "': " + e.what());
  }
}

int exit_code_for(const Error& error) {
  switch (error.kind()) {
    case ErrorKind::ConfigParseError:
    case ErrorKind::IoError:
    case ErrorKind::DimensionOverflow:
    case ErrorKind::InvalidDims:
      return 2;
    default:
      return 3;
  }
}

std::vector<SuiteEntry> run_suite(const std::filesystem::path& dir, const SuiteOverrides& overrides) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> configs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ini") configs.push_back(entry.path());
  std::sort(configs.begin(), configs.end());
  const fs::path out_dir = overrides.out_dir.value_or(dir / "results");

  std::vector<SuiteEntry> entries;
  ojson summary = ojson::array();
  for (const auto& path : configs) {
    SuiteEntry entry;
    entry.config_path = path;
    entry.name = path.stem().string();
    try {
      ScenarioConfig config = load_config(path);
      if (overrides.seed) config.seed = *overrides.seed;
      if (overrides.threads) config.threads = *overrides.threads;
      validate_config(config);
      const ResultRecord record = run(config);
      write_results(record, out_dir / path.stem());
      for (const auto& v : record.verdicts) entry.verdicts_passed += v.passed ? 1 : 0;
      entry.verdicts_total = static_cast<int>(record.verdicts.size());
      entry.exit_code = record.all_passed() ? 0 : 1;
    } catch (const Error& e) {
      entry.exit_code = exit_code_for(e);
      entry.message = e.what();
    }
    summary.push_back(ojson{{"config", path.filename().string()},
                            {"exit_code", entry.exit_code},
                            {"verdicts_passed", entry.verdicts_passed},
                            {"verdicts_total", entry.verdicts_total},
                            {"message", entry.message}});
    entries.push_back(std::move(entry));
  }
  write_file_atomic(out_dir / "suite.json", summary.dump(2) + "\n");
  return entries;
}

}  // namespace eqobj
