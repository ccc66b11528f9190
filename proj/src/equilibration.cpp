#include "eqobj/equilibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace eqobj {

namespace {

ComplexOperator hermitian_part(const ComplexOperator& op) { return 0.5 * (op + op.adjoint()); }

void require_window(double window, int n_samples) {
  if (!(window > 0.0) || !std::isfinite(window)) {
    std::ostringstream msg;
    msg << "averaging window must be positive and finite, got " << window;
    throw Error(ErrorKind::NonPositiveWindow, msg.str());
  }
  if (n_samples < 2) throw Error(ErrorKind::InvalidArgument, "need at least two time samples");
}

double sample_time(int s, int n_samples, double window) { return (s + 0.5) * window / n_samples; }

/// Absolute clustering tolerance shared by several spectra, scaled by their
/// combined range so that branchwise and dense paths agree on degeneracy.
double shared_tolerance(double lo, double hi) {
  const double magnitude = std::max(std::abs(lo), std::abs(hi));
  return kDefaultClusterTolerance * (hi - lo) + 64.0 * std::numeric_limits<double>::epsilon() * magnitude;
}

ComplexOperator pointer_frame(const DensityMatrix& rho_s0, const PointerBasis& basis) {
  return basis.unitary().adjoint() * rho_s0.op() * basis.unitary();
}

std::vector<int> combined_dims(int d_s, const std::vector<int>& env) {
  std::vector<int> dims{d_s};
  dims.insert(dims.end(), env.begin(), env.end());
  return dims;
}

/// sum_i p_i |b_i><b_i| (x) env_states[i]
ComplexOperator assemble_cq(const PointerBasis& basis, const std::vector<double>& p,
                            const std::vector<ComplexOperator>& env_states) {
  const long d_e = env_states.front().rows();
  const long total = basis.dim() * d_e;
  ComplexOperator out = ComplexOperator::Zero(total, total);
  if (basis.is_computational()) {
    for (int i = 0; i < basis.dim(); ++i) out.block(i * d_e, i * d_e, d_e, d_e) = p[i] * env_states[i];
  } else {
    for (int i = 0; i < basis.dim(); ++i) out += tensor(p[i] * basis.projector(i), env_states[i]);
  }
  return out;
}

void check_system_state(const DensityMatrix& rho_s0, const PointerBasis& basis) {
  if (rho_s0.dim() != basis.dim())
    throw Error(ErrorKind::DimensionMismatch, "system state dimension differs from pointer basis");
}

}  // namespace

// ---------------------------------------------------------------------------

ComplexOperator pinch(const ComplexOperator& rho, const SpectralDecomposition& decomp) {
  require_square(rho, "pinch input");
  if (rho.rows() != decomp.dim()) throw Error(ErrorKind::DimensionMismatch, "pinch: state and spectrum differ in dim");
  const auto& v = decomp.eigenvectors;
  ComplexOperator in_basis = v.adjoint() * rho * v;
  for (int c = 0; c < decomp.dim(); ++c)
    for (int r = 0; r < decomp.dim(); ++r)
      if (decomp.cluster_of[r] != decomp.cluster_of[c]) in_basis(r, c) = 0.0;
  return hermitian_part(v * in_basis * v.adjoint());
}

DensityMatrix pinch(const DensityMatrix& rho, const SpectralDecomposition& decomp) {
  return DensityMatrix::from_channel_output(pinch(rho.op(), decomp), rho.factor_dims());
}

DensityMatrix pinch(const DensityMatrix& rho, const ComplexOperator& h, double cluster_tolerance_rel) {
  if (h.rows() != rho.dim()) throw Error(ErrorKind::DimensionMismatch, "pinch: Hamiltonian and state differ in dim");
  return pinch(rho, hermitian_eig(h, cluster_tolerance_rel));
}

ComplexOperator evolve(const ComplexOperator& rho, const SpectralDecomposition& decomp, double t) {
  const auto& v = decomp.eigenvectors;
  ComplexOperator in_basis = v.adjoint() * rho * v;
  const int d = decomp.dim();
  ComplexVector phase(d);
  for (int m = 0; m < d; ++m) phase(m) = std::polar(1.0, -decomp.eigenvalues(m) * t);
  for (int c = 0; c < d; ++c)
    for (int r = 0; r < d; ++r) in_basis(r, c) *= phase(r) * std::conj(phase(c));
  return v * in_basis * v.adjoint();
}

Complex time_average_kernel(double delta, double window, bool same_level) {
  if (same_level) return {1.0, 0.0};
  const double x = delta * window;
  // i (exp(-i x) - 1) / x
  return Complex(0.0, 1.0) * (std::polar(1.0, -x) - 1.0) / x;
}

DensityMatrix finite_time_average(const DensityMatrix& rho0, const SpectralDecomposition& decomp, double window,
                                  int n_samples, TimeAverageMethod method) {
  require_window(window, n_samples);
  if (rho0.dim() != decomp.dim()) throw Error(ErrorKind::DimensionMismatch, "state and spectrum differ in dim");
  const auto& v = decomp.eigenvectors;
  const int d = decomp.dim();
  if (method == TimeAverageMethod::Analytic) {
    ComplexOperator in_basis = v.adjoint() * rho0.op() * v;
    for (int c = 0; c < d; ++c) {
      for (int r = 0; r < d; ++r) {
        const bool same = decomp.cluster_of[r] == decomp.cluster_of[c];
        in_basis(r, c) *= time_average_kernel(decomp.eigenvalues(r) - decomp.eigenvalues(c), window, same);
      }
    }
    return DensityMatrix::from_channel_output(hermitian_part(v * in_basis * v.adjoint()), rho0.factor_dims());
  }
  std::vector<ComplexOperator> samples;
  samples.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) samples.push_back(evolve(rho0.op(), decomp, sample_time(s, n_samples, window)));
  ComplexOperator mean = pairwise_sum(samples) / static_cast<double>(n_samples);
  return DensityMatrix::from_channel_output(hermitian_part(mean), rho0.factor_dims());
}

DensityMatrix finite_time_average(const DensityMatrix& rho0, const ComplexOperator& h, double window, int n_samples,
                                  TimeAverageMethod method) {
  return finite_time_average(rho0, hermitian_eig(h), window, n_samples, method);
}

std::vector<double> level_populations(const ComplexOperator& rho0, const SpectralDecomposition& decomp) {
  if (rho0.rows() != decomp.dim()) throw Error(ErrorKind::DimensionMismatch, "state and spectrum differ in dim");
  const auto& v = decomp.eigenvectors;
  std::vector<double> p(decomp.num_clusters(), 0.0);
  for (int a = 0; a < decomp.dim(); ++a) {
    const double weight = (v.col(a).adjoint() * rho0 * v.col(a))(0, 0).real();
    p[decomp.cluster_of[a]] += weight;
  }
  return p;
}

double effective_dimension(const DensityMatrix& rho0, const SpectralDecomposition& decomp) {
  const auto p = level_populations(rho0.op(), decomp);
  double sum_sq = 0.0;
  for (double pn : p) sum_sq += pn * pn;
  return std::clamp(1.0 / sum_sq, 1.0, static_cast<double>(decomp.num_clusters()));
}

double min_gap(const ComplexOperator& h) {
  const auto decomp = hermitian_eig(h);
  double gap = std::numeric_limits<double>::infinity();
  for (int n = 0; n + 1 < decomp.num_clusters(); ++n)
    gap = std::min(gap, decomp.cluster_energy(n + 1) - decomp.cluster_energy(n));
  return gap;
}

namespace {

SpectralDecomposition require_generic_spectrum(const ComplexOperator& h, EquilibrationReport& report) {
  require_hermitian(h, "Hamiltonian");
  const auto decomp = hermitian_eig(h);
  const auto diag = diagnose_eigenvalues(decomp.eigenvalues, kDefaultGapTolerance * decomp.spectral_range());
  if (!diag.is_nondegenerate || diag.has_equal_gaps) {
    std::ostringstream msg;
    msg << "bounds need non-degenerate levels and no equal gaps";
    if (diag.equal_gap_witness) {
      const auto& w = *diag.equal_gap_witness;
      msg << " (E" << w[1] << "-E" << w[0] << " == E" << w[3] << "-E" << w[2] << ")";
    } else if (diag.degeneracy_witness) {
      msg << " (E" << (*diag.degeneracy_witness)[0] << " == E" << (*diag.degeneracy_witness)[1] << ")";
    }
    throw Error(ErrorKind::EqualGapsDetected, msg.str());
  }
  report.min_gap = diag.min_gap;
  return decomp;
}

}  // namespace

EquilibrationReport check_observable_bound(const DensityMatrix& rho0, const ComplexOperator& h,
                                           const ComplexOperator& observable, double window, int n_samples) {
  require_window(window, n_samples);
  require_finite(observable, "observable");
  if (h.rows() != rho0.dim() || observable.rows() != rho0.dim() || observable.cols() != rho0.dim())
    throw Error(ErrorKind::DimensionMismatch, "state, Hamiltonian and observable must share a dimension");
  EquilibrationReport report;
  const auto decomp = require_generic_spectrum(h, report);
  report.window = window;
  report.n_time_samples = n_samples;
  report.large_window = window * report.min_gap >= 100.0;
  report.d_eff = effective_dimension(rho0, decomp);

  const auto& v = decomp.eigenvectors;
  const ComplexOperator rho_e = v.adjoint() * rho0.op() * v;
  const ComplexOperator obs_e = v.adjoint() * observable * v;
  const int d = decomp.dim();

  // Tr[O rho(t)] - Tr[O rho_inf] = sum_{m != n} O_nm rho_mn exp(-i (E_m - E_n) t)
  std::vector<Complex> weights;
  std::vector<double> freqs;
  for (int m = 0; m < d; ++m) {
    for (int n = 0; n < d; ++n) {
      if (decomp.cluster_of[m] == decomp.cluster_of[n]) continue;
      weights.push_back(obs_e(n, m) * rho_e(m, n));
      freqs.push_back(decomp.eigenvalues(m) - decomp.eigenvalues(n));
    }
  }
  std::vector<double> deviations(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const double t = sample_time(s, n_samples, window);
    Complex acc{0.0, 0.0};
    for (std::size_t w = 0; w < weights.size(); ++w) acc += weights[w] * std::polar(1.0, -freqs[w] * t);
    deviations[s] = std::norm(acc);
  }
  report.observable_bound_lhs = pairwise_sum(deviations) / n_samples;
  const double norm = operator_norm(observable);
  report.observable_bound_rhs = norm * norm / report.d_eff;
  return report;
}

EquilibrationReport check_subsystem_bound(const DensityMatrix& rho0, const ComplexOperator& h,
                                          std::span<const int> keep, double window, int n_samples) {
  require_window(window, n_samples);
  if (h.rows() != rho0.dim()) throw Error(ErrorKind::DimensionMismatch, "state and Hamiltonian differ in dim");
  EquilibrationReport report;
  const auto decomp = require_generic_spectrum(h, report);
  report.window = window;
  report.n_time_samples = n_samples;
  report.large_window = window * report.min_gap >= 100.0;
  report.d_eff = effective_dimension(rho0, decomp);

  const auto& dims = rho0.factor_dims();
  const ComplexOperator reduced_inf = partial_trace(pinch(rho0.op(), decomp), dims, keep);
  std::vector<double> distances(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const ComplexOperator rho_t = evolve(rho0.op(), decomp, sample_time(s, n_samples, window));
    distances[s] = trace_distance(partial_trace(rho_t, dims, keep), reduced_inf);
  }
  report.subsystem_bound_lhs = pairwise_sum(distances) / n_samples;
  const double d_keep = static_cast<double>(reduced_inf.rows());
  report.subsystem_bound_rhs = 0.5 * std::sqrt(d_keep * d_keep / report.d_eff);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

CqEquilibrium dense_equilibrium(const ComplexOperator& h, const PointerBasis& basis, const DensityMatrix& rho_s0,
                                const DensityMatrix& rho_e0) {
  const DensityMatrix parts[2] = {rho_s0, rho_e0};
  const DensityMatrix rho0 = product_state(parts);
  return CqEquilibrium{pinch(rho0, h), pointer_probabilities(rho_s0, basis), {}, {}, EquilibriumPath::Dense};
}

CqEquilibrium branchwise_equilibrium(const std::vector<ComplexOperator>& branch_ops, const PointerBasis& basis,
                                     const DensityMatrix& rho_s0, const DensityMatrix& rho_e0) {
  const int d_s = basis.dim();
  std::vector<SpectralDecomposition> spectra;
  spectra.reserve(d_s);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& op : branch_ops) {
    spectra.push_back(hermitian_eig_absolute(op, 0.0));
    lo = std::min(lo, spectra.back().eigenvalues(0));
    hi = std::max(hi, spectra.back().eigenvalues(spectra.back().dim() - 1));
  }
  const double tol = shared_tolerance(lo, hi);
  std::vector<double> all;
  for (auto& s : spectra) {
    s = recluster(std::move(s), tol);
    all.insert(all.end(), s.eigenvalues.data(), s.eigenvalues.data() + s.dim());
  }
  std::sort(all.begin(), all.end());
  bool degenerate = false;
  for (std::size_t a = 0; a + 1 < all.size(); ++a) degenerate = degenerate || (all[a + 1] - all[a] <= tol);

  if (degenerate) {
    const ComplexOperator rho_s_frame = pointer_frame(rho_s0, basis);
    if (auto witness = cross_branch_overlap(spectra, rho_e0.op(), &rho_s_frame, tol)) {
      std::ostringstream msg;
      msg << "degenerate Hamiltonian: branches " << witness->branch_i << " and " << witness->branch_j
          << " share energy " << witness->energy << " (clusters " << witness->cluster_n << ", "
          << witness->cluster_m << ") with environment overlap " << witness->overlap;
      throw Error(ErrorKind::DegenerateBranchStructure, msg.str());
    }
  }

  std::vector<ComplexOperator> env_states;
  env_states.reserve(d_s);
  for (int i = 0; i < d_s; ++i) env_states.push_back(pinch(rho_e0.op(), spectra[i]));
  auto p = pointer_probabilities(rho_s0, basis);
  ComplexOperator full = assemble_cq(basis, p, env_states);
  auto state = DensityMatrix::from_channel_output(std::move(full), combined_dims(d_s, rho_e0.factor_dims()));
  return CqEquilibrium{std::move(state), std::move(p), std::move(env_states), std::move(spectra),
                       EquilibriumPath::Branchwise};
}

}  // namespace

CqEquilibrium conditional_equilibrium(const ConditionalHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                      const DensityMatrix& rho_e0, EquilibriumPath path) {
  spec.validate();
  check_system_state(rho_s0, spec.basis);
  if (rho_e0.dim() != spec.env_dim())
    throw Error(ErrorKind::DimensionMismatch, "environment state does not match branch operators");
  if (path == EquilibriumPath::FactorWise)
    throw Error(ErrorKind::InvalidArgument, "factor-wise path needs a star spec with product environment");
  if (path == EquilibriumPath::Dense) return dense_equilibrium(assemble(spec), spec.basis, rho_s0, rho_e0);
  return branchwise_equilibrium(spec.branch_ops, spec.basis, rho_s0, rho_e0);
}

CqEquilibrium conditional_equilibrium(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                      const DensityMatrix& rho_e0, EquilibriumPath path) {
  spec.validate();
  if (path == EquilibriumPath::FactorWise)
    throw Error(ErrorKind::InvalidArgument, "factor-wise path needs the environment as a list of factor states");
  if (path == EquilibriumPath::Dense) {
    check_system_state(rho_s0, spec.basis);
    return dense_equilibrium(assemble(spec), spec.basis, rho_s0, rho_e0.with_factor_dims(spec.env_dims()));
  }
  return conditional_equilibrium(spec.to_conditional(), rho_s0, rho_e0.with_factor_dims(spec.env_dims()),
                                 EquilibriumPath::Branchwise);
}

StarConditionals star_conditionals(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                   std::span<const DensityMatrix> env_factors) {
  spec.validate();
  check_system_state(rho_s0, spec.basis);
  if (static_cast<int>(env_factors.size()) != spec.num_env())
    throw Error(ErrorKind::DimensionMismatch, "need one environment factor state per observer");
  const auto dims = spec.env_dims();
  for (int k = 0; k < spec.num_env(); ++k)
    if (env_factors[k].dim() != dims[k]) throw Error(ErrorKind::DimensionMismatch, "factor state dimension mismatch");

  const RealVector spectrum = star_spectrum(spec);
  const double tol = shared_tolerance(spectrum(0), spectrum(spectrum.size() - 1));
  const auto diag = diagnose_eigenvalues(spectrum, tol, false);
  if (!diag.is_nondegenerate) {
    throw Error(ErrorKind::DegenerateBranchStructure,
                "factor-wise equilibrium needs a non-degenerate star Hamiltonian");
  }

  StarConditionals out;
  out.probabilities = pointer_probabilities(rho_s0, spec.basis);
  out.states.resize(spec.system_dim());
  out.spectra.resize(spec.system_dim());
  for (int i = 0; i < spec.system_dim(); ++i) {
    for (int k = 0; k < spec.num_env(); ++k) {
      // c_k H_k^(i) and H_k^(i) share eigenvectors; the tolerance is rescaled
      auto local = hermitian_eig_absolute(spec.local_ops[i][k], tol / std::abs(spec.couplings[k]));
      out.states[i].push_back(pinch(env_factors[k], local));
      out.spectra[i].push_back(std::move(local));
    }
  }
  return out;
}

CqEquilibrium conditional_equilibrium(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                      std::span<const DensityMatrix> env_factors, EquilibriumPath path) {
  spec.validate();
  const DensityMatrix rho_e0 = product_state(env_factors).with_factor_dims(spec.env_dims());
  if (path == EquilibriumPath::Dense || path == EquilibriumPath::Branchwise)
    return conditional_equilibrium(spec, rho_s0, rho_e0, path);

  if (path == EquilibriumPath::Auto) {
    const RealVector spectrum = star_spectrum(spec);
    const double tol = shared_tolerance(spectrum(0), spectrum(spectrum.size() - 1));
    if (!diagnose_eigenvalues(spectrum, tol, false).is_nondegenerate)
      return conditional_equilibrium(spec, rho_s0, rho_e0, EquilibriumPath::Branchwise);
  }

  auto conditionals = star_conditionals(spec, rho_s0, env_factors);
  std::vector<ComplexOperator> env_states;
  for (int i = 0; i < spec.system_dim(); ++i) {
    std::vector<ComplexOperator> factors;
    for (const auto& s : conditionals.states[i]) factors.push_back(s.op());
    env_states.push_back(tensor_all(factors));
  }
  ComplexOperator full = assemble_cq(spec.basis, conditionals.probabilities, env_states);
  auto state = DensityMatrix::from_channel_output(std::move(full), spec.factorization().all_dims());
  return CqEquilibrium{std::move(state), std::move(conditionals.probabilities), std::move(env_states), {},
                       EquilibriumPath::FactorWise};
}

CqEquilibrium von_neumann_equilibrium(const VonNeumannSpec& spec, const DensityMatrix& rho_s0,
                                      const DensityMatrix& rho_e0) {
  spec.validate();
  check_system_state(rho_s0, spec.basis);
  if (rho_e0.dim() != spec.env_op.rows())
    throw Error(ErrorKind::DimensionMismatch, "environment state does not match the observable Y");

  auto y_spectrum = hermitian_eig_absolute(spec.env_op, 0.0);
  struct Level {
    double energy;
    int i, m;
  };
  std::vector<Level> levels;
  for (int i = 0; i < spec.system_dim(); ++i)
    for (int m = 0; m < y_spectrum.dim(); ++m)
      levels.push_back({spec.pointer_values[i] * y_spectrum.eigenvalues(m), i, m});
  std::sort(levels.begin(), levels.end(), [](const Level& a, const Level& b) { return a.energy < b.energy; });
  const double range = levels.back().energy - levels.front().energy;
  const double magnitude = std::max(std::abs(levels.front().energy), std::abs(levels.back().energy));
  const double tol = kDefaultGapTolerance * range + 64.0 * std::numeric_limits<double>::epsilon() * magnitude;
  for (std::size_t a = 0; a + 1 < levels.size(); ++a) {
    if (levels[a + 1].energy - levels[a].energy <= tol) {
      const auto& l = levels[a];
      const auto& r = levels[a + 1];
      std::ostringstream msg;
      msg << "x_" << l.i << " eps_" << l.m << " == x_" << r.i << " eps_" << r.m << " (witness i=" << l.i
          << " j=" << r.i << " m=" << l.m << " n=" << r.m << ", value " << l.energy << ")";
      throw Error(ErrorKind::ResonantEigenvalues, msg.str());
    }
  }

  // Non-resonance makes Y non-degenerate, so every level is its own cluster.
  y_spectrum = recluster(std::move(y_spectrum), 0.0);
  const ComplexOperator env = pinch(rho_e0.op(), y_spectrum);
  std::vector<ComplexOperator> env_states(spec.system_dim(), env);
  auto p = pointer_probabilities(rho_s0, spec.basis);
  ComplexOperator full = assemble_cq(spec.basis, p, env_states);
  auto state = DensityMatrix::from_channel_output(std::move(full), combined_dims(spec.system_dim(), rho_e0.factor_dims()));
  std::vector<SpectralDecomposition> spectra(spec.system_dim(), y_spectrum);
  return CqEquilibrium{std::move(state), std::move(p), std::move(env_states), std::move(spectra),
                       EquilibriumPath::Branchwise};
}

}  // namespace eqobj
