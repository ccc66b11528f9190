#include "eqobj/hamiltonians.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace eqobj {

namespace {

/// |b_i><b_i| in the pointer basis.
ComplexOperator pointer_projector(const PointerBasis& basis, int i) { return basis.projector(i); }

}  // namespace

// ---------------------------------------------------------------------------
// Conditional

int ConditionalHamiltonianSpec::env_dim() const {
  return branch_ops.empty() ? 0 : static_cast<int>(branch_ops.front().rows());
}

std::vector<int> ConditionalHamiltonianSpec::env_factor_dims() const {
  if (env_dims.empty()) return {env_dim()};
  return env_dims;
}

void ConditionalHamiltonianSpec::validate() const {
  if (static_cast<int>(branch_ops.size()) != system_dim()) {
    std::ostringstream msg;
    msg << "expected " << system_dim() << " branch operators, got " << branch_ops.size();
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  for (const auto& op : branch_ops) {
    require_hermitian(op, "branch operator");
    if (op.rows() != env_dim()) throw Error(ErrorKind::DimensionMismatch, "branch operators differ in dimension");
  }
  long product = 1;
  for (int d : env_factor_dims()) product *= d;
  if (product != env_dim()) throw Error(ErrorKind::DimensionMismatch, "env_dims do not match branch dimension");
}

ComplexOperator assemble(const ConditionalHamiltonianSpec& spec) {
  spec.validate();
  const long total = static_cast<long>(spec.system_dim()) * spec.env_dim();
  if (static_cast<std::size_t>(total) > max_dim())
    throw Error(ErrorKind::DimensionOverflow, "assembled Hamiltonian exceeds max_dim");
  ComplexOperator h = ComplexOperator::Zero(total, total);
  for (int i = 0; i < spec.system_dim(); ++i) h += tensor(pointer_projector(spec.basis, i), spec.branch_ops[i]);
  return h;
}

// ---------------------------------------------------------------------------
// Star

std::vector<int> StarHamiltonianSpec::env_dims() const {
  std::vector<int> dims;
  if (local_ops.empty()) return dims;
  for (const auto& op : local_ops.front()) dims.push_back(static_cast<int>(op.rows()));
  return dims;
}

HilbertFactorization StarHamiltonianSpec::factorization() const {
  return HilbertFactorization(system_dim(), env_dims());
}

void StarHamiltonianSpec::validate() const {
  if (couplings.empty()) throw Error(ErrorKind::InvalidDims, "star spec needs at least one observer");
  for (double c : couplings) {
    if (!std::isfinite(c) || c == 0.0) throw Error(ErrorKind::InvalidArgument, "couplings must be finite and nonzero");
  }
  if (static_cast<int>(local_ops.size()) != system_dim())
    throw Error(ErrorKind::DimensionMismatch, "local_ops must have one row per pointer state");
  const auto dims = env_dims();
  for (const auto& row : local_ops) {
    if (row.size() != couplings.size())
      throw Error(ErrorKind::DimensionMismatch, "local_ops row length differs from number of couplings");
    for (std::size_t k = 0; k < row.size(); ++k) {
      require_hermitian(row[k], "local operator");
      if (row[k].rows() != dims[k]) throw Error(ErrorKind::DimensionMismatch, "local operator dims inconsistent");
    }
  }
  factorization().validate();
}

ComplexOperator StarHamiltonianSpec::branch_operator(int i) const {
  const auto dims = env_dims();
  long d_e = 1;
  for (int d : dims) d_e *= d;
  ComplexOperator sum = ComplexOperator::Zero(d_e, d_e);
  for (int k = 0; k < num_env(); ++k) sum += couplings[k] * embed(local_ops.at(i).at(k), dims, k);
  return sum;
}

ConditionalHamiltonianSpec StarHamiltonianSpec::to_conditional() const {
  validate();
  ConditionalHamiltonianSpec cond;
  cond.basis = basis;
  cond.env_dims = env_dims();
  for (int i = 0; i < system_dim(); ++i) cond.branch_ops.push_back(branch_operator(i));
  return cond;
}

ComplexOperator assemble(const StarHamiltonianSpec& spec) {
  spec.validate();
  const auto dims = spec.factorization().all_dims();
  const long total = spec.factorization().total_dim();
  ComplexOperator h = ComplexOperator::Zero(total, total);
  for (int i = 0; i < spec.system_dim(); ++i) {
    const ComplexOperator sys = pointer_projector(spec.basis, i);
    for (int k = 0; k < spec.num_env(); ++k) {
      // |i><i| (x) c_k H_k^(i), built directly on the full factor list
      ComplexOperator term = sys;
      for (int site = 0; site < spec.num_env(); ++site) {
        term = tensor(term, site == k ? ComplexOperator(spec.couplings[k] * spec.local_ops[i][k])
                                      : identity(dims[site + 1]));
      }
      h += term;
    }
  }
  return h;
}

RealVector star_spectrum(const StarHamiltonianSpec& spec) {
  spec.validate();
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(spec.factorization().total_dim()));
  for (int i = 0; i < spec.system_dim(); ++i) {
    std::vector<double> sums{0.0};
    for (int k = 0; k < spec.num_env(); ++k) {
      Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(spec.local_ops[i][k], Eigen::EigenvaluesOnly);
      if (solver.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "local eigensolve failed");
      std::vector<double> next;
      next.reserve(sums.size() * solver.eigenvalues().size());
      for (double s : sums)
        for (double e : solver.eigenvalues()) next.push_back(s + spec.couplings[k] * e);
      sums = std::move(next);
    }
    all.insert(all.end(), sums.begin(), sums.end());
  }
  std::sort(all.begin(), all.end());
  return Eigen::Map<RealVector>(all.data(), static_cast<Eigen::Index>(all.size()));
}

// ---------------------------------------------------------------------------
// von Neumann

void VonNeumannSpec::validate() const {
  if (static_cast<int>(pointer_values.size()) != system_dim())
    throw Error(ErrorKind::DimensionMismatch, "need one pointer value per pointer state");
  for (double x : pointer_values)
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, "pointer values must be finite");
  require_hermitian(env_op, "environment observable");
}

ComplexOperator VonNeumannSpec::system_op() const {
  ComplexOperator x = ComplexOperator::Zero(system_dim(), system_dim());
  for (int i = 0; i < system_dim(); ++i) x += pointer_values[i] * basis.projector(i);
  return x;
}

ComplexOperator assemble(const VonNeumannSpec& spec) {
  spec.validate();
  return tensor(spec.system_op(), spec.env_op);
}

ComplexOperator assemble(const HamiltonianSpec& spec) {
  return std::visit(
      [](const auto& s) -> ComplexOperator {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ComplexOperator>) {
          require_hermitian(s, "explicit Hamiltonian");
          return s;
        } else {
          return assemble(s);
        }
      },
      spec);
}

// ---------------------------------------------------------------------------
// Diagnostics

SpectrumDiagnostics diagnose_eigenvalues(const RealVector& ascending, double gap_tolerance_abs, bool scan_gaps) {
  SpectrumDiagnostics diag;
  diag.gap_tolerance = gap_tolerance_abs;
  diag.min_gap = std::numeric_limits<double>::infinity();
  const int d = static_cast<int>(ascending.size());
  for (int a = 0; a + 1 < d; ++a) {
    const double gap = ascending(a + 1) - ascending(a);
    if (gap <= gap_tolerance_abs) {
      if (diag.is_nondegenerate) diag.degeneracy_witness = std::array<int, 2>{a, a + 1};
      diag.is_nondegenerate = false;
    } else {
      diag.min_gap = std::min(diag.min_gap, gap);
    }
  }
  if (!scan_gaps) return diag;

  // Sorting the d(d-1)/2 gaps finds a pair within tolerance whenever one
  // exists, since any such pair brackets a run of adjacent sorted gaps.
  struct Gap {
    double value;
    int lo, hi;
  };
  std::vector<Gap> gaps;
  gaps.reserve(static_cast<std::size_t>(d) * (d - 1) / 2);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) gaps.push_back({ascending(b) - ascending(a), a, b});
  std::sort(gaps.begin(), gaps.end(), [](const Gap& x, const Gap& y) {
    if (x.value != y.value) return x.value < y.value;
    return x.lo != y.lo ? x.lo < y.lo : x.hi < y.hi;
  });
  for (std::size_t g = 0; g + 1 < gaps.size(); ++g) {
    if (gaps[g + 1].value - gaps[g].value <= gap_tolerance_abs) {
      diag.has_equal_gaps = true;
      diag.equal_gap_witness = std::array<int, 4>{gaps[g].lo, gaps[g].hi, gaps[g + 1].lo, gaps[g + 1].hi};
      break;
    }
  }
  return diag;
}

SpectrumDiagnostics diagnose_spectrum(const ComplexOperator& h, double gap_tolerance_rel) {
  require_hermitian(h, "diagnose_spectrum input");
  const auto decomp = hermitian_eig_absolute(h, 0.0);
  return diagnose_eigenvalues(decomp.eigenvalues, gap_tolerance_rel * decomp.spectral_range());
}

// ---------------------------------------------------------------------------
// Ensembles

ComplexOperator random_gue(int dim, Rng& rng) {
  std::normal_distribution<double> normal;
  ComplexOperator a(dim, dim);
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < dim; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      a(r, c) = Complex(re, im);
    }
  }
  ComplexOperator h = (a + a.adjoint()) / (2.0 * std::sqrt(static_cast<double>(dim)));
  // exact symmetry: copy the upper triangle onto the lower one
  for (int c = 0; c < dim; ++c) {
    h(c, c) = Complex(h(c, c).real(), 0.0);
    for (int r = c + 1; r < dim; ++r) h(r, c) = std::conj(h(c, r));
  }
  return h;
}

StarHamiltonianSpec random_branch_ensemble(const HilbertFactorization& fact, std::uint64_t seed) {
  fact.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> coupling(0.5, 1.5);
  for (int attempt = 0; attempt <= kMaxEnsembleRedraws; ++attempt) {
    StarHamiltonianSpec spec;
    spec.basis = PointerBasis(fact.system_dim);
    for (int k = 0; k < fact.num_env(); ++k) spec.couplings.push_back(coupling(rng));
    spec.local_ops.resize(fact.system_dim);
    for (int i = 0; i < fact.system_dim; ++i)
      for (int k = 0; k < fact.num_env(); ++k) spec.local_ops[i].push_back(random_gue(fact.env_dims[k], rng));
    const RealVector spectrum = star_spectrum(spec);
    const double range = spectrum(spectrum.size() - 1) - spectrum(0);
    if (diagnose_eigenvalues(spectrum, kDefaultGapTolerance * range, false).is_nondegenerate) return spec;
  }
  std::ostringstream msg;
  msg << "assembled star Hamiltonian stayed degenerate after " << kMaxEnsembleRedraws << " redraws (seed " << seed
      << ")";
  throw Error(ErrorKind::DegenerateAfterRetries, msg.str());
}

ConditionalHamiltonianSpec random_conditional(int system_dim, const std::vector<int>& env_dims, std::uint64_t seed) {
  long d_e = 1;
  for (int d : env_dims) d_e *= d;
  Rng rng(seed);
  ConditionalHamiltonianSpec spec;
  spec.basis = PointerBasis(system_dim);
  spec.env_dims = env_dims;
  for (int i = 0; i < system_dim; ++i) spec.branch_ops.push_back(random_gue(static_cast<int>(d_e), rng));
  return spec;
}

std::optional<OverlapWitness> cross_branch_overlap(const std::vector<SpectralDecomposition>& branches,
                                                   const ComplexOperator& rho_e0,
                                                   const ComplexOperator* rho_s0_pointer_frame,
                                                   double energy_tol, double overlap_tol,
                                                   double coherence_floor) {
  const int d_s = static_cast<int>(branches.size());
  for (int i = 0; i < d_s; ++i) {
    for (int j = i + 1; j < d_s; ++j) {
      if (rho_s0_pointer_frame != nullptr && std::abs((*rho_s0_pointer_frame)(i, j)) <= coherence_floor) continue;
      const auto& bi = branches[i];
      const auto& bj = branches[j];
      for (int n = 0; n < bi.num_clusters(); ++n) {
        const double en = bi.cluster_energy(n);
        for (int m = 0; m < bj.num_clusters(); ++m) {
          const double em = bj.cluster_energy(m);
          if (std::abs(en - em) > energy_tol) continue;
          double overlap = 0.0;
          for (int a : bi.clusters[n])
            for (int b : bj.clusters[m])
              overlap = std::max(overlap,
                                 std::abs((bi.eigenvectors.col(a).adjoint() * rho_e0 * bj.eigenvectors.col(b))(0, 0)));
          if (overlap > overlap_tol) return OverlapWitness{i, n, j, m, en, overlap};
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace eqobj
