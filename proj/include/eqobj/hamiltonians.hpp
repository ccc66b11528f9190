#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "eqobj/states.hpp"

namespace eqobj {

inline constexpr double kDefaultGapTolerance = 1e-8;  // relative to spectral range
inline constexpr int kMaxEnsembleRedraws = 16;

/// H = sum_i |i><i| (x) H_E^(i)
struct ConditionalHamiltonianSpec {
  PointerBasis basis{2};
  std::vector<ComplexOperator> branch_ops;
  std::vector<int> env_dims;  // factorization of H_E; empty means a single factor

  void validate() const;
  int system_dim() const { return basis.dim(); }
  int env_dim() const;
  std::vector<int> env_factor_dims() const;
};

/// H = sum_i |i><i| (x) sum_k c_k H_k^(i)
struct StarHamiltonianSpec {
  PointerBasis basis{2};
  std::vector<double> couplings;
  std::vector<std::vector<ComplexOperator>> local_ops;  // [i][k]

  void validate() const;
  int system_dim() const { return basis.dim(); }
  int num_env() const { return static_cast<int>(couplings.size()); }
  std::vector<int> env_dims() const;
  HilbertFactorization factorization() const;
  /// sum_k c_k (1 (x) ... (x) H_k^(i) (x) ... (x) 1)
  ComplexOperator branch_operator(int i) const;
  ConditionalHamiltonianSpec to_conditional() const;
};

/// H = X_S (x) Y with X_S = sum_i x_i |i><i|
struct VonNeumannSpec {
  PointerBasis basis{2};
  std::vector<double> pointer_values;
  ComplexOperator env_op;

  void validate() const;
  int system_dim() const { return basis.dim(); }
  ComplexOperator system_op() const;
};

using HamiltonianSpec = std::variant<ComplexOperator, ConditionalHamiltonianSpec, StarHamiltonianSpec, VonNeumannSpec>;

ComplexOperator assemble(const ConditionalHamiltonianSpec& spec);
ComplexOperator assemble(const StarHamiltonianSpec& spec);
ComplexOperator assemble(const VonNeumannSpec& spec);
ComplexOperator assemble(const HamiltonianSpec& spec);

struct SpectrumDiagnostics {
  bool is_nondegenerate = true;
  bool has_equal_gaps = false;
  double min_gap = 0.0;  // smallest spacing between distinct levels; +inf for one level
  double gap_tolerance = 0.0;
  std::optional<std::array<int, 2>> degeneracy_witness;  // eigenvalue indices (a, b)
  std::optional<std::array<int, 4>> equal_gap_witness;   // gaps E_b - E_a == E_d - E_c
};

/// `gap_tolerance_rel` is scaled by the spectral range.
SpectrumDiagnostics diagnose_spectrum(const ComplexOperator& h, double gap_tolerance_rel = kDefaultGapTolerance);
SpectrumDiagnostics diagnose_eigenvalues(const RealVector& ascending, double gap_tolerance_abs,
                                         bool scan_gaps = true);

/// Ascending spectrum of assemble(spec) from the local spectra:
/// {sum_k c_k eps_{m_k,k}^(i)} over i and all (m_1..m_N).
RealVector star_spectrum(const StarHamiltonianSpec& spec);

/// Hermitian matrix with GUE statistics, (A + A^dag) / (2 sqrt(n)).
ComplexOperator random_gue(int dim, Rng& rng);

/// Star spec with GUE local terms and couplings uniform in [0.5, 1.5]; redrawn
/// up to kMaxEnsembleRedraws times while the assembled H is degenerate.
StarHamiltonianSpec random_branch_ensemble(const HilbertFactorization& fact, std::uint64_t seed);

ConditionalHamiltonianSpec random_conditional(int system_dim, const std::vector<int>& env_dims, std::uint64_t seed);

/// Witness of a coinciding cross-branch eigenvalue pair whose environment
/// overlap <e_n^(i)| rho_E0 |e_m^(j)> does not vanish.
struct OverlapWitness {
  int branch_i = 0;
  int cluster_n = 0;
  int branch_j = 0;
  int cluster_m = 0;
  double energy = 0.0;
  double overlap = 0.0;
};

/// Checks the rank-deficiency condition that lets a degenerate conditional
/// Hamiltonian still produce a CQ equilibrium. Only branch pairs with
/// |<i|rho_S0|j>| above `coherence_floor` are inspected; pass nullptr to
/// inspect every pair.
std::optional<OverlapWitness> cross_branch_overlap(const std::vector<SpectralDecomposition>& branches,
                                                   const ComplexOperator& rho_e0,
                                                   const ComplexOperator* rho_s0_pointer_frame,
                                                   double energy_tol, double overlap_tol = 1e-10,
                                                   double coherence_floor = 1e-12);

}  // namespace eqobj
