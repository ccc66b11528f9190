#pragma once

#include <optional>
#include <span>
#include <vector>

#include "eqobj/hamiltonians.hpp"

namespace eqobj {

// Conventions: hbar = 1, U(t) = exp(-iHt).

/// sum_n Pi_n rho Pi_n over the degenerate clusters of `decomp`.
ComplexOperator pinch(const ComplexOperator& rho, const SpectralDecomposition& decomp);
DensityMatrix pinch(const DensityMatrix& rho, const SpectralDecomposition& decomp);
DensityMatrix pinch(const DensityMatrix& rho, const ComplexOperator& h,
                    double cluster_tolerance_rel = kDefaultClusterTolerance);

/// U(t) rho U(t)^dag via the spectral decomposition.
ComplexOperator evolve(const ComplexOperator& rho, const SpectralDecomposition& decomp, double t);

/// (1/T) int_0^T exp(-i delta t) dt, and exactly 1 when `same_level`.
Complex time_average_kernel(double delta, double window, bool same_level);

enum class TimeAverageMethod { Analytic, Quadrature };

/// Finite-window average (1/T) int_0^T U(t) rho0 U(t)^dag dt. The analytic
/// path multiplies eigenbasis entries by the kernel; the quadrature path is a
/// midpoint-rule average over `n_samples` uniform times.
DensityMatrix finite_time_average(const DensityMatrix& rho0, const SpectralDecomposition& decomp, double window,
                                  int n_samples, TimeAverageMethod method = TimeAverageMethod::Analytic);
DensityMatrix finite_time_average(const DensityMatrix& rho0, const ComplexOperator& h, double window, int n_samples,
                                  TimeAverageMethod method = TimeAverageMethod::Analytic);

/// Level populations p_n = Tr(Pi_n rho0).
std::vector<double> level_populations(const ComplexOperator& rho0, const SpectralDecomposition& decomp);

/// Inverse participation ratio 1 / sum_n p_n^2.
double effective_dimension(const DensityMatrix& rho0, const SpectralDecomposition& decomp);

/// Smallest spacing between distinct energy levels of `h`.
double min_gap(const ComplexOperator& h);

struct EquilibrationReport {
  double d_eff = 1.0;
  double observable_bound_lhs = 0.0;
  double observable_bound_rhs = 0.0;
  double subsystem_bound_lhs = 0.0;
  double subsystem_bound_rhs = 0.0;
  int n_time_samples = 0;
  double window = 0.0;
  double min_gap = 0.0;
  /// window >= 100 / min_gap; the inequalities are only asserted here.
  bool large_window = false;

  bool observable_bound_holds(double slack = 1e-9) const {
    return observable_bound_lhs <= observable_bound_rhs + slack;
  }
  bool subsystem_bound_holds(double slack = 1e-9) const {
    return subsystem_bound_lhs <= subsystem_bound_rhs + slack;
  }
};

/// Time-sampled <|Tr[O rho(t)] - Tr[O rho_inf]|^2> against ||O||^2 / d_eff.
/// Refuses Hamiltonians with degenerate levels or equal gaps.
EquilibrationReport check_observable_bound(const DensityMatrix& rho0, const ComplexOperator& h,
                                           const ComplexOperator& observable, double window, int n_samples);

/// Time-sampled <D[rho_keep(t), Tr_X rho_inf]> against (1/2) sqrt(d^2 / d_eff).
EquilibrationReport check_subsystem_bound(const DensityMatrix& rho0, const ComplexOperator& h,
                                          std::span<const int> keep, double window, int n_samples);

// ---------------------------------------------------------------------------
// Equilibria of structured Hamiltonians

enum class EquilibriumPath {
  Auto,        // factor-wise when possible, else branchwise
  Branchwise,  // d_S eigensolves of size d_E
  FactorWise,  // star specs with product environments only
  Dense,       // pinch of the assembled Hamiltonian on the full space
};

/// sum_i p_i |i><i| (x) rho_E^(i), plus the pieces it was built from.
struct CqEquilibrium {
  DensityMatrix state;
  std::vector<double> probabilities;
  std::vector<ComplexOperator> env_states;          // rho_E^(i), empty for Dense
  std::vector<SpectralDecomposition> branch_spectra;  // of H_E^(i), empty for Dense
  EquilibriumPath path_used = EquilibriumPath::Branchwise;
};

CqEquilibrium conditional_equilibrium(const ConditionalHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                      const DensityMatrix& rho_e0,
                                      EquilibriumPath path = EquilibriumPath::Auto);
CqEquilibrium conditional_equilibrium(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                      const DensityMatrix& rho_e0,
                                      EquilibriumPath path = EquilibriumPath::Auto);
CqEquilibrium conditional_equilibrium(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                      std::span<const DensityMatrix> env_factors,
                                      EquilibriumPath path = EquilibriumPath::Auto);

/// Per-observer conditional states rho_k^(i) = pinch(rho_k0, H_k^(i)) of a
/// non-degenerate star Hamiltonian with a product environment.
struct StarConditionals {
  std::vector<double> probabilities;
  std::vector<std::vector<DensityMatrix>> states;             // [i][k]
  std::vector<std::vector<SpectralDecomposition>> spectra;    // [i][k] of H_k^(i)
};

StarConditionals star_conditionals(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                   std::span<const DensityMatrix> env_factors);

/// sum_i p_i |i><i| (x) pinch(rho_E0, Y). Throws ResonantEigenvalues if some
/// x_i eps_m == x_j eps_n for (i, m) != (j, n).
CqEquilibrium von_neumann_equilibrium(const VonNeumannSpec& spec, const DensityMatrix& rho_s0,
                                      const DensityMatrix& rho_e0);

}  // namespace eqobj
