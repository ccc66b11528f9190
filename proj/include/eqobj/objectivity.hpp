#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "eqobj/equilibration.hpp"

namespace eqobj {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kOffBlockTolerance = 1e-8;
inline constexpr double kInfiniteGamma = std::numeric_limits<double>::infinity();

/// Groups N_q of environment factor indices (0-based) forming macro-observers.
struct MacroPartition {
  std::vector<std::vector<int>> groups;

  void validate(int num_env) const;
  int size() const { return static_cast<int>(groups.size()); }
  /// {0..s-1}: one macro-observer made of the first s factors.
  static MacroPartition leading(int s);
};

using RealMatrix = Eigen::MatrixXd;

struct ConditionalStates {
  std::vector<double> probabilities;
  std::vector<std::optional<DensityMatrix>> states;  // absent when p_i <= p_floor
};

/// Splits a pointer-block-diagonal state into (p_i, <i|rho|i> / p_i).
ConditionalStates conditional_env_states(const DensityMatrix& rho, const PointerBasis& basis,
                                         double p_floor = kProbabilityFloor,
                                         double off_block_tolerance = kOffBlockTolerance);

/// eta = sum_m sqrt(<e_m| rho_i rho_j |e_m>) in an eigenbasis of H^(i) that
/// diagonalizes rho_i (degenerate clusters are rotated to achieve that).
double eta(const DensityMatrix& rho_i, const DensityMatrix& rho_j, const SpectralDecomposition& decomp_i);

/// Per-pair fidelity decay data for one macro-observer.
struct MacroGroupFidelity {
  RealMatrix fidelity;  // product law over the group
  RealMatrix gamma;     // -2 ln max eta over N_q^(ij); +inf when some eta == 0
  RealMatrix bound;     // exp(-gamma |N_q^(ij)|)
  Eigen::MatrixXi active_sites;  // |N_q^(ij)|
};

struct MacroFidelity {
  std::vector<bool> present;                 // p_i > p_floor
  std::vector<RealMatrix> fidelity_micro;    // [k] d_S x d_S
  std::vector<RealMatrix> eta;               // [k] d_S x d_S, eta_k^(ij)
  std::vector<MacroGroupFidelity> groups;    // [q]
};

/// `states[i][k]` and `spectra[i][k]` for every present branch i.
MacroFidelity macro_fidelity_matrix(const std::vector<double>& probabilities,
                                    const std::vector<std::vector<DensityMatrix>>& states,
                                    const std::vector<std::vector<SpectralDecomposition>>& spectra,
                                    const MacroPartition& partition, double p_floor = kProbabilityFloor);
MacroFidelity macro_fidelity_matrix(const StarConditionals& conditionals, const MacroPartition& partition,
                                    double p_floor = kProbabilityFloor);

struct FidelityLowerBound {
  double tight = 0.0;  // Tr(rho_E0^2) / (d_i d_j)
  double loose = 0.0;  // 1 / d_E^2
};

FidelityLowerBound fidelity_lower_bound(const DensityMatrix& rho_e0, int d_i, int d_j, int d_e);

/// Trace distance from rho to sum_i (|i><i| (x) 1) rho (|i><i| (x) 1).
double cq_distance(const DensityMatrix& rho, const PointerBasis& basis);

struct SbsDeviation {
  double value = 0.0;  // max of the three parts
  double cq_distance = 0.0;
  double max_fidelity = 0.0;           // max_{i != j, q} F(rho~_q^(i), rho~_q^(j))
  double independence_deviation = 0.0; // max_i D(rho_E^(i), (x)_q rho~_q^(i))
};

/// Zero iff rho has exact Spectrum Broadcast Structure for the given
/// macro-observers. The independence part is a trace distance per branch to
/// the product of group marginals.
SbsDeviation sbs_deviation(const DensityMatrix& rho, const PointerBasis& basis, const MacroPartition& partition,
                           double p_floor = kProbabilityFloor);

struct FaithfulnessResult {
  bool faithful = false;
  double captured_weight = 0.0;  // sum_i Tr[(|i><i| (x) Pi_i) rho]
  double max_overlap = 0.0;      // max_{i != j} ||Pi_i Pi_j||
};

/// Pi_i are support projectors of the conditional states; faithful iff they
/// are mutually orthogonal (they always capture the full weight).
FaithfulnessResult check_faithfulness(const DensityMatrix& rho, const PointerBasis& basis,
                                      double p_floor = kProbabilityFloor);

struct CqCommutationResult {
  bool certified = false;         // every trial commuted and the structural check passed
  bool all_trials_commute = false;
  double max_commutator = 0.0;    // Frobenius norm over trials
  double max_off_block = 0.0;     // largest |entry| outside pointer-diagonal blocks
  int failed_trial = -1;
  std::optional<ComplexOperator> witness;  // CQ state that does not commute
};

/// Draws `trials` random CQ states sum_i p_i |i><i| (x) rho^(i), each rho^(i)
/// stationary under the i-th diagonal block of H, and checks [H, rho_CQ] = 0.
CqCommutationResult verify_cq_commutation(const ComplexOperator& h, const PointerBasis& basis, int trials,
                                          std::uint64_t seed);

/// Summary of objectivity diagnostics for an equilibrium state.
struct ObjectivityReport {
  std::vector<double> probabilities;
  std::vector<RealMatrix> fidelity_micro;
  std::vector<RealMatrix> fidelity_macro;
  std::vector<RealMatrix> eta;
  std::vector<RealMatrix> gamma;
  std::vector<RealMatrix> macro_bound;
  RealMatrix lower_bound_tight;  // d_S x d_S; empty when not applicable
  double lower_bound_loose = 0.0;
  double cq_distance = 0.0;
  SbsDeviation sbs;
  bool faithful = false;
};

/// Full report for a star equilibrium with product environment.
ObjectivityReport objectivity_report(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                     std::span<const DensityMatrix> env_factors, const MacroPartition& partition);

}  // namespace eqobj
