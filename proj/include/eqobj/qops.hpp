#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "eqobj/errors.hpp"

namespace eqobj {

using Complex = std::complex<double>;
using ComplexOperator = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kDefaultClusterTolerance = 1e-9;  // relative to spectral range
inline constexpr double kEntropyZero = 1e-14;
inline constexpr std::size_t kDefaultMaxDim = 4096;

/// Process-wide ceiling on operator dimension. Dense eigensolves are O(d^3),
/// so constructions beyond this raise DimensionOverflow instead of running.
std::size_t max_dim();
void set_max_dim(std::size_t dim);

/// Eigendecomposition with eigenvalues ascending and eigenvector indices
/// grouped into degenerate clusters (single linkage on sorted eigenvalues).
struct SpectralDecomposition {
  RealVector eigenvalues;
  ComplexOperator eigenvectors;           // columns
  std::vector<std::vector<int>> clusters; // ascending energy order
  std::vector<int> cluster_of;            // eigenvector index -> cluster index
  double cluster_tolerance = 0.0;         // absolute

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  int num_clusters() const { return static_cast<int>(clusters.size()); }
  double cluster_energy(int n) const;
  ComplexOperator projector(int n) const;
  ComplexOperator reconstruct() const;
  double spectral_range() const;
};

double max_hermiticity_error(const ComplexOperator& op);
bool is_hermitian(const ComplexOperator& op, double tol = kHermitianTolerance);
void require_hermitian(const ComplexOperator& op, const char* what);
void require_finite(const ComplexOperator& op, const char* what);
void require_square(const ComplexOperator& op, const char* what);

/// `cluster_tolerance_rel` is scaled by (E_max - E_min).
SpectralDecomposition hermitian_eig(const ComplexOperator& op,
                                    double cluster_tolerance_rel = kDefaultClusterTolerance);
SpectralDecomposition hermitian_eig_absolute(const ComplexOperator& op, double cluster_tolerance_abs);

/// Regroups an existing decomposition with a new absolute tolerance.
SpectralDecomposition recluster(SpectralDecomposition decomp, double cluster_tolerance_abs);

std::vector<std::vector<int>> cluster_sorted(const RealVector& ascending, double abs_tol);

ComplexOperator identity(int dim);
ComplexOperator tensor(const ComplexOperator& a, const ComplexOperator& b);
ComplexOperator tensor_all(std::span<const ComplexOperator> ops);

/// Embeds `local` acting on factor `site` of a space with factor dims `dims`.
ComplexOperator embed(const ComplexOperator& local, std::span<const int> dims, int site);

/// Traces out every factor not listed in `keep`. Kept factors stay in
/// ascending index order regardless of the order given.
ComplexOperator partial_trace(const ComplexOperator& op, std::span<const int> dims,
                              std::span<const int> keep);

/// Reorders tensor factors: factor j of the result is factor order[j] of `op`.
ComplexOperator permute_factors(const ComplexOperator& op, std::span<const int> dims, std::span<const int> order);

/// Square root of a PSD operator. Eigenvalues below -kPsdTolerance raise NotPSD.
ComplexOperator psd_sqrt(const ComplexOperator& op);

double fidelity(const ComplexOperator& rho, const ComplexOperator& sigma);
double trace_distance(const ComplexOperator& rho, const ComplexOperator& sigma);
double trace_norm(const ComplexOperator& op);
double operator_norm(const ComplexOperator& op);
double von_neumann_entropy(const ComplexOperator& rho);
double mutual_information(const ComplexOperator& rho, int dim_a, int dim_b);
double purity(const ComplexOperator& rho);

/// Projector-sum pinching written as an average over d' phase unitaries
/// U_y = sum_n exp(-2 pi i n y / d') Pi_n. Quadratic in the cluster count;
/// meant as an independent cross-check of the projector form.
ComplexOperator pinch_as_mixed_unitary(const ComplexOperator& rho, const SpectralDecomposition& decomp);

/// Deterministic pairwise (tree) summation of a sequence of operators.
ComplexOperator pairwise_sum(std::span<const ComplexOperator> terms);
double pairwise_sum(std::span<const double> terms);

}  // namespace eqobj
