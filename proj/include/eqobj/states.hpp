#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "eqobj/qops.hpp"

namespace eqobj {

/// 64-bit Mersenne twister; every random draw in the library goes through one
/// of these, seeded explicitly.
using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a stream label.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// H_S (x) H_1 (x) ... (x) H_N with d_S >= 2 and every d_k >= 2.
struct HilbertFactorization {
  int system_dim = 2;
  std::vector<int> env_dims;

  HilbertFactorization() = default;
  HilbertFactorization(int system, std::vector<int> env);

  int num_env() const { return static_cast<int>(env_dims.size()); }
  long env_dim() const;
  long total_dim() const;
  /// [d_S, d_1, ..., d_N]
  std::vector<int> all_dims() const;
  void validate() const;
};

class DensityMatrix {
 public:
  /// Validates Hermiticity, unit trace and positivity (full eigendecomposition).
  explicit DensityMatrix(ComplexOperator op);
  DensityMatrix(ComplexOperator op, std::vector<int> factor_dims);

  /// For images of valid states under CPTP maps computed inside the library:
  /// Hermiticity and trace are still checked, the O(d^3) positivity check is
  /// skipped.
  static DensityMatrix from_channel_output(ComplexOperator op, std::vector<int> factor_dims);

  const ComplexOperator& op() const { return op_; }
  int dim() const { return static_cast<int>(op_.rows()); }
  const std::vector<int>& factor_dims() const { return dims_; }
  int num_factors() const { return static_cast<int>(dims_.size()); }
  DensityMatrix with_factor_dims(std::vector<int> dims) const;

  double purity() const;
  double min_eigenvalue() const;

 private:
  struct Unchecked {};
  DensityMatrix(ComplexOperator op, std::vector<int> dims, Unchecked);
  void check_dims();
  void check_cheap() const;
  void check_positive() const;

  ComplexOperator op_;
  std::vector<int> dims_;
};

class PointerBasis {
 public:
  explicit PointerBasis(int dim);  // computational basis
  explicit PointerBasis(ComplexOperator unitary);

  int dim() const { return static_cast<int>(basis_.cols()); }
  const ComplexOperator& unitary() const { return basis_; }
  ComplexVector vector(int i) const { return basis_.col(i); }
  ComplexOperator projector(int i) const;
  bool is_computational() const { return computational_; }

 private:
  ComplexOperator basis_;
  bool computational_ = false;
};

DensityMatrix pure_state(const ComplexVector& psi);
DensityMatrix basis_state(int dim, int index);
DensityMatrix maximally_mixed(int dim);

std::vector<double> pointer_probabilities(const DensityMatrix& rho_s, const PointerBasis& basis);

/// G G^dag / Tr(G G^dag) with G a dim x rank complex Gaussian matrix.
DensityMatrix random_density(int dim, int rank, std::uint64_t seed);
DensityMatrix random_density(int dim, int rank, Rng& rng);
ComplexVector random_unit_vector(int dim, Rng& rng);

DensityMatrix product_state(std::span<const DensityMatrix> parts);

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep);

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);
double mutual_information(const DensityMatrix& rho, int dim_a, int dim_b);

}  // namespace eqobj
