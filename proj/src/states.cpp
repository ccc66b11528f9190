#include "eqobj/states.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace eqobj {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over a combination of both inputs
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

HilbertFactorization::HilbertFactorization(int system, std::vector<int> env)
    : system_dim(system), env_dims(std::move(env)) {
  validate();
}

long HilbertFactorization::env_dim() const {
  long d = 1;
  for (int dk : env_dims) d *= dk;
  return d;
}

long HilbertFactorization::total_dim() const { return system_dim * env_dim(); }

std::vector<int> HilbertFactorization::all_dims() const {
  std::vector<int> dims{system_dim};
  dims.insert(dims.end(), env_dims.begin(), env_dims.end());
  return dims;
}

void HilbertFactorization::validate() const {
  if (system_dim < 2) throw Error(ErrorKind::InvalidDims, "system dimension must be >= 2");
  if (env_dims.empty()) throw Error(ErrorKind::InvalidDims, "at least one environment factor is required");
  double total = system_dim;
  for (int dk : env_dims) {
    if (dk < 2) throw Error(ErrorKind::InvalidDims, "environment factor dimensions must be >= 2");
    total *= dk;
  }
  if (total > static_cast<double>(max_dim())) {
    std::ostringstream msg;
    msg << "total dimension " << total << " exceeds max_dim " << max_dim();
    throw Error(ErrorKind::DimensionOverflow, msg.str());
  }
}

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix(ComplexOperator op) : DensityMatrix(std::move(op), {}) {}

DensityMatrix::DensityMatrix(ComplexOperator op, std::vector<int> factor_dims)
    : op_(std::move(op)), dims_(std::move(factor_dims)) {
  check_dims();
  check_cheap();
  check_positive();
}

DensityMatrix::DensityMatrix(ComplexOperator op, std::vector<int> dims, Unchecked)
    : op_(std::move(op)), dims_(std::move(dims)) {
  check_dims();
  check_cheap();
}

DensityMatrix DensityMatrix::from_channel_output(ComplexOperator op, std::vector<int> factor_dims) {
  return DensityMatrix(std::move(op), std::move(factor_dims), Unchecked{});
}

DensityMatrix DensityMatrix::with_factor_dims(std::vector<int> dims) const {
  return DensityMatrix(op_, std::move(dims), Unchecked{});
}

void DensityMatrix::check_dims() {
  require_square(op_, "density matrix");
  if (dims_.empty()) {
    dims_ = {dim()};
    return;
  }
  long product = 1;
  for (int d : dims_) {
    if (d < 1) throw Error(ErrorKind::InvalidDims, "factor dimensions must be positive");
    product *= d;
  }
  if (product != dim()) {
    std::ostringstream msg;
    msg << "factor dims multiply to " << product << " but state has dim " << dim();
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
}

void DensityMatrix::check_cheap() const {
  require_hermitian(op_, "density matrix");
  const double trace = op_.trace().real();
  if (std::abs(trace - 1.0) > 1e-10) {
    std::ostringstream msg;
    msg << "trace " << trace << " differs from 1";
    throw Error(ErrorKind::NotNormalized, msg.str());
  }
}

void DensityMatrix::check_positive() const {
  const double lambda = min_eigenvalue();
  if (lambda < -kPsdTolerance) {
    std::ostringstream msg;
    msg << "minimum eigenvalue " << lambda << " below -" << kPsdTolerance;
    throw Error(ErrorKind::NotPSD, msg.str());
  }
}

double DensityMatrix::purity() const { return eqobj::purity(op_); }

double DensityMatrix::min_eigenvalue() const {
  const ComplexOperator sym = 0.5 * (op_ + op_.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "eigensolver failed");
  return solver.eigenvalues()(0);
}

// ---------------------------------------------------------------------------

PointerBasis::PointerBasis(int dim) : basis_(identity(dim)), computational_(true) {
  if (dim < 1) throw Error(ErrorKind::InvalidDims, "pointer basis dimension must be positive");
}

PointerBasis::PointerBasis(ComplexOperator unitary) : basis_(std::move(unitary)) {
  require_square(basis_, "pointer basis");
  require_finite(basis_, "pointer basis");
  const double err = (basis_.adjoint() * basis_ - identity(dim())).cwiseAbs().maxCoeff();
  if (err > 1e-10) {
    std::ostringstream msg;
    msg << "pointer basis is not unitary (deviation " << err << ")";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
  computational_ = (basis_ - identity(dim())).cwiseAbs().maxCoeff() == 0.0;
}

ComplexOperator PointerBasis::projector(int i) const { return basis_.col(i) * basis_.col(i).adjoint(); }

// ---------------------------------------------------------------------------

DensityMatrix pure_state(const ComplexVector& psi) {
  const double norm = psi.norm();
  if (!(norm > 0.0)) throw Error(ErrorKind::InvalidArgument, "pure_state needs a nonzero vector");
  const ComplexVector unit = psi / norm;
  return DensityMatrix::from_channel_output(unit * unit.adjoint(), {});
}

DensityMatrix basis_state(int dim, int index) {
  if (index < 0 || index >= dim) throw Error(ErrorKind::InvalidArgument, "basis index out of range");
  ComplexVector psi = ComplexVector::Zero(dim);
  psi(index) = 1.0;
  return pure_state(psi);
}

DensityMatrix maximally_mixed(int dim) {
  if (dim < 1) throw Error(ErrorKind::InvalidDims, "dimension must be positive");
  return DensityMatrix::from_channel_output(identity(dim) / static_cast<double>(dim), {});
}

std::vector<double> pointer_probabilities(const DensityMatrix& rho_s, const PointerBasis& basis) {
  if (rho_s.dim() != basis.dim())
    throw Error(ErrorKind::DimensionMismatch, "system state and pointer basis differ in dimension");
  std::vector<double> p(basis.dim());
  for (int i = 0; i < basis.dim(); ++i) {
    const ComplexVector v = basis.vector(i);
    const double value = (v.adjoint() * rho_s.op() * v)(0, 0).real();
    p[i] = value < 0.0 ? 0.0 : value;
  }
  return p;
}

ComplexVector random_unit_vector(int dim, Rng& rng) {
  std::normal_distribution<double> normal;
  ComplexVector v(dim);
  for (int i = 0; i < dim; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v(i) = Complex(re, im);
  }
  return v / v.norm();
}

DensityMatrix random_density(int dim, int rank, Rng& rng) {
  if (dim < 1) throw Error(ErrorKind::InvalidDims, "dimension must be positive");
  if (rank < 1 || rank > dim) {
    std::ostringstream msg;
    msg << "rank " << rank << " outside [1, " << dim << "]";
    throw Error(ErrorKind::InvalidRank, msg.str());
  }
  std::normal_distribution<double> normal;
  ComplexOperator g(dim, rank);
  for (int c = 0; c < rank; ++c) {
    for (int r = 0; r < dim; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(r, c) = Complex(re, im);
    }
  }
  ComplexOperator w = g * g.adjoint();
  w = 0.5 * (w + w.adjoint());
  w /= w.trace().real();
  return DensityMatrix(std::move(w));
}

DensityMatrix random_density(int dim, int rank, std::uint64_t seed) {
  Rng rng(seed);
  return random_density(dim, rank, rng);
}

DensityMatrix product_state(std::span<const DensityMatrix> parts) {
  if (parts.empty()) throw Error(ErrorKind::InvalidArgument, "product_state needs at least one factor");
  ComplexOperator op = parts.front().op();
  std::vector<int> dims = parts.front().factor_dims();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    op = tensor(op, parts[k].op());
    dims.insert(dims.end(), parts[k].factor_dims().begin(), parts[k].factor_dims().end());
  }
  return DensityMatrix::from_channel_output(std::move(op), std::move(dims));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  ComplexOperator reduced = partial_trace(rho.op(), rho.factor_dims(), keep);
  std::vector<int> kept_sorted(keep.begin(), keep.end());
  std::sort(kept_sorted.begin(), kept_sorted.end());
  kept_sorted.erase(std::unique(kept_sorted.begin(), kept_sorted.end()), kept_sorted.end());
  std::vector<int> dims;
  for (int k : kept_sorted) dims.push_back(rho.factor_dims()[k]);
  return DensityMatrix::from_channel_output(std::move(reduced), std::move(dims));
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) { return fidelity(rho.op(), sigma.op()); }

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  return trace_distance(rho.op(), sigma.op());
}

double mutual_information(const DensityMatrix& rho, int dim_a, int dim_b) {
  return mutual_information(rho.op(), dim_a, dim_b);
}

}  // namespace eqobj
