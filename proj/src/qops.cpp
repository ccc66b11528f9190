#include "eqobj/qops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

namespace eqobj {

namespace {

std::atomic<std::size_t> g_max_dim{kDefaultMaxDim};

void check_dim(std::size_t dim, const char* what) {
  if (dim > max_dim()) {
    std::ostringstream msg;
    msg << what << " dimension " << dim << " exceeds max_dim " << max_dim();
    throw Error(ErrorKind::DimensionOverflow, msg.str());
  }
}

}  // namespace

std::size_t max_dim() { return g_max_dim.load(std::memory_order_relaxed); }

void set_max_dim(std::size_t dim) {
  if (dim == 0) throw Error(ErrorKind::InvalidArgument, "max_dim must be positive");
  g_max_dim.store(dim, std::memory_order_relaxed);
}

double SpectralDecomposition::cluster_energy(int n) const {
  const auto& members = clusters.at(n);
  double sum = 0.0;
  for (int idx : members) sum += eigenvalues(idx);
  return sum / static_cast<double>(members.size());
}

ComplexOperator SpectralDecomposition::projector(int n) const {
  const auto& members = clusters.at(n);
  ComplexOperator proj = ComplexOperator::Zero(dim(), dim());
  for (int idx : members) proj.noalias() += eigenvectors.col(idx) * eigenvectors.col(idx).adjoint();
  return proj;
}

ComplexOperator SpectralDecomposition::reconstruct() const {
  return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
}

double SpectralDecomposition::spectral_range() const {
  if (eigenvalues.size() == 0) return 0.0;
  return eigenvalues(eigenvalues.size() - 1) - eigenvalues(0);
}

double max_hermiticity_error(const ComplexOperator& op) {
  if (op.rows() != op.cols()) return std::numeric_limits<double>::infinity();
  if (op.size() == 0) return 0.0;
  return (op - op.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const ComplexOperator& op, double tol) { return max_hermiticity_error(op) <= tol; }

void require_square(const ComplexOperator& op, const char* what) {
  if (op.rows() != op.cols() || op.rows() < 1) {
    std::ostringstream msg;
    msg << what << " must be a non-empty square operator, got " << op.rows() << "x" << op.cols();
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
}

void require_finite(const ComplexOperator& op, const char* what) {
  if (!op.allFinite()) throw Error(ErrorKind::NonFinite, std::string(what) + " has non-finite entries");
}

void require_hermitian(const ComplexOperator& op, const char* what) {
  require_square(op, what);
  require_finite(op, what);
  const double err = max_hermiticity_error(op);
  if (err > kHermitianTolerance) {
    std::ostringstream msg;
    msg << what << " deviates from Hermitian by " << err;
    throw Error(ErrorKind::NotHermitian, msg.str());
  }
}

std::vector<std::vector<int>> cluster_sorted(const RealVector& ascending, double abs_tol) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < ascending.size(); ++i) {
    if (i == 0 || ascending(i) - ascending(i - 1) > abs_tol) clusters.emplace_back();
    clusters.back().push_back(i);
  }
  return clusters;
}

SpectralDecomposition recluster(SpectralDecomposition decomp, double cluster_tolerance_abs) {
  decomp.cluster_tolerance = cluster_tolerance_abs;
  decomp.clusters = cluster_sorted(decomp.eigenvalues, cluster_tolerance_abs);
  decomp.cluster_of.assign(decomp.eigenvalues.size(), 0);
  for (int n = 0; n < decomp.num_clusters(); ++n)
    for (int idx : decomp.clusters[n]) decomp.cluster_of[idx] = n;
  return decomp;
}

SpectralDecomposition hermitian_eig_absolute(const ComplexOperator& op, double cluster_tolerance_abs) {
  require_hermitian(op, "hermitian_eig input");
  if (!(cluster_tolerance_abs >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "cluster tolerance must be non-negative");
  const ComplexOperator sym = 0.5 * (op + op.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::NumericalFailure, "self-adjoint eigensolver did not converge");
  SpectralDecomposition decomp;
  decomp.eigenvalues = solver.eigenvalues();
  decomp.eigenvectors = solver.eigenvectors();
  return recluster(std::move(decomp), cluster_tolerance_abs);
}

SpectralDecomposition hermitian_eig(const ComplexOperator& op, double cluster_tolerance_rel) {
  if (!(cluster_tolerance_rel > 0.0))
    throw Error(ErrorKind::InvalidArgument, "cluster tolerance must be positive");
  auto decomp = hermitian_eig_absolute(op, 0.0);
  // The floor keeps exactly degenerate spectra (zero range) in one cluster
  // despite last-bit eigensolver noise.
  const double magnitude = decomp.dim() > 0 ? decomp.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  const double tol = cluster_tolerance_rel * decomp.spectral_range() +
                     64.0 * std::numeric_limits<double>::epsilon() * magnitude;
  return recluster(std::move(decomp), tol);
}

ComplexOperator identity(int dim) { return ComplexOperator::Identity(dim, dim); }

ComplexOperator tensor(const ComplexOperator& a, const ComplexOperator& b) {
  const std::size_t rows = static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(b.rows());
  const std::size_t cols = static_cast<std::size_t>(a.cols()) * static_cast<std::size_t>(b.cols());
  check_dim(std::max(rows, cols), "tensor product");
  return Eigen::kroneckerProduct(a, b).eval();
}

ComplexOperator tensor_all(std::span<const ComplexOperator> ops) {
  if (ops.empty()) throw Error(ErrorKind::InvalidArgument, "tensor_all needs at least one factor");
  ComplexOperator out = ops.front();
  for (std::size_t k = 1; k < ops.size(); ++k) out = tensor(out, ops[k]);
  return out;
}

ComplexOperator embed(const ComplexOperator& local, std::span<const int> dims, int site) {
  if (site < 0 || site >= static_cast<int>(dims.size()))
    throw Error(ErrorKind::InvalidArgument, "embed site out of range");
  if (local.rows() != dims[site] || local.cols() != dims[site])
    throw Error(ErrorKind::DimensionMismatch, "embedded operator does not match factor dimension");
  long before = 1, after = 1;
  for (int k = 0; k < site; ++k) before *= dims[k];
  for (std::size_t k = site + 1; k < dims.size(); ++k) after *= dims[k];
  return tensor(tensor(identity(static_cast<int>(before)), local), identity(static_cast<int>(after)));
}

ComplexOperator partial_trace(const ComplexOperator& op, std::span<const int> dims,
                              std::span<const int> keep) {
  require_square(op, "partial_trace input");
  if (keep.empty()) throw Error(ErrorKind::EmptyKeepSet, "partial_trace needs at least one kept factor");
  long total = 1;
  for (int d : dims) {
    if (d < 1) throw Error(ErrorKind::DimensionMismatch, "factor dimensions must be positive");
    total *= d;
  }
  if (total != op.rows()) {
    std::ostringstream msg;
    msg << "factor dims multiply to " << total << " but operator has dim " << op.rows();
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  const int n = static_cast<int>(dims.size());
  std::vector<bool> kept(n, false);
  for (int k : keep) {
    if (k < 0 || k >= n) throw Error(ErrorKind::DimensionMismatch, "keep index out of range");
    kept[k] = true;
  }

  // Row-major strides: the last factor varies fastest.
  std::vector<long> stride(n, 1);
  for (int k = n - 2; k >= 0; --k) stride[k] = stride[k + 1] * dims[k + 1];

  long dk = 1, dt = 1;
  for (int k = 0; k < n; ++k) (kept[k] ? dk : dt) *= dims[k];

  // full_index[kk * dt + tt] = flat index with kept digits kk and traced digits tt
  std::vector<long> full_index(static_cast<std::size_t>(dk * dt));
  for (long flat = 0; flat < total; ++flat) {
    long kk = 0, tt = 0;
    for (int k = 0; k < n; ++k) {
      const long digit = (flat / stride[k]) % dims[k];
      if (kept[k]) kk = kk * dims[k] + digit;
      else tt = tt * dims[k] + digit;
    }
    full_index[kk * dt + tt] = flat;
  }

  ComplexOperator out = ComplexOperator::Zero(dk, dk);
  for (long r = 0; r < dk; ++r) {
    for (long c = 0; c < dk; ++c) {
      Complex acc{0.0, 0.0};
      for (long t = 0; t < dt; ++t) acc += op(full_index[r * dt + t], full_index[c * dt + t]);
      out(r, c) = acc;
    }
  }
  return out;
}

ComplexOperator permute_factors(const ComplexOperator& op, std::span<const int> dims,
                                std::span<const int> order) {
  require_square(op, "permute_factors input");
  const int n = static_cast<int>(dims.size());
  if (static_cast<int>(order.size()) != n) throw Error(ErrorKind::DimensionMismatch, "order must list every factor");
  std::vector<bool> seen(n, false);
  for (int k : order) {
    if (k < 0 || k >= n || seen[k]) throw Error(ErrorKind::InvalidArgument, "order is not a permutation");
    seen[k] = true;
  }
  long total = 1;
  for (int d : dims) total *= d;
  if (total != op.rows()) throw Error(ErrorKind::DimensionMismatch, "factor dims do not match operator");

  std::vector<long> in_stride(n, 1);
  for (int k = n - 2; k >= 0; --k) in_stride[k] = in_stride[k + 1] * dims[k + 1];
  std::vector<long> out_dims(n), out_stride(n, 1);
  for (int j = 0; j < n; ++j) out_dims[j] = dims[order[j]];
  for (int j = n - 2; j >= 0; --j) out_stride[j] = out_stride[j + 1] * out_dims[j + 1];

  // map[out_flat] = in_flat
  std::vector<long> map(static_cast<std::size_t>(total));
  for (long flat = 0; flat < total; ++flat) {
    long src = 0;
    for (int j = 0; j < n; ++j) src += ((flat / out_stride[j]) % out_dims[j]) * in_stride[order[j]];
    map[flat] = src;
  }
  ComplexOperator out(total, total);
  for (long c = 0; c < total; ++c)
    for (long r = 0; r < total; ++r) out(r, c) = op(map[r], map[c]);
  return out;
}

ComplexOperator psd_sqrt(const ComplexOperator& op) {
  auto decomp = hermitian_eig_absolute(op, 0.0);
  RealVector roots(decomp.dim());
  for (int i = 0; i < decomp.dim(); ++i) {
    const double lambda = decomp.eigenvalues(i);
    if (lambda < -kPsdTolerance) {
      std::ostringstream msg;
      msg << "eigenvalue " << lambda << " below -" << kPsdTolerance;
      throw Error(ErrorKind::NotPSD, msg.str());
    }
    roots(i) = lambda <= kEntropyZero ? 0.0 : std::sqrt(lambda);
  }
  return decomp.eigenvectors * roots.cast<Complex>().asDiagonal() * decomp.eigenvectors.adjoint();
}

double fidelity(const ComplexOperator& rho, const ComplexOperator& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw Error(ErrorKind::DimensionMismatch, "fidelity arguments differ in dimension");
  // F = ||sqrt(rho) sqrt(sigma)||_1^2; singular values avoid a second square root.
  const ComplexOperator product = psd_sqrt(rho) * psd_sqrt(sigma);
  Eigen::BDCSVD<ComplexOperator> svd(product);
  const double root = svd.singularValues().sum();
  return std::clamp(root * root, 0.0, 1.0);
}

double trace_norm(const ComplexOperator& op) {
  require_square(op, "trace_norm input");
  const ComplexOperator sym = 0.5 * (op + op.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::NumericalFailure, "eigensolver failed in trace_norm");
  return solver.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const ComplexOperator& rho, const ComplexOperator& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw Error(ErrorKind::DimensionMismatch, "trace_distance arguments differ in dimension");
  return std::clamp(0.5 * trace_norm(rho - sigma), 0.0, 1.0);
}

double operator_norm(const ComplexOperator& op) {
  if (op.size() == 0) return 0.0;
  Eigen::BDCSVD<ComplexOperator> svd(op);
  return svd.singularValues()(0);
}

double von_neumann_entropy(const ComplexOperator& rho) {
  require_square(rho, "entropy input");
  const ComplexOperator sym = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "eigensolver failed in entropy");
  double s = 0.0;
  for (double lambda : solver.eigenvalues()) {
    if (lambda > kEntropyZero) s -= lambda * std::log(lambda);
  }
  return s;
}

double mutual_information(const ComplexOperator& rho, int dim_a, int dim_b) {
  require_square(rho, "mutual_information input");
  if (dim_a < 1 || dim_b < 1 || static_cast<long>(dim_a) * dim_b != rho.rows())
    throw Error(ErrorKind::DimensionMismatch, "mutual_information dims do not match operator");
  const int dims[2] = {dim_a, dim_b};
  const int keep_a[1] = {0};
  const int keep_b[1] = {1};
  const double s_a = von_neumann_entropy(partial_trace(rho, dims, keep_a));
  const double s_b = von_neumann_entropy(partial_trace(rho, dims, keep_b));
  return std::max(0.0, s_a + s_b - von_neumann_entropy(rho));
}

double purity(const ComplexOperator& rho) { return (rho * rho).trace().real(); }

ComplexOperator pinch_as_mixed_unitary(const ComplexOperator& rho, const SpectralDecomposition& decomp) {
  require_square(rho, "pinch_as_mixed_unitary input");
  if (rho.rows() != decomp.dim())
    throw Error(ErrorKind::DimensionMismatch, "decomposition dimension differs from state");
  const int clusters = decomp.num_clusters();
  std::vector<ComplexOperator> projectors;
  projectors.reserve(clusters);
  for (int n = 0; n < clusters; ++n) projectors.push_back(decomp.projector(n));

  std::vector<ComplexOperator> terms;
  terms.reserve(clusters);
  for (int y = 1; y <= clusters; ++y) {
    ComplexOperator unitary = ComplexOperator::Zero(rho.rows(), rho.cols());
    for (int n = 1; n <= clusters; ++n) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(n) * y / clusters;
      unitary += std::polar(1.0, phase) * projectors[n - 1];
    }
    terms.push_back(unitary * rho * unitary.adjoint());
  }
  return pairwise_sum(terms) / static_cast<double>(clusters);
}

namespace {

template <typename T>
T pairwise_range(std::span<const T> terms) {
  if (terms.size() == 1) return terms[0];
  const std::size_t half = terms.size() / 2;
  T left = pairwise_range(terms.subspan(0, half));
  left += pairwise_range(terms.subspan(half));
  return left;
}

}  // namespace

ComplexOperator pairwise_sum(std::span<const ComplexOperator> terms) {
  if (terms.empty()) throw Error(ErrorKind::InvalidArgument, "pairwise_sum of empty sequence");
  return pairwise_range(terms);
}

double pairwise_sum(std::span<const double> terms) {
  if (terms.empty()) return 0.0;
  return pairwise_range(terms);
}

}  // namespace eqobj
