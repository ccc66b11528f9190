#include "eqobj/objectivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

namespace eqobj {

namespace {

std::vector<int> env_dims_of(const DensityMatrix& rho, int d_s) {
  const auto& dims = rho.factor_dims();
  if (dims.size() >= 2 && dims.front() == d_s) return {dims.begin() + 1, dims.end()};
  if (rho.dim() % d_s != 0) throw Error(ErrorKind::DimensionMismatch, "state dimension not divisible by d_S");
  return {rho.dim() / d_s};
}

/// rho in the pointer frame, (B (x) 1)^dag rho (B (x) 1).
ComplexOperator to_pointer_frame(const ComplexOperator& rho, const PointerBasis& basis) {
  if (basis.is_computational()) return rho;
  const long d_e = rho.rows() / basis.dim();
  const ComplexOperator w = tensor(basis.unitary(), identity(static_cast<int>(d_e)));
  return w.adjoint() * rho * w;
}

ComplexOperator from_pointer_frame(const ComplexOperator& rho, const PointerBasis& basis) {
  if (basis.is_computational()) return rho;
  const long d_e = rho.rows() / basis.dim();
  const ComplexOperator w = tensor(basis.unitary(), identity(static_cast<int>(d_e)));
  return w * rho * w.adjoint();
}

double max_off_block(const ComplexOperator& framed, int d_s) {
  const long d_e = framed.rows() / d_s;
  double worst = 0.0;
  for (int i = 0; i < d_s; ++i)
    for (int j = 0; j < d_s; ++j)
      if (i != j) worst = std::max(worst, framed.block(i * d_e, j * d_e, d_e, d_e).cwiseAbs().maxCoeff());
  return worst;
}

void require_pointer_dims(const DensityMatrix& rho, const PointerBasis& basis) {
  if (rho.dim() % basis.dim() != 0 || rho.dim() == basis.dim())
    throw Error(ErrorKind::DimensionMismatch, "state must live on H_S (x) H_E with H_S matching the pointer basis");
}

}  // namespace

void MacroPartition::validate(int num_env) const {
  if (groups.empty()) throw Error(ErrorKind::InvalidArgument, "partition needs at least one group");
  std::vector<bool> used(num_env, false);
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorKind::InvalidArgument, "partition groups must be non-empty");
    for (int k : g) {
      if (k < 0 || k >= num_env) throw Error(ErrorKind::InvalidArgument, "partition index out of range");
      if (used[k]) throw Error(ErrorKind::InvalidArgument, "partition groups must be disjoint");
      used[k] = true;
    }
  }
}

MacroPartition MacroPartition::leading(int s) {
  MacroPartition p;
  p.groups.emplace_back(s);
  std::iota(p.groups.front().begin(), p.groups.front().end(), 0);
  return p;
}

// ---------------------------------------------------------------------------

ConditionalStates conditional_env_states(const DensityMatrix& rho, const PointerBasis& basis, double p_floor,
                                         double off_block_tolerance) {
  require_pointer_dims(rho, basis);
  const int d_s = basis.dim();
  const auto env_dims = env_dims_of(rho, d_s);
  const ComplexOperator framed = to_pointer_frame(rho.op(), basis);
  const double off = max_off_block(framed, d_s);
  if (off > off_block_tolerance) {
    std::ostringstream msg;
    msg << "off-diagonal pointer block entry " << off << " exceeds " << off_block_tolerance;
    throw Error(ErrorKind::NotBlockDiagonal, msg.str());
  }
  const long d_e = rho.dim() / d_s;
  ConditionalStates out;
  for (int i = 0; i < d_s; ++i) {
    ComplexOperator block = framed.block(i * d_e, i * d_e, d_e, d_e);
    const double p = std::max(0.0, block.trace().real());
    out.probabilities.push_back(p);
    if (p > p_floor) {
      block /= p;
      block = 0.5 * (block + block.adjoint());
      out.states.emplace_back(DensityMatrix::from_channel_output(std::move(block), env_dims));
    } else {
      out.states.emplace_back(std::nullopt);
    }
  }
  return out;
}

double eta(const DensityMatrix& rho_i, const DensityMatrix& rho_j, const SpectralDecomposition& decomp_i) {
  if (rho_i.dim() != rho_j.dim() || rho_i.dim() != decomp_i.dim())
    throw Error(ErrorKind::DimensionMismatch, "eta arguments differ in dimension");
  ComplexOperator basis = decomp_i.eigenvectors;
  // Inside a degenerate cluster any basis is an eigenbasis; pick the one that
  // diagonalizes rho_i.
  for (const auto& cluster : decomp_i.clusters) {
    if (cluster.size() < 2) continue;
    const int size = static_cast<int>(cluster.size());
    ComplexOperator sub(rho_i.dim(), size);
    for (int a = 0; a < size; ++a) sub.col(a) = decomp_i.eigenvectors.col(cluster[a]);
    ComplexOperator block = sub.adjoint() * rho_i.op() * sub;
    block = 0.5 * (block + block.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(block);
    const ComplexOperator rotated = sub * solver.eigenvectors();
    for (int a = 0; a < size; ++a) basis.col(cluster[a]) = rotated.col(a);
  }
  const ComplexOperator in_basis = basis.adjoint() * rho_i.op() * basis;
  const double off = (in_basis - ComplexOperator(in_basis.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
  if (off > 1e-9) {
    std::ostringstream msg;
    msg << "eta needs rho_i diagonal in the eigenbasis of H^(i) (off-diagonal " << off << ")";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
  const ComplexOperator product = rho_i.op() * rho_j.op();
  double sum = 0.0;
  for (int m = 0; m < basis.cols(); ++m) {
    const double value = (basis.col(m).adjoint() * product * basis.col(m))(0, 0).real();
    sum += std::sqrt(std::max(0.0, value));
  }
  return sum;
}

MacroFidelity macro_fidelity_matrix(const std::vector<double>& probabilities,
                                    const std::vector<std::vector<DensityMatrix>>& states,
                                    const std::vector<std::vector<SpectralDecomposition>>& spectra,
                                    const MacroPartition& partition, double p_floor) {
  const int d_s = static_cast<int>(probabilities.size());
  MacroFidelity out;
  out.present.resize(d_s);
  int num_env = -1;
  for (int i = 0; i < d_s; ++i) {
    out.present[i] = probabilities[i] > p_floor;
    if (!out.present[i]) continue;
    if (i >= static_cast<int>(states.size()) || i >= static_cast<int>(spectra.size()) ||
        states[i].size() != spectra[i].size() || states[i].empty()) {
      std::ostringstream msg;
      msg << "missing conditional states for branch " << i;
      throw Error(ErrorKind::IncompleteGrid, msg.str());
    }
    if (num_env < 0) num_env = static_cast<int>(states[i].size());
    if (static_cast<int>(states[i].size()) != num_env)
      throw Error(ErrorKind::IncompleteGrid, "branches list different numbers of observers");
  }
  if (num_env < 0) throw Error(ErrorKind::IncompleteGrid, "no branch above the probability floor");
  partition.validate(num_env);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < num_env; ++k) {
    RealMatrix f = RealMatrix::Constant(d_s, d_s, nan);
    RealMatrix e = RealMatrix::Constant(d_s, d_s, nan);
    for (int i = 0; i < d_s; ++i) {
      if (!out.present[i]) continue;
      for (int j = 0; j < d_s; ++j) {
        if (!out.present[j]) continue;
        f(i, j) = j < i ? f(j, i) : fidelity(states[i][k], states[j][k]);
        e(i, j) = eta(states[i][k], states[j][k], spectra[i][k]);
      }
    }
    out.fidelity_micro.push_back(std::move(f));
    out.eta.push_back(std::move(e));
  }

  for (const auto& group : partition.groups) {
    MacroGroupFidelity g;
    g.fidelity = RealMatrix::Constant(d_s, d_s, nan);
    g.gamma = RealMatrix::Constant(d_s, d_s, nan);
    g.bound = RealMatrix::Constant(d_s, d_s, nan);
    g.active_sites = Eigen::MatrixXi::Zero(d_s, d_s);
    for (int i = 0; i < d_s; ++i) {
      if (!out.present[i]) continue;
      for (int j = 0; j < d_s; ++j) {
        if (!out.present[j]) continue;
        double product = 1.0;
        double eta_max = 0.0;
        int active = 0;
        bool vanishing = false;
        for (int k : group) {
          product *= out.fidelity_micro[k](i, j);
          const double value = out.eta[k](i, j);
          if (value == 0.0) vanishing = true;
          if (value < 1.0 - 1e-12) {
            ++active;
            eta_max = std::max(eta_max, value);
          }
        }
        g.fidelity(i, j) = product;
        g.active_sites(i, j) = active;
        if (vanishing) {
          g.gamma(i, j) = kInfiniteGamma;
          g.bound(i, j) = 0.0;
        } else if (active == 0) {
          g.gamma(i, j) = 0.0;
          g.bound(i, j) = 1.0;
        } else {
          g.gamma(i, j) = -2.0 * std::log(eta_max);
          g.bound(i, j) = std::exp(-g.gamma(i, j) * active);
        }
      }
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

MacroFidelity macro_fidelity_matrix(const StarConditionals& conditionals, const MacroPartition& partition,
                                    double p_floor) {
  return macro_fidelity_matrix(conditionals.probabilities, conditionals.states, conditionals.spectra, partition,
                               p_floor);
}

FidelityLowerBound fidelity_lower_bound(const DensityMatrix& rho_e0, int d_i, int d_j, int d_e) {
  if (d_e < 1 || d_i < 1 || d_j < 1 || d_i > d_e || d_j > d_e) {
    std::ostringstream msg;
    msg << "need 1 <= d_i, d_j <= d_E, got d_i=" << d_i << " d_j=" << d_j << " d_E=" << d_e;
    throw Error(ErrorKind::InvalidDims, msg.str());
  }
  if (rho_e0.dim() != d_e) throw Error(ErrorKind::InvalidDims, "environment state dimension differs from d_E");
  const double de = d_e;
  return {rho_e0.purity() / (static_cast<double>(d_i) * d_j), 1.0 / (de * de)};
}

double cq_distance(const DensityMatrix& rho, const PointerBasis& basis) {
  require_pointer_dims(rho, basis);
  const int d_s = basis.dim();
  const ComplexOperator framed = to_pointer_frame(rho.op(), basis);
  const long d_e = rho.dim() / d_s;
  ComplexOperator off = framed;
  for (int i = 0; i < d_s; ++i) off.block(i * d_e, i * d_e, d_e, d_e).setZero();
  return std::clamp(0.5 * trace_norm(off), 0.0, 1.0);
}

SbsDeviation sbs_deviation(const DensityMatrix& rho, const PointerBasis& basis, const MacroPartition& partition,
                           double p_floor) {
  SbsDeviation out;
  out.cq_distance = cq_distance(rho, basis);
  const auto conditionals =
      conditional_env_states(rho, basis, p_floor, std::numeric_limits<double>::infinity());
  const auto env_dims = env_dims_of(rho, basis.dim());
  partition.validate(static_cast<int>(env_dims.size()));

  std::vector<int> covered;
  for (const auto& g : partition.groups) covered.insert(covered.end(), g.begin(), g.end());
  std::vector<int> covered_sorted = covered;
  std::sort(covered_sorted.begin(), covered_sorted.end());

  // marginals[i][q]
  std::vector<std::vector<ComplexOperator>> marginals(conditionals.states.size());
  for (std::size_t i = 0; i < conditionals.states.size(); ++i) {
    const auto& state = conditionals.states[i];
    if (!state) continue;
    for (const auto& g : partition.groups) marginals[i].push_back(partial_trace(state->op(), env_dims, g));

    // Strong independence: covered part of rho_E^(i) against the product of
    // its group marginals, reordered into ascending factor order.
    const ComplexOperator covered_state = partial_trace(state->op(), env_dims, covered_sorted);
    ComplexOperator product = tensor_all(marginals[i]);
    std::vector<int> product_dims, order;
    for (int k : covered) product_dims.push_back(env_dims[k]);
    for (int k : covered_sorted)
      order.push_back(static_cast<int>(std::find(covered.begin(), covered.end(), k) - covered.begin()));
    product = permute_factors(product, product_dims, order);
    out.independence_deviation = std::max(out.independence_deviation, trace_distance(covered_state, product));
  }

  for (std::size_t i = 0; i < marginals.size(); ++i) {
    if (marginals[i].empty()) continue;
    for (std::size_t j = i + 1; j < marginals.size(); ++j) {
      if (marginals[j].empty()) continue;
      for (std::size_t q = 0; q < partition.groups.size(); ++q)
        out.max_fidelity = std::max(out.max_fidelity, fidelity(marginals[i][q], marginals[j][q]));
    }
  }
  out.value = std::max({out.cq_distance, out.max_fidelity, out.independence_deviation});
  return out;
}

FaithfulnessResult check_faithfulness(const DensityMatrix& rho, const PointerBasis& basis, double p_floor) {
  const auto conditionals = conditional_env_states(rho, basis, p_floor);
  std::vector<ComplexOperator> supports(conditionals.states.size());
  FaithfulnessResult out;
  for (std::size_t i = 0; i < conditionals.states.size(); ++i) {
    const auto& state = conditionals.states[i];
    if (!state) continue;
    const auto decomp = hermitian_eig_absolute(state->op(), 0.0);
    std::vector<int> cols;
    for (int a = 0; a < decomp.dim(); ++a)
      if (decomp.eigenvalues(a) > 1e-12) cols.push_back(a);
    ComplexOperator s(state->dim(), static_cast<long>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) s.col(static_cast<long>(c)) = decomp.eigenvectors.col(cols[c]);
    const ComplexOperator proj = s * s.adjoint();
    out.captured_weight += conditionals.probabilities[i] * (proj * state->op()).trace().real();
    supports[i] = std::move(s);
  }
  for (std::size_t i = 0; i < supports.size(); ++i) {
    if (supports[i].size() == 0) continue;
    for (std::size_t j = i + 1; j < supports.size(); ++j) {
      if (supports[j].size() == 0) continue;
      const ComplexOperator cross = supports[i].adjoint() * supports[j];
      Eigen::JacobiSVD<ComplexOperator> svd(cross);
      out.max_overlap = std::max(out.max_overlap, svd.singularValues()(0));
    }
  }
  out.faithful = out.max_overlap <= 1e-9 && std::abs(out.captured_weight - 1.0) <= 1e-9;
  return out;
}

CqCommutationResult verify_cq_commutation(const ComplexOperator& h, const PointerBasis& basis, int trials,
                                          std::uint64_t seed) {
  require_hermitian(h, "verify_cq_commutation Hamiltonian");
  const int d_s = basis.dim();
  if (h.rows() % d_s != 0 || h.rows() == d_s)
    throw Error(ErrorKind::DimensionMismatch, "Hamiltonian must act on H_S (x) H_E");
  if (trials < 1) throw Error(ErrorKind::InvalidArgument, "need at least one trial");
  const long d_e = h.rows() / d_s;
  const ComplexOperator framed = to_pointer_frame(h, basis);

  CqCommutationResult out;
  out.max_off_block = max_off_block(framed, d_s);
  std::vector<SpectralDecomposition> blocks;
  for (int i = 0; i < d_s; ++i) {
    ComplexOperator block = framed.block(i * d_e, i * d_e, d_e, d_e);
    blocks.push_back(hermitian_eig(0.5 * (block + block.adjoint())));
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(0.05, 1.0);
  out.all_trials_commute = true;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> p(d_s);
    for (double& pi : p) pi = uniform(rng);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    ComplexOperator cq = ComplexOperator::Zero(h.rows(), h.cols());
    for (int i = 0; i < d_s; ++i) {
      const DensityMatrix env = random_density(static_cast<int>(d_e), static_cast<int>(d_e), rng);
      cq.block(i * d_e, i * d_e, d_e, d_e) = (p[i] / total) * pinch(env.op(), blocks[i]);
    }
    const double comm = (framed * cq - cq * framed).norm();
    out.max_commutator = std::max(out.max_commutator, comm);
    if (comm > 1e-9 && out.all_trials_commute) {
      out.all_trials_commute = false;
      out.failed_trial = t;
      out.witness = from_pointer_frame(cq, basis);
    }
  }
  out.certified = out.all_trials_commute && out.max_off_block <= 1e-10;
  return out;
}

ObjectivityReport objectivity_report(const StarHamiltonianSpec& spec, const DensityMatrix& rho_s0,
                                     std::span<const DensityMatrix> env_factors, const MacroPartition& partition) {
  const auto conditionals = star_conditionals(spec, rho_s0, env_factors);
  const auto macro = macro_fidelity_matrix(conditionals, partition);
  const auto equilibrium = conditional_equilibrium(spec, rho_s0, env_factors, EquilibriumPath::FactorWise);

  ObjectivityReport report;
  report.probabilities = conditionals.probabilities;
  report.fidelity_micro = macro.fidelity_micro;
  report.eta = macro.eta;
  for (const auto& g : macro.groups) {
    report.fidelity_macro.push_back(g.fidelity);
    report.gamma.push_back(g.gamma);
    report.macro_bound.push_back(g.bound);
  }
  double env_purity = 1.0;
  for (const auto& f : env_factors) env_purity *= f.purity();
  const long d_e = spec.factorization().env_dim();
  // Non-degenerate star branches have d_E distinct levels each.
  const double de = static_cast<double>(d_e);
  report.lower_bound_tight = RealMatrix::Constant(spec.system_dim(), spec.system_dim(), env_purity / (de * de));
  report.lower_bound_loose = 1.0 / (de * de);
  report.cq_distance = cq_distance(equilibrium.state, spec.basis);
  report.sbs = sbs_deviation(equilibrium.state, spec.basis, partition);
  report.faithful = check_faithfulness(equilibrium.state, spec.basis).faithful;
  return report;
}

}  // namespace eqobj
