#include <doctest.h>

#include <cmath>

#include "eqobj/equilibration.hpp"
#include "oracles.hpp"

using namespace eqobj;

namespace {

ComplexOperator diag(std::initializer_list<double> values) {
  RealVector v(static_cast<long>(values.size()));
  long i = 0;
  for (double x : values) v(i++) = x;
  return v.cast<Complex>().asDiagonal();
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an eqobj::Error");
  return ErrorKind::IoError;
}

ComplexOperator generic_hamiltonian(int dim, Rng& rng) {
  for (;;) {
    ComplexOperator h = random_gue(dim, rng);
    const auto d = diagnose_spectrum(h);
    if (d.is_nondegenerate && !d.has_equal_gaps) return h;
  }
}

}  // namespace

TEST_CASE("pinch under a fully degenerate H is the identity map") {
  const auto rho = random_density(4, 3, 1);
  CHECK((pinch(rho, identity(4)).op() - rho.op()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("pinch under a non-degenerate diagonal H zeroes off-diagonal entries") {
  const auto rho = random_density(3, 3, 2);
  const auto out = pinch(rho, diag({1, 2, 3}));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) CHECK(std::abs(out.op()(i, i) - rho.op()(i, i)) <= 1e-14);
      else CHECK(std::abs(out.op()(i, j)) <= 1e-14);
    }
}

TEST_CASE("pinch properties: idempotent, trace and positivity preserving, commutes with H") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 3 + trial % 6;
    ComplexOperator h = random_gue(dim, rng);
    if (trial % 2 == 1) {
      // plant a degenerate pair
      auto e = hermitian_eig(h);
      e.eigenvalues(1) = e.eigenvalues(0);
      h = e.eigenvectors * e.eigenvalues.cast<Complex>().asDiagonal() * e.eigenvectors.adjoint();
      h = 0.5 * (h + h.adjoint());
    }
    const auto rho = random_density(dim, 1 + trial % dim, rng);
    const auto once = pinch(rho, h);
    const auto twice = pinch(once, h);
    CHECK(trace_distance(once.op(), twice.op()) <= 1e-10);
    CHECK(std::abs(once.op().trace().real() - 1.0) <= 1e-9);
    CHECK(once.min_eigenvalue() >= -1e-9);
    CHECK((h * once.op() - once.op() * h).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("pinch approximates a long numeric time average") {
  Rng rng(4);
  const ComplexOperator h = generic_hamiltonian(8, rng);
  const auto rho = random_density(8, 8, rng);
  const double gap = min_gap(h);
  const auto target = pinch(rho, h);
  double previous = 1.0;
  for (double multiple : {1e1, 1e2, 1e3, 1e4}) {
    const ComplexOperator avg = oracle::time_average_quadrature(rho.op(), h, multiple / gap, 2000);
    const double d = trace_distance(avg, target.op());
    if (multiple == 1e4) CHECK(d <= 5e-2);
    previous = d;
  }
  CHECK(previous <= 5e-2);
}

TEST_CASE("time_average_kernel") {
  CHECK(time_average_kernel(0.7, 3.0, true) == Complex(1.0, 0.0));
  // (1/T) int_0^T exp(-i d t) dt evaluated in closed form
  const double d = 0.7, t = 3.0;
  const Complex want = (Complex(std::cos(d * t), -std::sin(d * t)) - 1.0) / Complex(0.0, -d * t);
  CHECK(std::abs(time_average_kernel(d, t, false) - want) <= 1e-14);
  CHECK(std::abs(time_average_kernel(1e-20, 1.0, false) - Complex(1.0, 0.0)) <= 1e-12);
}

TEST_CASE("finite_time_average: stationary input is returned unchanged") {
  const ComplexOperator h = diag({0.0, 1.0, 2.5});
  const DensityMatrix rho(diag({0.2, 0.3, 0.5}));
  for (auto method : {TimeAverageMethod::Analytic, TimeAverageMethod::Quadrature}) {
    const auto out = finite_time_average(rho, h, 7.0, 64, method);
    CHECK((out.op() - rho.op()).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("finite_time_average: analytic and quadrature paths agree") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 3 + trial % 5;
    const ComplexOperator h = random_gue(dim, rng);
    const auto rho = random_density(dim, dim, rng);
    const double window = (trial + 1) * 0.9;
    const int n = 4000;
    const auto a = finite_time_average(rho, h, window, n, TimeAverageMethod::Analytic);
    const auto q = finite_time_average(rho, h, window, n, TimeAverageMethod::Quadrature);
    CHECK(trace_distance(a.op(), q.op()) <= std::max(1e-8, 10.0 / n));
    const ComplexOperator direct = oracle::time_average_quadrature(rho.op(), h, window, n);
    CHECK(trace_distance(q.op(), direct) <= 1e-10);
  }
}

TEST_CASE("finite_time_average converges to pinch as the window grows") {
  Rng rng(6);
  const ComplexOperator h = generic_hamiltonian(8, rng);
  const auto rho = random_density(8, 8, rng);
  const double gap = min_gap(h);
  const auto target = pinch(rho, h);
  double previous = std::numeric_limits<double>::infinity();
  for (double multiple : {1e1, 1e2, 1e3, 1e4}) {
    const double d = trace_distance(finite_time_average(rho, h, multiple / gap, 2).op(), target.op());
    CHECK(d <= previous + 1e-12);
    previous = d;
  }
  const double far = trace_distance(finite_time_average(rho, h, 1e6 / gap, 2).op(), target.op());
  CHECK(far <= 1e-3);
}

TEST_CASE("finite_time_average rejects non-positive windows") {
  const auto rho = maximally_mixed(2);
  CHECK(kind_of([&] { finite_time_average(rho, diag({0, 1}), 0.0, 10); }) == ErrorKind::NonPositiveWindow);
  CHECK(kind_of([&] { finite_time_average(rho, diag({0, 1}), -1.0, 10); }) == ErrorKind::NonPositiveWindow);
}

TEST_CASE("effective dimension") {
  const ComplexOperator h = diag({0.0, 1.0, 3.0, 7.0});
  const auto d = hermitian_eig(h);
  CHECK(effective_dimension(basis_state(4, 2), d) == doctest::Approx(1.0));
  CHECK(effective_dimension(maximally_mixed(4), d) == doctest::Approx(4.0));

  Rng rng(7);
  const ComplexOperator g = random_gue(8, rng);
  const auto dg = hermitian_eig(g);
  const auto rho = random_density(8, 3, rng);
  double sum = 0.0;
  for (int m = 0; m < 8; ++m) {
    const ComplexVector v = dg.eigenvectors.col(m);
    const double p = (v.adjoint() * rho.op() * v)(0, 0).real();
    sum += p * p;
  }
  CHECK(effective_dimension(rho, dg) == doctest::Approx(1.0 / sum).epsilon(1e-12));
  CHECK(effective_dimension(rho, dg) >= 1.0);
  CHECK(effective_dimension(rho, dg) <= 8.0);
}

TEST_CASE("observable bound: trivial cases") {
  Rng rng(8);
  const ComplexOperator h = generic_hamiltonian(6, rng);
  const auto rho = random_density(6, 6, rng);
  const double gap = min_gap(h);
  const auto r = check_observable_bound(rho, h, identity(6), 1e3 / gap, 400);
  CHECK(r.observable_bound_lhs <= 1e-20);
  CHECK(r.observable_bound_holds());
  CHECK(r.large_window);

  const auto eig = hermitian_eig(h);
  const DensityMatrix eigenstate = pure_state(eig.eigenvectors.col(2));
  const auto s = check_observable_bound(eigenstate, h, random_gue(6, rng), 1e3 / gap, 400);
  CHECK(s.observable_bound_lhs <= 1e-20);
  CHECK(s.d_eff == doctest::Approx(1.0));
}

TEST_CASE("observable and subsystem bounds hold on random instances") {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexOperator h = generic_hamiltonian(8, rng);
    const auto rho_s = random_density(2, 2, rng), rho_e = random_density(4, 1 + trial % 4, rng);
    const DensityMatrix parts[2] = {rho_s, rho_e.with_factor_dims({2, 2})};
    const auto rho = product_state(parts);
    const double window = 1e3 / min_gap(h);
    const auto obs = check_observable_bound(rho, h, random_gue(8, rng), window, 4000);
    CHECK(obs.observable_bound_holds(1e-9));
    const int keep[1] = {0};
    const auto sub = check_subsystem_bound(rho, h, keep, window, 4000);
    CHECK(sub.subsystem_bound_holds(1e-9));
    CHECK(sub.n_time_samples == 4000);
  }
}

TEST_CASE("subsystem bound on a 2 (x) 8 instance keeping the qubit") {
  Rng rng(10);
  const ComplexOperator h = generic_hamiltonian(16, rng);
  const DensityMatrix parts[2] = {random_density(2, 2, rng), random_density(8, 2, rng)};
  const auto rho = product_state(parts);
  const int keep[1] = {0};
  const auto sub = check_subsystem_bound(rho, h, keep, 1e3 / min_gap(h), 4000);
  CHECK(sub.subsystem_bound_holds());

  // stationary input
  const auto eq = pinch(rho, h);
  const auto stat = check_subsystem_bound(eq, h, keep, 1e3 / min_gap(h), 200);
  CHECK(stat.subsystem_bound_lhs <= 1e-9);

  // keeping everything is allowed
  const int all[2] = {0, 1};
  const auto whole = check_subsystem_bound(rho, h, all, 1e3 / min_gap(h), 200);
  CHECK(std::isfinite(whole.subsystem_bound_lhs));
}

TEST_CASE("bound checkers refuse equal gaps") {
  const auto rho = maximally_mixed(3);
  CHECK(kind_of([&] { check_observable_bound(rho, diag({0, 1, 2}), identity(3), 10.0, 10); }) ==
        ErrorKind::EqualGapsDetected);
  const int keep[1] = {0};
  CHECK(kind_of([&] { check_subsystem_bound(rho, diag({0, 1, 2}), keep, 10.0, 10); }) ==
        ErrorKind::EqualGapsDetected);
}

TEST_CASE("conditional equilibrium with a single populated branch") {
  const auto spec = random_conditional(2, {4}, 11);
  const auto rho_e = random_density(4, 4, 12);
  const auto eq = conditional_equilibrium(spec, basis_state(2, 0), rho_e);
  ComplexOperator p0 = ComplexOperator::Zero(2, 2);
  p0(0, 0) = 1.0;
  const ComplexOperator want = tensor(p0, pinch(rho_e.op(), hermitian_eig(spec.branch_ops[0])));
  CHECK(trace_distance(eq.state.op(), want) <= 1e-12);
}

TEST_CASE("conditional equilibrium with identical non-degenerate branches") {
  Rng rng(13);
  ConditionalHamiltonianSpec spec;
  spec.basis = PointerBasis(2);
  const ComplexOperator shared = random_gue(4, rng);
  spec.branch_ops = {shared, shared};
  const auto rho_e = random_density(4, 4, rng);

  SUBCASE("pointer-diagonal system state") {
    const DensityMatrix rho_s(diag({0.3, 0.7}));
    const auto eq = conditional_equilibrium(spec, rho_s, rho_e);
    const ComplexOperator want = tensor(diag({0.3, 0.7}), pinch(rho_e.op(), hermitian_eig(shared)));
    CHECK(trace_distance(eq.state.op(), want) <= 1e-12);
    CHECK(mutual_information(eq.state, 2, 4) <= 1e-10);
    // the dense pinch sees a degenerate H but agrees here
    const auto dense = conditional_equilibrium(spec, rho_s, rho_e, EquilibriumPath::Dense);
    CHECK(trace_distance(eq.state.op(), dense.state.op()) <= 1e-10);
  }
  SUBCASE("coherent system state violates the rank-deficiency condition") {
    const auto rho_s = random_density(2, 1, rng);
    CHECK(kind_of([&] { conditional_equilibrium(spec, rho_s, rho_e); }) == ErrorKind::DegenerateBranchStructure);
  }
}

TEST_CASE("branchwise and factor-wise equilibria match dense pinching") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = random_branch_ensemble(HilbertFactorization(2, {2, 2, 2}), 100 + trial);
    const auto rho_s = random_density(2, 2, rng);
    std::vector<DensityMatrix> factors;
    for (int k = 0; k < 3; ++k) factors.push_back(random_density(2, 1 + (trial + k) % 2, rng));
    const auto rho_e = product_state(factors);
    const DensityMatrix parts[2] = {rho_s, rho_e};
    const auto dense = pinch(product_state(parts), assemble(spec));

    const auto branch = conditional_equilibrium(spec, rho_s, rho_e, EquilibriumPath::Branchwise);
    const auto factor = conditional_equilibrium(spec, rho_s, factors, EquilibriumPath::FactorWise);
    const auto autop = conditional_equilibrium(spec, rho_s, factors);
    CHECK(trace_distance(branch.state.op(), dense.op()) <= 1e-10);
    CHECK(trace_distance(factor.state.op(), dense.op()) <= 1e-10);
    CHECK(autop.path_used == EquilibriumPath::FactorWise);
    CHECK(branch.path_used == EquilibriumPath::Branchwise);
  }
}

TEST_CASE("von Neumann equilibrium") {
  Rng rng(15);
  SUBCASE("x = (1, sqrt 2), random 4x4 Y, against the dense oracle") {
    VonNeumannSpec spec{PointerBasis(2), {1.0, std::sqrt(2.0)}, random_gue(4, rng)};
    const auto rho_s = random_density(2, 2, rng), rho_e = random_density(4, 3, rng);
    const auto eq = von_neumann_equilibrium(spec, rho_s, rho_e);
    const DensityMatrix parts[2] = {rho_s, rho_e};
    const auto dense = pinch(product_state(parts), assemble(spec));
    CHECK(trace_distance(eq.state.op(), dense.op()) <= 1e-10);
    CHECK(mutual_information(eq.state, 2, 4) <= 1e-10);
    const ComplexOperator dephased = rho_s.op().diagonal().asDiagonal();
    const ComplexOperator product = tensor(dephased, pinch(rho_e.op(), hermitian_eig(spec.env_op)));
    CHECK(trace_distance(eq.state.op(), product) <= 1e-10);
  }
  SUBCASE("environment already diagonal in the Y eigenbasis is unchanged") {
    VonNeumannSpec spec{PointerBasis(2), {1.0, 2.5}, diag({-1.0, 0.3, 1.7})};
    const DensityMatrix rho_e(diag({0.5, 0.25, 0.25}));
    const auto eq = von_neumann_equilibrium(spec, maximally_mixed(2), rho_e);
    for (const auto& env : eq.env_states) CHECK((env - rho_e.op()).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("resonances are reported with a witness") {
    // x_0 * 2 == x_1 * 1
    VonNeumannSpec spec{PointerBasis(2), {1.0, 2.0}, diag({1.0, 2.0, 4.5})};
    try {
      von_neumann_equilibrium(spec, maximally_mixed(2), maximally_mixed(3));
      FAIL("expected ResonantEigenvalues");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ResonantEigenvalues);
      CHECK(std::string(e.what()).find("witness") != std::string::npos);
    }
  }
}
