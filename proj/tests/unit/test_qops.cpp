#include "doctest.h"

#include "nvsim/error.hpp"
#include "nvsim/qops.hpp"

#include <cmath>
#include <random>

using namespace nvsim;

namespace {

Operator random_hermitian(int d, std::mt19937& rng) {
  std::normal_distribution<double> n;
  Operator a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(n(rng), n(rng));
  return 0.5 * (a + a.adjoint());
}

Operator sigma_minus() {
  Operator s = Operator::Zero(2, 2);
  s(0, 1) = 1.0;  // |0><1|, |1> excited
  return s;
}

}  // namespace

TEST_CASE("density matrix invariants are enforced") {
  Operator bad = Operator::Zero(2, 2);
  bad(0, 0) = 0.7;
  bad(1, 1) = 0.7;
  CHECK_THROWS_AS(DensityMatrix{bad}, InvalidArgument);

  Operator neg = Operator::Zero(2, 2);
  neg(0, 0) = 1.2;
  neg(1, 1) = -0.2;
  CHECK_THROWS_AS(DensityMatrix{neg}, InvalidArgument);

  Operator nonherm = Operator::Identity(2, 2) * 0.5;
  nonherm(0, 1) = 0.3;
  CHECK_THROWS_AS(DensityMatrix{nonherm}, InvalidArgument);

  auto mm = DensityMatrix::maximally_mixed(4);
  CHECK(mm.trace() == doctest::Approx(1.0));
  CHECK(mm.purity() == doctest::Approx(0.25));
  CHECK(DensityMatrix::basis_state(3, 1).purity() == doctest::Approx(1.0));
}

TEST_CASE("kron and commutator") {
  Operator x = Operator::Zero(2, 2);
  x(0, 1) = x(1, 0) = 1.0;
  Operator z = Operator::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  Operator xz = kron(x, z);
  CHECK(xz.rows() == 4);
  CHECK(std::abs(xz(0, 2) - Complex(1.0)) < 1e-15);
  CHECK(std::abs(xz(1, 3) - Complex(-1.0)) < 1e-15);
  CHECK((kron({x, z, x}) - kron(kron(x, z), x)).norm() < 1e-15);
  // [X, Z] = -2iY
  Operator y = Operator::Zero(2, 2);
  y(0, 1) = Complex(0, -1);
  y(1, 0) = Complex(0, 1);
  CHECK((commutator(x, z) + Complex(0, 2) * y).norm() < 1e-14);
}

TEST_CASE("unitary propagator matches the matrix exponential and conserves purity") {
  std::mt19937 rng(3);
  for (int d : {2, 3, 9}) {
    Operator h = random_hermitian(d, rng) * 1e6;
    Operator u = unitary_propagator(h, 2e-6);
    CHECK((u * u.adjoint() - identity(d)).norm() < 1e-12);
    // Composition: U(t1) U(t2) = U(t1 + t2)
    CHECK((unitary_propagator(h, 1e-6) * unitary_propagator(h, 1e-6) - u).norm() < 1e-11);
    auto rho = unitary_evolve(DensityMatrix::basis_state(d, 0), h, 3e-6);
    CHECK(rho.purity() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("spontaneous decay follows exp(-gamma t)") {
  const double gamma = 1e6;
  Operator h = Operator::Zero(2, 2);
  std::vector<CollapseChannel> ch{{sigma_minus(), gamma}};
  Operator pe = Operator::Zero(2, 2);
  pe(1, 1) = 1.0;
  const double dt = 1e-9;
  auto res = lindblad_evolve(DensityMatrix::basis_state(2, 1), h, ch, dt, 3000, {{"pe", pe}}, 100);
  const auto& t = res.trace.times;
  const auto& p = res.trace.column("pe");
  REQUIRE(t.size() == 31);
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(p[k] == doctest::Approx(std::exp(-gamma * t[k])).epsilon(1e-9));
  CHECK(res.final_state.trace() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("RK4 global error is fourth order") {
  std::mt19937 rng(5);
  Operator h = random_hermitian(3, rng) * 1e7;
  Operator l = Operator::Zero(3, 3);
  l(0, 2) = 1.0;
  std::vector<CollapseChannel> ch{{l, 2e6}};
  const double t = 2e-7;
  // Reference: matrix exponential of the Liouvillian.
  auto big = lindblad_evolve(DensityMatrix::basis_state(3, 2), h, ch, t / 4096, 4096);
  auto err = [&](long n) {
    auto r = lindblad_evolve(DensityMatrix::basis_state(3, 2), h, ch, t / n, n);
    return (r.final_state.matrix() - big.final_state.matrix()).norm();
  };
  const double e1 = err(64), e2 = err(128);
  CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("unstable step is rejected") {
  Operator h = Operator::Zero(2, 2);
  h(0, 1) = h(1, 0) = 1e9;
  const double dt = max_stable_dt(h, {});
  CHECK(dt > 0.0);
  CHECK_THROWS_AS(lindblad_evolve(DensityMatrix::basis_state(2, 0), h, {}, 10.0 * dt, 10), InvalidArgument);
}

TEST_CASE("steady state of a driven decaying two-level system") {
  // Resonant drive Omega (H = Omega/2 sigma_x), decay gamma:
  // rho_ee = (Omega^2 / 4) / (Omega^2 / 2 + gamma^2 / 4).
  const double omega = 2e6, gamma = 3e6;
  Operator h = Operator::Zero(2, 2);
  h(0, 1) = h(1, 0) = omega / 2.0;
  auto ss = lindblad_steady_state(h, {{sigma_minus(), gamma}});
  const double expect = (omega * omega / 4.0) / (omega * omega / 2.0 + gamma * gamma / 4.0);
  CHECK(ss.population(1) == doctest::Approx(expect).epsilon(1e-10));
  // L rho_ss = 0
  CHECK(lindblad_rhs(ss.matrix(), h, {{sigma_minus(), gamma}}).norm() < 1e-6);
}

TEST_CASE("liouvillian agrees with lindblad_rhs") {
  std::mt19937 rng(9);
  Operator h = random_hermitian(3, rng) * 1e6;
  Operator l = random_hermitian(3, rng);
  std::vector<CollapseChannel> ch{{l, 5e5}};
  Operator rho = DensityMatrix::maximally_mixed(3).matrix();
  rho(0, 1) = 0.1;
  rho(1, 0) = 0.1;
  Eigen::VectorXcd v(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v(i * 3 + j) = rho(i, j);
  Eigen::VectorXcd dv = liouvillian(h, ch) * v;
  Operator d = lindblad_rhs(rho, h, ch);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(dv(i * 3 + j) - d(i, j)) < 1e-6);
}

TEST_CASE("dimension limit") {
  CHECK_THROWS_AS(lindblad_evolve(DensityMatrix::basis_state(kMaxDim + 1, 0), identity(kMaxDim + 1), {}, 1e-9, 1),
                  InvalidArgument);
}
