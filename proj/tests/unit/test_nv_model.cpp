#include "doctest.h"

#include "nvsim/error.hpp"
#include "nvsim/nv_model.hpp"
#include "nvsim/units.hpp"

#include <algorithm>
#include <cmath>

using namespace nvsim;

namespace {

std::vector<double> esr_freqs(const SpinHamiltonianParams& p) {
  std::vector<double> f;
  for (const auto& t : transition_table(ground_hamiltonian(p), ground_basis(p))) f.push_back(t.freq_mhz);
  std::sort(f.begin(), f.end());
  return f;
}

}  // namespace

TEST_CASE("kron identities") {
  CHECK((kron(identity(2), identity(3)) - identity(6)).norm() == 0.0);
  Operator sz = Operator::Zero(2, 2);
  sz(0, 0) = 1.0;
  sz(1, 1) = -1.0;
  Eigen::VectorXcd d = kron(sz, identity(2)).diagonal();
  CHECK(d.real().transpose() == Eigen::RowVector4d(1, 1, -1, -1));
}

TEST_CASE("electron operator ordering in the product basis") {
  SpinHamiltonianParams p;
  p.nuclei = {NucleusSpec::c13()};
  auto basis = ground_basis(p);
  REQUIRE(basis.dim() == 6);
  auto s = electron_operators(p);
  CHECK((s.z - kron(spin_operators(1.0).z, identity(2))).norm() < 1e-15);
  // Index arithmetic: level i has m_s = 1 - i / 2.
  for (int i = 0; i < 6; ++i) {
    CHECK(basis.levels[i].ms == 1 - i / 2);
    CHECK(s.z(i, i).real() == doctest::Approx(basis.levels[i].ms));
  }
}

TEST_CASE("spin-1 commutation relations") {
  auto s = spin_operators(1.0);
  CHECK((commutator(s.x, s.y) - Complex(0, 1) * s.z).norm() < 1e-14);
  auto h = spin_operators(0.5);
  CHECK((h.x * h.x + h.y * h.y + h.z * h.z - 0.75 * identity(2)).norm() < 1e-14);
}

TEST_CASE("zero-field ground Hamiltonian eigenvalues") {
  SpinHamiltonianParams p;
  auto es = eig_hermitian(ground_hamiltonian(p));
  const double d = units::mhz_to_rad_per_s(2880.0);
  CHECK((es.values(1) - es.values(0)) == doctest::Approx(d));
  CHECK((es.values(2) - es.values(0)) == doctest::Approx(d));
  CHECK(esr_freqs(p) == std::vector<double>{esr_freqs(p)[0], esr_freqs(p)[0]});
  CHECK(esr_freqs(p)[0] == doctest::Approx(2880.0).epsilon(1e-12));
}

TEST_CASE("axial field splits the doublet at 2 gamma_e B") {
  SpinHamiltonianParams p;
  p.b0 = {0.0, 0.0, 1.0};
  auto f = esr_freqs(p);
  REQUIRE(f.size() == 2);
  CHECK(0.5 * (f[0] + f[1]) == doctest::Approx(2880.0).epsilon(1e-9));
  CHECK(f[1] - f[0] == doctest::Approx(2.0 * 28.03).epsilon(1e-3));
}

TEST_CASE("13C at a small axial field: four allowed transitions of equal strength") {
  SpinHamiltonianParams p;
  p.nuclei = {NucleusSpec::c13()};
  p.b0 = {0.0, 0.0, 0.5};
  auto tt = transition_table(ground_hamiltonian(p), ground_basis(p));
  REQUIRE(tt.size() == 4);
  double smax = 0.0, smin = 1e300;
  for (const auto& t : tt) {
    smax = std::max(smax, t.strength);
    smin = std::min(smin, t.strength);
  }
  CHECK(smin / smax > 0.99);
}

TEST_CASE("isotropic coupling at zero field: product basis is already the eigenbasis") {
  SpinHamiltonianParams p;
  p.nuclei = {NucleusSpec::c13()};
  p.nuclei[0].a_perp = 0.0;  // no flip-flop terms
  Operator h = ground_hamiltonian(p);
  Operator off = h;
  off.diagonal().setZero();
  CHECK(off.norm() == 0.0);
}

TEST_CASE("invalid parameters are rejected") {
  SpinHamiltonianParams p;
  p.c3v_symmetry = true;
  p.e = 1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  NucleusSpec n = NucleusSpec::n14();
  n.spin = 0.7;
  CHECK_THROWS_AS(n.validate(), InvalidArgument);
  PhotophysicsRates r;
  r.quantum_yield = 1.5;
  CHECK_THROWS_AS(r.validate(), InvalidArgument);
}

TEST_CASE("optical rate matrix conserves probability") {
  PhotophysicsRates r;
  RateMatrix m = optical_rate_matrix(r, 1e7);
  CHECK(m.rows() == kOpticalLevels);
  CHECK(m.colwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("no pump and symmetric ISC: uniform ground populations") {
  PhotophysicsRates r;
  r.k_s_z = r.k_s_xy;
  auto p = steady_state(optical_rate_matrix(r, 0.0));
  for (int k : {kGroundPlus, kGroundZero, kGroundMinus}) CHECK(p(k) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(p(kSinglet) == doctest::Approx(0.0));
}

TEST_CASE("no pump: m_s = 0 start is stationary on short timescales") {
  PhotophysicsRates r;
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(kOpticalLevels);
  p0(kGroundZero) = 1.0;
  auto p = evolve_populations(optical_rate_matrix(r, 0.0), p0, 1e-3, 1000);
  CHECK(p(kGroundZero) > 0.998);
}

TEST_CASE("optical pumping polarizes into m_s = 0") {
  PhotophysicsRates r;
  auto p = steady_state(optical_rate_matrix(r, 0.1 * r.a_rad));
  const double ground = p(kGroundPlus) + p(kGroundZero) + p(kGroundMinus);
  CHECK(p(kGroundZero) / ground > 0.8);
  // Rescaling the generator does not move its null space.
  auto p2 = steady_state(2.0 * optical_rate_matrix(r, 0.1 * r.a_rad));
  CHECK((p - p2).norm() < 1e-12);
}

TEST_CASE("emitted flux is the excited decay flux times the quantum yield") {
  PhotophysicsRates r;
  auto p = steady_state(optical_rate_matrix(r, 1e7));
  CHECK(emitted_photon_flux(r, p) == doctest::Approx(r.quantum_yield * excited_decay_flux(r, p)));
}

TEST_CASE("saturated single-defect intensity") {
  PhotophysicsRates r;
  r.a_rad = 7.69e7;
  r.k_x = r.k_y = r.k_z = 1e6;
  r.r_slr = 1.0;
  auto s = saturated_intensity(r, 5e7);
  CHECK(s.emitted == doctest::Approx(7.69e7 / (4.0 + (5e7 * 2e6 + 1.0) / 3e6)));
  CHECK(s.emitted == doctest::Approx(2.31).epsilon(0.005));
  CHECK(s.low_t_branching == doctest::Approx(2.31).epsilon(0.005));
  CHECK(s.detected == doctest::Approx(s.emitted * r.quantum_yield * r.detection_eff));

  // Bright branch: A / 4.
  CHECK(saturated_intensity(r, 0.0).emitted == doctest::Approx(r.a_rad / 4.0).epsilon(1e-6));

  // Low-temperature limit is linear in R.
  PhotophysicsRates r10 = r;
  r10.r_slr = 10.0;
  CHECK(saturated_intensity(r10, 5e7).emitted / s.emitted == doctest::Approx(10.0).epsilon(0.01));

  r.r_slr = 0.0;
  CHECK_THROWS_AS(saturated_intensity(r, 5e7), InvalidArgument);
}
