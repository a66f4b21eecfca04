#include "nvsim/error.hpp"
#include "nvsim/pulsec.hpp"
#include "nvsim/units.hpp"

#include <cmath>

namespace nvsim {

using namespace units;

namespace {

constexpr double kMwRabiMHz = 10.0;
constexpr double kRfRabiMHz = 0.5;

// Pseudospin pair (0-based) and whether it is an electron (mw) transition.
struct Allowed {
  int i, j;
  bool electron;
};
constexpr Allowed kAllowed[4] = {{0, 2, true}, {1, 3, true}, {0, 1, false}, {2, 3, false}};

bool is_electron_pair(int a, int b) {
  for (const auto& t : kAllowed)
    if ((t.i == a && t.j == b) || (t.i == b && t.j == a)) return t.electron;
  throw InvalidArgument("pseudospin levels " + std::to_string(a + 1) + "-" + std::to_string(b + 1) +
                        " are not connected by an allowed transition");
}

// Rotation on pseudospin levels a-b (0-based), first level a.
PulseEvent pseudo_pulse(int a, int b, double angle, double phase) {
  const bool e = is_electron_pair(a, b);
  return make_pulse(e ? EventKind::MwPulse : EventKind::RfPulse, bell_level(a + 1), bell_level(b + 1), angle,
                    phase, e ? kMwRabiMHz : kRfRabiMHz);
}

// A pi/2 probe at phase phi reads 2 Re(rho_ab) (phi = 0) or -2 Im(rho_ab)
// (phi = pi/2) as rho_aa - rho_bb; that is a rotation about phi - pi/2.
PulseEvent probe_pulse(int a, int b, double phi) { return pseudo_pulse(a, b, M_PI / 2.0, phi + 1.5 * M_PI); }

Eigen::Matrix4cd ideal_unitary(const PulseEvent& ev) {
  Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
  int a = -1, b = -1;
  for (int k = 0; k < 4; ++k) {
    if (bell_level(k + 1) == ev.target->first) a = k;
    if (bell_level(k + 1) == ev.target->second) b = k;
  }
  const Eigen::Matrix2cd u2 = subspace_propagator(0.0, ev.rabi_mhz * 1e6, ev.phase, ev.duration_s);
  u(a, a) = u2(0, 0);
  u(a, b) = u2(0, 1);
  u(b, a) = u2(1, 0);
  u(b, b) = u2(1, 1);
  return u;
}

struct Probe {
  std::vector<PulseEvent> pulses;
  std::string note;
};

std::string lvl(int a, int b) { return std::to_string(a + 1) + "-" + std::to_string(b + 1); }

}  // namespace

std::string to_string(BellState b) {
  switch (b) {
    case BellState::PhiPlus: return "phi+";
    case BellState::PhiMinus: return "phi-";
    case BellState::PsiPlus: return "psi+";
    case BellState::PsiMinus: return "psi-";
  }
  return "?";
}

BellState bell_state_from_string(const std::string& s) {
  for (auto b : {BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus})
    if (to_string(b) == s) return b;
  throw InvalidArgument("unknown Bell state '" + s + "' (expected phi+, phi-, psi+ or psi-)");
}

SpinHamiltonianParams bell_params() {
  SpinHamiltonianParams p;
  p.b0 = {0.0, 0.0, 5.0};
  p.nuclei = {NucleusSpec::c13()};
  return p;
}

int bell_level(int k) {
  require(k >= 1 && k <= 4, "pseudospin level must be 1..4");
  // ground_basis order: (+1,+1/2) (+1,-1/2) (0,+1/2) (0,-1/2) (-1,+1/2) (-1,-1/2)
  return k + 1;
}

PulseSequence prepare_bell(BellState which) {
  PulseSequence seq;
  seq.name = "bell-" + to_string(which);
  const double half = M_PI / 2.0;
  // Start in |3>; a pi/2 about y splits it onto |1> (or |4>), a pi pulse moves
  // the remaining |3> amplitude to complete the pair.
  switch (which) {
    case BellState::PsiMinus:
      seq.events = {pseudo_pulse(2, 0, half, half), pseudo_pulse(1, 0, M_PI, half)};
      break;
    case BellState::PsiPlus:
      seq.events = {pseudo_pulse(2, 3, half, half), pseudo_pulse(3, 1, M_PI, half)};
      break;
    case BellState::PhiPlus:
      seq.events = {pseudo_pulse(2, 0, half, half), pseudo_pulse(2, 3, M_PI, half)};
      break;
    case BellState::PhiMinus:
      seq.events = {pseudo_pulse(2, 0, half, half), pseudo_pulse(3, 2, M_PI, half)};
      break;
  }
  return seq;
}

Eigen::Vector4cd bell_vector(BellState which) {
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  switch (which) {
    case BellState::PhiPlus: v(0) = r; v(3) = r; break;
    case BellState::PhiMinus: v(0) = r; v(3) = -r; break;
    case BellState::PsiPlus: v(1) = r; v(2) = r; break;
    case BellState::PsiMinus: v(1) = r; v(2) = -r; break;
  }
  return v;
}

DensityMatrix bell_initial_state(const SpinSystem& system) {
  return DensityMatrix::pure(system.eigenstate(bell_level(3)));
}

Eigen::Matrix4cd bell_block(const SpinSystem& system, const DensityMatrix& rho) {
  const Operator r = system.to_level_frame(rho.matrix());
  Eigen::Matrix4cd out;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out(a, b) = r(bell_level(a + 1), bell_level(b + 1));
  return out;
}

double bell_fidelity(const Eigen::Matrix4cd& rho, BellState which) {
  const Eigen::Vector4cd v = bell_vector(which);
  return (v.adjoint() * rho * v)(0, 0).real();
}

TomographyResult tomography_reconstruct(const PulseSequence& prep, const SpinHamiltonianParams& params,
                                        const std::optional<TomographyNoise>& noise) {
  require(params.nuclei.size() == 1 && params.nuclei[0].spin == 0.5,
          "tomography needs the electron plus a single spin-1/2 nucleus");
  const SpinSystem sys = SpinSystem::build(params);
  const DensityMatrix init = bell_initial_state(sys);

  auto run = [&](const std::vector<PulseEvent>& extra) {
    PulseSequence s = prep;
    s.events.insert(s.events.end(), extra.begin(), extra.end());
    if (s.events.empty()) return init;
    if (noise) return simulate_sequence_open(s, params, init, {noise->electron_dephasing}).final_state;
    return simulate_sequence(s, params, init, Frame::Rotating).final_state;
  };

  std::vector<Probe> probes;
  probes.push_back({{}, "populations from the ODMR signals without a probe"});
  for (const auto& t : kAllowed) {
    for (double phi : {0.0, M_PI / 2.0}) probes.push_back({{probe_pulse(t.i, t.j, phi)}, ""});
  }
  // Second-order coherences: a pi pulse swaps one level onto an allowed transition.
  for (double phi : {0.0, M_PI / 2.0}) {
    probes.push_back({{pseudo_pulse(3, 1, M_PI, 0.0), probe_pulse(0, 1, phi)}, ""});
    probes.push_back({{pseudo_pulse(2, 0, M_PI, 0.0), probe_pulse(0, 1, phi)}, ""});
  }

  // Hermitian basis: 4 diagonal, then (Re, Im) for every i < j.
  std::vector<Eigen::Matrix4cd> basis;
  const Complex I(0.0, 1.0);
  for (int i = 0; i < 4; ++i) {
    Eigen::Matrix4cd b = Eigen::Matrix4cd::Zero();
    b(i, i) = 1.0;
    basis.push_back(b);
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      Eigen::Matrix4cd re = Eigen::Matrix4cd::Zero(), im = Eigen::Matrix4cd::Zero();
      re(i, j) = re(j, i) = 1.0;
      im(i, j) = I;
      im(j, i) = -I;
      basis.push_back(re);
      basis.push_back(im);
    }
  }

  const int rows = static_cast<int>(probes.size()) * 4 + 1;
  Eigen::MatrixXd a(rows, 16);
  Eigen::VectorXd y(rows);
  int r = 0;
  for (const auto& p : probes) {
    Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
    for (const auto& ev : p.pulses) u = ideal_unitary(ev) * u;
    const Eigen::Matrix4cd measured = bell_block(sys, run(p.pulses));
    for (const auto& t : kAllowed) {
      Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
      m(t.i, t.i) = 1.0;
      m(t.j, t.j) = -1.0;
      const Eigen::Matrix4cd mh = u.adjoint() * m * u;
      for (int k = 0; k < 16; ++k) a(r, k) = (mh * basis[k]).trace().real();
      y(r) = (measured(t.i, t.i) - measured(t.j, t.j)).real();
      ++r;
    }
  }
  a.row(r).setZero();
  for (int k = 0; k < 4; ++k) a(r, k) = 1.0;
  y(r) = 1.0;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 16) throw NumericalError("tomography probe set is not informationally complete");
  const Eigen::VectorXd x = qr.solve(y);

  TomographyResult res;
  res.rho.setZero();
  for (int k = 0; k < 16; ++k) res.rho += x(k) * basis[k];
  res.hermiticity_error = (res.rho - res.rho.adjoint()).cwiseAbs().maxCoeff();
  res.trace_error = std::abs(res.rho.trace().real() - 1.0);
  res.flagged = res.trace_error > 0.02 || res.hermiticity_error > 1e-9;
  res.simulated = bell_block(sys, run({}));

  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      std::string& s = res.provenance[i][j];
      const int lo = std::min(i, j), hi = std::max(i, j);
      if (i == j) {
        s = probes[0].note;
      } else if ((lo == 0 && hi == 3) || (lo == 1 && hi == 2)) {
        const std::string swap = lo == 0 ? "pi pulse on 2-4 moves level 4 onto 2" : "pi pulse on 1-3 moves level 3 onto 1";
        s = swap + ", then pi/2 probes on 1-2 at phases 0 and pi/2";
      } else {
        s = "pi/2 probes on " + lvl(lo, hi) + " at phases 0 and pi/2";
      }
    }
  }
  return res;
}

}  // namespace nvsim
