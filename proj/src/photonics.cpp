#include "nvsim/photonics.hpp"

#include "nvsim/error.hpp"
#include "nvsim/nv_model.hpp"
#include "nvsim/units.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nvsim {

using namespace units;

EmitterModel EmitterModel::nv() {
  EmitterModel m;
  m.name = "nv";
  m.lifetime_ns = 13.0;
  m.quantum_yield = 0.7;
  m.isc_rate = 1e6;
  m.shelf_lifetime_ns = 300.0;
  m.zpl_wavelength_nm = 637.0;
  m.zpl_width_nm = 1.0;
  m.debye_waller = 0.04;
  return m;
}

EmitterModel EmitterModel::ne8() {
  EmitterModel m;
  m.name = "ne8";
  m.lifetime_ns = 5.0;
  m.quantum_yield = 0.7;
  m.isc_rate = 1.5e7;  // below the 20 MHz bound
  m.shelf_lifetime_ns = 200.0;
  m.zpl_wavelength_nm = 802.0;
  m.zpl_width_nm = 1.5;
  m.debye_waller = 0.7;
  return m;
}

void EmitterModel::validate() const {
  require(lifetime_ns > 0.0, "emitter lifetime must be > 0");
  require(quantum_yield >= 0.0 && quantum_yield <= 1.0, "quantum yield must lie in [0, 1]");
  require(isc_rate >= 0.0, "isc rate must be >= 0");
  require(isc_rate == 0.0 || shelf_lifetime_ns > 0.0, "shelf lifetime must be > 0 when isc rate > 0");
  require(debye_waller >= 0.0 && debye_waller <= 1.0, "Debye-Waller factor must lie in [0, 1]");
  require(zpl_wavelength_nm > 0.0 && zpl_width_nm >= 0.0, "ZPL wavelength must be > 0, width >= 0");
}

Spectrum g2_curve(const EmitterModel& m, double pump_rate, const Sweep& tau_ns) {
  m.validate();
  require(pump_rate > 0.0, "pump rate must be > 0");
  require(tau_ns.points >= 2 && tau_ns.stop > tau_ns.start, "delay sweep needs >= 2 increasing points");
  require(tau_ns.start <= 0.0 && tau_ns.stop >= 0.0, "delay range must span 0");
  // 0: ground, 1: excited, 2: shelf.
  const double k_e = 1.0 / (m.lifetime_ns * 1e-9);
  const bool shelf = m.isc_rate > 0.0;
  const int n = shelf ? 3 : 2;
  RateMatrix r = RateMatrix::Zero(n, n);
  r(1, 0) = pump_rate;
  r(0, 1) = k_e;
  if (shelf) {
    r(2, 1) = m.isc_rate;
    r(0, 2) = 1.0 / (m.shelf_lifetime_ns * 1e-9);
  }
  for (int j = 0; j < n; ++j) r(j, j) = -(r.col(j).sum() - r(j, j));
  const Eigen::VectorXd ss = steady_state(r);

  const std::vector<double> axis = tau_ns.values();
  // Integrate once over increasing |tau| and read off every requested delay.
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t k = 0; k < axis.size(); ++k) order.emplace_back(std::abs(axis[k]), k);
  std::sort(order.begin(), order.end());
  const double fastest = r.diagonal().cwiseAbs().maxCoeff();
  const double dt_max = 0.05 / fastest;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  p(0) = 1.0;
  double t = 0.0;
  std::vector<double> values(axis.size());
  for (const auto& [tau, idx] : order) {
    const double target = tau * 1e-9;
    if (target > t) {
      const long steps = std::max<long>(1, static_cast<long>(std::ceil((target - t) / dt_max)));
      p = evolve_populations(r, p, target - t, steps);
      t = target;
    }
    values[idx] = p(1) / ss(1);
  }
  Spectrum s;
  s.axis = axis;
  s.values = values;
  s.axis_label = "delay_ns";
  s.value_label = "g2";
  std::ostringstream os;
  os << pump_rate;
  s.metadata = {{"experiment", "g2"}, {"emitter", m.name}, {"pump_rate", os.str()}};
  return s;
}

void LambdaSystem::validate() const {
  require(omega_c_mhz >= 0.0 && omega_p_mhz >= 0.0, "Rabi frequencies must be >= 0");
  require(ground_dephasing >= 0.0, "ground dephasing must be >= 0");
  require(excited_decay > 0.0, "excited decay must be > 0");
  require(ground_relaxation > 0.0, "ground relaxation must be > 0");
  require(energies_mhz[1] > energies_mhz[0] && energies_mhz[1] > energies_mhz[2],
          "|2> must lie above both ground levels");
}

Operator lambda_hamiltonian(const LambdaSystem& sys, double probe_mhz) {
  const double dp = mhz_to_rad_per_s(probe_mhz - (sys.energies_mhz[1] - sys.energies_mhz[0]));
  const double dc = mhz_to_rad_per_s(sys.coupling_freq_mhz - (sys.energies_mhz[1] - sys.energies_mhz[2]));
  Operator h = Operator::Zero(3, 3);
  h(1, 1) = -dp;
  h(2, 2) = -(dp - dc);
  h(0, 1) = h(1, 0) = M_PI * sys.omega_p_mhz * 1e6;
  h(2, 1) = h(1, 2) = M_PI * sys.omega_c_mhz * 1e6;
  return h;
}

std::vector<CollapseChannel> lambda_channels(const LambdaSystem& sys) {
  auto jump = [](int to, int from) {
    Operator l = Operator::Zero(3, 3);
    l(to, from) = 1.0;
    return l;
  };
  return {
      {jump(0, 1), 0.5 * sys.excited_decay},
      {jump(2, 1), 0.5 * sys.excited_decay},
      // A projector at rate 2g damps the 1-3 coherence at g.
      {jump(2, 2), 2.0 * sys.ground_dephasing},
      {jump(0, 2), sys.ground_relaxation},
      {jump(2, 0), sys.ground_relaxation},
  };
}

Spectrum eit_probe_spectrum(const LambdaSystem& sys, const Sweep& probe_mhz, EitPresentation presentation) {
  sys.validate();
  require(probe_mhz.points >= 2 && probe_mhz.stop > probe_mhz.start, "probe sweep needs >= 2 increasing points");
  const auto channels = lambda_channels(sys);
  Spectrum s;
  s.axis = probe_mhz.values();
  s.axis_label = "probe_mhz";
  for (double f : s.axis) {
    const DensityMatrix rho = lindblad_steady_state(lambda_hamiltonian(sys, f), channels);
    if (presentation == EitPresentation::Fluorescence) {
      s.values.push_back(1.0 - rho.population(1));
    } else {
      // Work done by the probe: d(rho_22)/dt from the probe term alone.
      s.values.push_back(2.0 * M_PI * sys.omega_p_mhz * 1e6 * rho.matrix()(0, 1).imag());
    }
  }
  s.value_label = presentation == EitPresentation::Fluorescence ? "fluorescence" : "probe_absorption_rate";
  std::ostringstream os;
  os << sys.two_photon_resonance_mhz();
  s.metadata = {{"experiment", "eit"}, {"two_photon_resonance_mhz", os.str()}};
  if (sys.omega_c_mhz == 0.0) s.metadata.emplace_back("note", "omega_c = 0: single resonance, no EIT");
  return s;
}

DressedStates dressed_states(const LambdaSystem& sys) {
  const double delta = sys.coupling_freq_mhz - (sys.energies_mhz[1] - sys.energies_mhz[2]);
  DressedStates d;
  d.a.setZero();
  d.b.setZero();
  double c, s;
  if (delta == 0.0) {
    c = s = M_SQRT1_2;
    d.mixing_angle = M_PI / 4.0;
  } else {
    // Block (|3>, |2>): [[delta/2, Omega/2], [Omega/2, -delta/2]] in MHz.
    d.mixing_angle = 0.5 * std::atan2(sys.omega_c_mhz, delta);
    c = std::cos(d.mixing_angle);
    s = std::sin(d.mixing_angle);
  }
  d.a(2) = c;
  d.a(1) = s;
  d.b(2) = s;
  d.b(1) = -c;
  return d;
}

PolaritonState polariton(double omega_mhz, double g, double n_photons) {
  require(omega_mhz >= 0.0 && g >= 0.0 && n_photons >= 0.0, "polariton inputs must be >= 0");
  const double omega = mhz_to_rad_per_s(omega_mhz);
  const double gn = g * std::sqrt(n_photons);
  require(omega > 0.0 || gn > 0.0, "mixing angle undefined for Omega = g sqrt(N) = 0");
  const double r = std::hypot(omega, gn);
  PolaritonState p;
  p.theta = std::atan2(gn, omega);
  p.photon_amplitude = omega / r;
  p.spin_amplitude = gn / r;
  p.g = g;
  p.n_photons = n_photons;
  p.omega_mhz = omega_mhz;
  return p;
}

namespace {

// Photon E, polarization P, spin S. The dark state is (Omega E + g sqrt(N) S) / r.
Operator polariton_hamiltonian(double gn, double omega) {
  Operator h = Operator::Zero(3, 3);
  h(0, 1) = h(1, 0) = gn;
  h(1, 2) = h(2, 1) = -omega;
  return h;
}

StoragePoint sample(double t, double omega_mhz, double gn, const Eigen::Vector3cd& v) {
  StoragePoint p;
  p.t = t;
  p.omega_mhz = omega_mhz;
  p.theta = std::atan2(gn, mhz_to_rad_per_s(omega_mhz));
  p.photon_fraction = std::norm(v(0));
  p.excited_fraction = std::norm(v(1));
  p.spin_fraction = std::norm(v(2));
  p.norm = p.photon_fraction + p.excited_fraction + p.spin_fraction;
  return p;
}

}  // namespace

SweepResult run_sweep(const std::array<Complex, 3>& modes, double g, double n_photons,
                      const std::vector<double>& ramp_mhz, double duration_s) {
  require(ramp_mhz.size() >= 2, "ramp needs at least two samples");
  require(duration_s >= 0.0, "sweep duration must be >= 0");
  for (double w : ramp_mhz) require(w >= 0.0, "control Rabi frequency must be >= 0");
  require(g >= 0.0 && n_photons >= 0.0, "g and N must be >= 0");
  const double gn = g * std::sqrt(n_photons);
  Eigen::Vector3cd v(modes[0], modes[1], modes[2]);
  SweepResult out;
  const std::size_t steps = ramp_mhz.size() - 1;
  const double dt = duration_s / static_cast<double>(steps);
  out.trajectory.push_back(sample(0.0, ramp_mhz[0], gn, v));
  for (std::size_t k = 0; k < steps; ++k) {
    if (dt > 0.0) {
      // Linear interpolation inside the segment, midpoint exponentials with
      // a phase of at most 0.05 rad per substep.
      const double w0 = ramp_mhz[k], w1 = ramp_mhz[k + 1];
      const double norm = std::hypot(gn, mhz_to_rad_per_s(std::max(w0, w1)));
      const long sub = std::max<long>(1, static_cast<long>(std::ceil(norm * dt / 0.05)));
      const double h = dt / static_cast<double>(sub);
      for (long j = 0; j < sub; ++j) {
        const double w = w0 + (w1 - w0) * (static_cast<double>(j) + 0.5) / static_cast<double>(sub);
        v = unitary_propagator(polariton_hamiltonian(gn, mhz_to_rad_per_s(w)), h) * v;
      }
    }
    out.trajectory.push_back(sample(dt * static_cast<double>(k + 1), ramp_mhz[k + 1], gn, v));
  }
  out.modes = {v(0), v(1), v(2)};
  return out;
}

SweepResult storage_sweep(const PolaritonState& initial, const std::vector<double>& ramp_mhz, double duration_s) {
  require(ramp_mhz.size() >= 2, "ramp needs at least two samples");
  for (std::size_t k = 1; k < ramp_mhz.size(); ++k)
    require(ramp_mhz[k] <= ramp_mhz[k - 1], "storage ramp must be monotone nonincreasing");
  require(ramp_mhz.back() == 0.0, "storage ramp must end at 0");
  return run_sweep({initial.photon_amplitude, Complex(0.0), initial.spin_amplitude}, initial.g,
                   initial.n_photons, ramp_mhz, duration_s);
}

SweepResult retrieval_sweep(const std::array<Complex, 3>& modes, double g, double n_photons,
                            const std::vector<double>& ramp_mhz, double duration_s) {
  require(ramp_mhz.size() >= 2, "ramp needs at least two samples");
  for (std::size_t k = 1; k < ramp_mhz.size(); ++k)
    require(ramp_mhz[k] >= ramp_mhz[k - 1], "retrieval ramp must be monotone nondecreasing");
  require(ramp_mhz.front() == 0.0, "retrieval ramp must start at 0");
  return run_sweep(modes, g, n_photons, ramp_mhz, duration_s);
}

double group_velocity_compression(double n, double dn_ddelta, double omega) {
  const double r = n + omega * dn_ddelta;
  require(std::isfinite(r) && r > 0.0, "n + omega dn/ddelta must be > 0");
  return r;
}

}  // namespace nvsim
