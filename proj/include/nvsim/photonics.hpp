#pragma once

#include "nvsim/data.hpp"
#include "nvsim/qops.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace nvsim {

/// Three-level emitter (ground, excited, shelving state).
struct EmitterModel {
  std::string name = "emitter";
  double lifetime_ns = 13.0;
  double quantum_yield = 0.7;
  double isc_rate = 0.0;  // excited -> shelf, 1/s
  double shelf_lifetime_ns = 300.0;
  double zpl_wavelength_nm = 637.0;
  double zpl_width_nm = 1.0;
  double debye_waller = 0.04;

  static EmitterModel nv();
  static EmitterModel ne8();
  void validate() const;
};

/// g2(tau) from the rate equations: excited population after an emission
/// (start in the ground state) over its steady-state value. Axis is the delay
/// in ns and may include negative delays (g2 is symmetric).
Spectrum g2_curve(const EmitterModel& m, double pump_rate, const Sweep& tau_ns);

/// Microwave-domain lambda system: probe on |1>-|2>, coupling on |3>-|2>.
struct LambdaSystem {
  std::array<double, 3> energies_mhz{6.0, 2803.0, 0.0};  // |1>, |2>, |3>
  double coupling_freq_mhz = 2803.0;
  double omega_c_mhz = 1.0;
  double omega_p_mhz = 0.05;
  double ground_dephasing = M_PI * 1e6;  // 1/s, decay rate of the 1-3 coherence
  double excited_decay = 3e7;            // 1/s, |2> -> |1>, |3> (split evenly)
  double ground_relaxation = 1e3;        // 1/s, |1> <-> |3> population exchange

  double splitting_mhz() const { return energies_mhz[0] - energies_mhz[2]; }
  /// Probe frequency of two-photon resonance.
  double two_photon_resonance_mhz() const { return coupling_freq_mhz - splitting_mhz(); }
  void validate() const;
};

enum class EitPresentation { Fluorescence, Absorption };

/// Steady state versus probe frequency. Fluorescence presentation reports
/// 1 - rho_22 (ODMR-style, EIT shows as an increase); absorption reports the
/// probe absorption rate 2 Omega_p Im rho_12 in 1/s (EIT shows as a dip).
Spectrum eit_probe_spectrum(const LambdaSystem& sys, const Sweep& probe_mhz,
                            EitPresentation presentation = EitPresentation::Fluorescence);

/// Hamiltonian (rad/s) in the frame rotating with both fields.
Operator lambda_hamiltonian(const LambdaSystem& sys, double probe_mhz);
std::vector<CollapseChannel> lambda_channels(const LambdaSystem& sys);

struct DressedStates {
  Eigen::Vector3cd a, b;  // in the (|1>, |2>, |3>) basis
  double mixing_angle = 0.0;
};

/// Eigenvectors of the coupling-dressed |2>, |3> block; (|3> +- |2>)/sqrt2 on resonance.
DressedStates dressed_states(const LambdaSystem& sys);

struct PolaritonState {
  double theta = 0.0;
  Complex photon_amplitude{1.0, 0.0};
  Complex spin_amplitude{0.0, 0.0};
  double g = 0.0;          // 1/s
  double n_photons = 1.0;  // N
  double omega_mhz = 0.0;  // control Rabi frequency

  double photon_fraction() const { return std::norm(photon_amplitude); }
  double spin_fraction() const { return std::norm(spin_amplitude); }
};

/// Dark polariton: cos = Omega / sqrt(Omega^2 + g^2 N), sin = g sqrt(N) / sqrt(...),
/// with Omega converted to rad/s.
PolaritonState polariton(double omega_mhz, double g, double n_photons);

struct StoragePoint {
  double t = 0.0;  // s
  double omega_mhz = 0.0;
  double theta = 0.0;  // mixing angle of the instantaneous dark state
  double photon_fraction = 0.0;
  double excited_fraction = 0.0;
  double spin_fraction = 0.0;
  double norm = 0.0;
};

/// Mode amplitudes (photon, polarization, spin) with the sampled trajectory.
struct SweepResult {
  std::vector<StoragePoint> trajectory;
  std::array<Complex, 3> modes{};
};

/// Single-excitation photon / polarization / spin modes driven by a control
/// ramp (MHz, sampled evenly over the duration, linear in between). A zero
/// duration is an instantaneous quench.
SweepResult run_sweep(const std::array<Complex, 3>& modes, double g, double n_photons,
                      const std::vector<double>& ramp_mhz, double duration_s);

/// Storage: ramp nonincreasing and ending at 0.
SweepResult storage_sweep(const PolaritonState& initial, const std::vector<double>& ramp_mhz,
                          double duration_s);
/// Retrieval: ramp nondecreasing and starting at 0.
SweepResult retrieval_sweep(const std::array<Complex, 3>& modes, double g, double n_photons,
                            const std::vector<double>& ramp_mhz, double duration_s);

/// c / v_gr = n + omega dn/ddelta; the spatial compression of a stored pulse.
double group_velocity_compression(double n, double dn_ddelta, double omega);

}  // namespace nvsim
