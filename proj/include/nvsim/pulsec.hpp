#pragma once

#include "nvsim/data.hpp"
#include "nvsim/nv_model.hpp"
#include "nvsim/qops.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nvsim {

enum class EventKind { MwPulse, RfPulse, Delay, LaserInit, LaserReadout };

/// One step of a pulse program. Levels in `target` are 0-based indices into
/// ground_basis(params); an eigenstate is addressed through the basis level
/// that dominates it.
struct PulseEvent {
  EventKind kind = EventKind::Delay;
  std::optional<double> frequency_mhz;
  double rabi_mhz = 0.0;
  double phase = 0.0;       // rad, [0, 2pi)
  double duration_s = 0.0;  // > 0
  std::optional<double> angle;  // rad, when the pulse was given as angle=
  std::optional<std::pair<int, int>> target;
  int line = 0;  // source line, 0 when built programmatically

  bool is_pulse() const { return kind == EventKind::MwPulse || kind == EventKind::RfPulse; }
  /// Nominal rotation angle 2 pi rabi duration.
  double rotation_angle() const;
};

struct PulseSequence {
  std::string name;
  std::vector<PulseEvent> events;

  /// Non-empty, positive durations, at most one trailing readout.
  void validate() const;
};

/// Parses the pulse DSL. Throws ParseError with the 1-based line and column.
PulseSequence parse_sequence(const std::string& text, const std::string& name = "");
/// Prints a sequence back to DSL source; parse(print(s)) reproduces s.
std::string print_sequence(const PulseSequence& seq);

/// Rotation pulse of angle theta about (cos phase, sin phase) on levels a-b.
PulseEvent make_pulse(EventKind kind, int level_a, int level_b, double angle, double phase,
                      double rabi_mhz);
PulseEvent make_delay(double seconds);

/// Reverses the order and inverts every rotation (phase + pi).
PulseSequence invert_sequence(const PulseSequence& seq);

/// Spin Hamiltonian with its eigenbasis matched one-to-one onto the product basis.
struct SpinSystem {
  SpinHamiltonianParams params;
  LevelBasis basis;
  Operator h;  // rad/s
  EigenSystem eig;
  std::vector<int> state_of_level;  // eigenstate index for each basis level
  std::vector<int> level_of_state;

  static SpinSystem build(const SpinHamiltonianParams& params);
  int dim() const { return basis.dim(); }
  /// |E_b - E_a| / 2 pi, MHz, for basis levels a and b.
  double transition_mhz(int level_a, int level_b) const;
  /// Eigenstate dominated by basis level `level`, as a product-basis vector.
  StateVector eigenstate(int level) const;
  /// Density matrix rotated into the eigenbasis, rows ordered like the basis levels.
  Operator to_level_frame(const Operator& rho) const;
  Operator from_level_frame(const Operator& rho_levels) const;
};

enum class Frame { Rotating, Lab };

struct SimulationResult {
  DensityMatrix final_state;
  TimeTrace trace;  // level populations + "ms0" after every event
  std::vector<std::string> warnings;
};

struct OpenSystemOptions {
  /// Electron coherence decay rate (1/s) applied during pulses and delays.
  double electron_dephasing = 0.0;
};

/// Coherent evolution of a pulse program. In the rotating frame every pulse
/// acts on its two-level eigen-subspace; delays apply exp(-iHt). The lab frame
/// integrates the full time-dependent Hamiltonian.
SimulationResult simulate_sequence(const PulseSequence& seq, const SpinHamiltonianParams& params,
                                   const DensityMatrix& initial, Frame frame = Frame::Rotating);

/// Rotating-frame simulation with finite-duration pulses and electron dephasing.
SimulationResult simulate_sequence_open(const PulseSequence& seq, const SpinHamiltonianParams& params,
                                        const DensityMatrix& initial,
                                        const OpenSystemOptions& options);

/// Two-level propagator exp(-i (detuning/2 (P_a - P_b) + pi rabi (cos phi X + sin phi Y)) t)
/// in the (a, b) ordering; detuning in rad/s, rabi in Hz.
Eigen::Matrix2cd subspace_propagator(double detuning, double rabi_hz, double phase, double t);

/// Effective Rabi frequency (MHz) of levels a-b for a linearly polarized drive
/// of amplitude b1_mt along x: |<a|gamma_e Sx - sum gamma_n Ix|b>| * b1. The
/// nuclear contribution picks up electron admixture (hyperfine enhancement).
double effective_rabi_mhz(const SpinSystem& system, int level_a, int level_b, double b1_mt);

/// Resonant Rabi nutation of the m_s = 0 <-> -1 transition with an exponential
/// envelope of rate dephasing_rate. Columns "p0" (population of m_s = 0).
TimeTrace rabi_trace(const SpinHamiltonianParams& params, double rabi_mhz, double t_max_s,
                     int n_points, double dephasing_rate);

struct EchoResult {
  TimeTrace trace;  // column "echo", normalized to 1 at tau = 0
  double modulation_depth = 0.0;
  std::vector<std::string> warnings;
};

/// Two-pulse Hahn echo with ideal hard pulses on the electron 0 <-> -1
/// transition; taus in seconds.
EchoResult hahn_echo_trace(const SpinHamiltonianParams& params, const std::vector<double>& taus);

/// Nuclear splittings (MHz) inside the m_s = 0 and m_s = -1 manifolds.
struct ManifoldSplittings {
  std::vector<double> ms0;
  std::vector<double> ms_minus1;
};
ManifoldSplittings manifold_splittings(const SpinHamiltonianParams& params);

/// Dominant frequencies (MHz) of a uniformly sampled signal, by zero-padded FFT
/// with parabolic peak interpolation; strongest first.
std::vector<double> spectral_peaks(const std::vector<double>& signal, double sample_interval_s,
                                   int max_peaks, double min_relative_height = 0.05);

// Bell-state preparation on the electron (m_s = 0 "up", -1 "down") x 13C subspace.
enum class BellState { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

std::string to_string(BellState b);
BellState bell_state_from_string(const std::string& s);

/// Electron + one 13C with a small axial field so the four levels are non-degenerate.
SpinHamiltonianParams bell_params();

/// Pseudospin level k (1..4: up-up, up-down, down-up, down-down) as a
/// ground_basis index of bell_params().
int bell_level(int k);

PulseSequence prepare_bell(BellState which);
/// Target vector in the 4-level pseudospin basis.
Eigen::Vector4cd bell_vector(BellState which);
/// Pseudospin state |3> (down-up), the assumed starting point.
DensityMatrix bell_initial_state(const SpinSystem& system);
/// 4x4 block of rho in the pseudospin eigenbasis.
Eigen::Matrix4cd bell_block(const SpinSystem& system, const DensityMatrix& rho);

struct TomographyNoise {
  double electron_dephasing = 0.0;  // 1/s
};

struct TomographyResult {
  Eigen::Matrix4cd rho;
  std::array<std::array<std::string, 4>, 4> provenance;
  double hermiticity_error = 0.0;
  double trace_error = 0.0;
  bool flagged = false;  // reconstruction outside tolerance
  Eigen::Matrix4cd simulated;  // directly simulated block, for comparison
};

/// Step-by-step tomography of the 4x4 pseudospin density matrix: populations
/// from ODMR signals, first-order coherences from pi/2 probes at phases 0 and
/// pi/2, second-order coherences swapped onto allowed transitions by a pi pulse.
TomographyResult tomography_reconstruct(const PulseSequence& prep,
                                        const SpinHamiltonianParams& params,
                                        const std::optional<TomographyNoise>& noise = std::nullopt);

double bell_fidelity(const Eigen::Matrix4cd& rho, BellState which);

}  // namespace nvsim
