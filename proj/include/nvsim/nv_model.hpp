#pragma once

#include "nvsim/qops.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace nvsim {

enum class NuclearSpecies { N14, C13 };

std::string to_string(NuclearSpecies s);
NuclearSpecies nuclear_species_from_string(const std::string& s);

struct NucleusSpec {
  NuclearSpecies species = NuclearSpecies::N14;
  double spin = 1.0;          // I, 1 or 1/2
  double a_parallel = 2.0;    // MHz
  double a_perp = 2.0;        // MHz
  double quadrupole_p = 0.0;  // MHz, I = 1 only
  double gamma_n = 0.003077;  // MHz/mT; Zeeman term is -gamma_n B.I

  /// Isotropic 2 MHz coupling, no quadrupole term.
  static NucleusSpec n14();
  /// First-shell 13C; isotropic coupling that reproduces a 126 MHz ODMR
  /// doublet under exact diagonalization at D = 2880 MHz.
  static NucleusSpec c13();
  /// 13C with a given isotropic coupling.
  static NucleusSpec c13_isotropic(double a_mhz);

  int multiplicity() const { return static_cast<int>(2.0 * spin + 1.5); }
  void validate() const;
};

/// Isotropic first-shell 13C coupling used by NucleusSpec::c13().
inline constexpr double kC13DefaultCouplingMHz = 128.9498;

struct SpinHamiltonianParams {
  double d = 2880.0;      // MHz
  double e = 0.0;         // MHz
  double gamma_e = 28.03; // MHz/mT
  std::array<double, 3> b0{0.0, 0.0, 0.0};  // mT, NV frame (z along the NV axis)
  std::vector<NucleusSpec> nuclei;
  bool c3v_symmetry = false;  // when set, E must be zero

  void validate() const;
};

struct PhotophysicsRates {
  double a_rad = 1.0 / 13e-9;  // excited-state total decay, 1/s
  double quantum_yield = 0.7;
  double k_s_xy = 5e7;  // ISC from excited m_s = +-1
  double k_s_z = 5e4;   // ISC from excited m_s = 0
  double k_x = 1e6;     // singlet -> ground m_s = +1
  double k_y = 1e6;     // singlet -> ground m_s = -1
  double k_z = 1e6;     // singlet -> ground m_s = 0
  double r_slr = 1.0;   // ground spin-lattice rate per sublevel pair
  double detection_eff = 1e-3;

  double k_d() const { return k_x + k_y; }
  double k_t() const { return k_d() + k_z; }
  void validate() const;
};

struct BasisLevel {
  std::string label;
  int ms = 0;
  std::vector<double> m_i;  // one entry per nucleus
};

struct LevelBasis {
  std::vector<BasisLevel> levels;
  std::vector<int> factor_dims;  // 3 followed by 2I+1 per nucleus; empty for optical basis

  int dim() const { return static_cast<int>(levels.size()); }
  int index_of(const std::string& label) const;
};

/// |m_s> (x) |m_I,...> with m values descending, electron first.
LevelBasis ground_basis(const SpinHamiltonianParams& params);

struct SpinOperators {
  Operator x, y, z;
};

/// Spin-s matrices in the descending |m> basis (m = s, s-1, ..., -s).
SpinOperators spin_operators(double s);

/// Electron spin component embedded in the full ground space.
SpinOperators electron_operators(const SpinHamiltonianParams& params);
/// Spin of nucleus k embedded in the full ground space.
SpinOperators nuclear_operators(const SpinHamiltonianParams& params, std::size_t k);

/// Ground-state spin Hamiltonian in rad/s:
/// gamma_e B.S + D(Sz^2 - 2/3) + E(Sx^2 - Sy^2)
///   + sum_k [S.A_k.I_k + P_k(Iz^2 - I(I+1)/3) - gamma_n,k B.I_k].
Operator ground_hamiltonian(const SpinHamiltonianParams& params);

struct SelectionRule {
  enum class Kind { All, Esr };
  Kind kind = Kind::Esr;
  /// Transitions weaker than this fraction of the strongest are dropped.
  double min_relative_strength = 0.01;
};

struct Transition {
  double freq_mhz = 0.0;
  double strength = 0.0;  // |<i|S_x|j>|^2 in the eigenbasis
  std::string from_label;
  std::string to_label;
  int from_state = 0;  // eigenstate index, ascending energy
  int to_state = 0;
};

/// Eigenstate label: the basis level with the largest weight.
std::vector<std::string> eigenstate_labels(const EigenSystem& es, const LevelBasis& basis);

std::vector<Transition> transition_table(const Operator& h, const LevelBasis& basis,
                                         const SelectionRule& rule = {});

// Seven-level optical model.
enum OpticalLevel : int {
  kGroundPlus = 0,
  kGroundZero,
  kGroundMinus,
  kExcitedPlus,
  kExcitedZero,
  kExcitedMinus,
  kSinglet,
  kOpticalLevels
};

LevelBasis optical_basis();

/// Which ground sublevels the laser pumps.
struct PumpSelection {
  bool plus = true;
  bool zero = true;
  bool minus = true;
};

using RateMatrix = Eigen::MatrixXd;

/// Column-stochastic generator: dp/dt = M p, M(to, from) is the rate from -> to.
RateMatrix optical_rate_matrix(const PhotophysicsRates& rates, double pump_rate,
                               const PumpSelection& pump = {});

/// Stationary distribution of a rate matrix whose columns sum to zero.
/// Throws NumericalError when the stationary state is not unique.
Eigen::VectorXd steady_state(const RateMatrix& m);

/// Classical RK4 propagation of populations.
Eigen::VectorXd evolve_populations(const RateMatrix& m, const Eigen::VectorXd& p0, double t,
                                   long steps);

/// a_rad * sum of excited populations (all decays, radiative or not).
double excited_decay_flux(const PhotophysicsRates& rates, const Eigen::VectorXd& pops);
/// Photons emitted per second: decay flux times quantum yield.
double emitted_photon_flux(const PhotophysicsRates& rates, const Eigen::VectorXd& pops);

struct SaturatedIntensity {
  double emitted = 0.0;          // A / (4 + (k_s k_D + R) / (R k_T)), photons/s
  double low_t_approx = 0.0;     // R A / k_s
  double low_t_branching = 0.0;  // R A k_T / (k_s k_D)
  double detected = 0.0;         // emitted * quantum_yield * detection_eff
};

/// Saturated single-defect fluorescence under resonant excitation of the
/// spin sublevel whose ISC rate is isc_rate.
SaturatedIntensity saturated_intensity(const PhotophysicsRates& rates, double isc_rate);
/// Same, with the bright m_s = 0 ISC rate.
SaturatedIntensity saturated_intensity(const PhotophysicsRates& rates);

/// Classical pump rate for a laser intensity (kW/cm^2), absorption cross
/// section 1e-16 cm^2.
double pump_rate_from_intensity(double kw_per_cm2, double wavelength_nm = 532.0);

}  // namespace nvsim
