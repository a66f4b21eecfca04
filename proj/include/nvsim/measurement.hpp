#pragma once

#include "nvsim/data.hpp"
#include "nvsim/nv_model.hpp"
#include "nvsim/qops.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace nvsim {

/// Flip rates (1/s) of the bright (m_s = 0) / dark (m_s = +-1) telegraph.
struct TelegraphRates {
  double bright_to_dark = 0.0;
  double dark_to_bright = 0.0;

  /// Long-time fraction of time spent bright.
  double stationary_bright() const;
};

/// Spin-lattice flips out of m_s = 0 reach either of two sublevels; the
/// optically induced flip rate adds symmetrically.
TelegraphRates telegraph_rates(const PhotophysicsRates& rates, double optical_flip_rate);

/// Switching times of a two-state Markov process on [0, duration].
struct TelegraphPath {
  bool start_bright = true;
  std::vector<double> switch_times;
  double duration = 0.0;

  bool bright_at(double t) const;
  /// Time spent bright inside [t0, t1].
  double bright_time(double t0, double t1) const;
  /// Completed dwell times, split by state; the censored last dwell is dropped.
  void dwells(std::vector<double>& bright, std::vector<double>& dark) const;
};

TelegraphPath simulate_telegraph(const TelegraphRates& flips, double duration, std::uint64_t seed,
                                 bool start_bright = true);

/// Binned photon counts of a blinking defect. Columns "counts" (per bin) and
/// "bright_fraction" (time share of the bright state inside each bin).
TimeTrace jump_trace(const TelegraphRates& flips, double bright_cps, double dark_cps, double duration,
                     double bin, std::uint64_t seed);
TimeTrace jump_trace(const PhotophysicsRates& rates, double bright_cps, double dark_cps, double duration,
                     double bin, std::uint64_t seed, double optical_flip_rate = 0.0);

struct Histogram {
  std::vector<double> bin_edges;  // counts; frequencies[k] covers [edges[k], edges[k+1])
  std::vector<long> frequencies;
  double acquisition_bin = 0.0;  // s
  std::uint64_t seed = 0;
  // Expected counts per window of the two states, when known.
  std::optional<double> reference_bright;
  std::optional<double> reference_dark;

  long total() const;
};

/// Single-shot readout model: every window starts in m_s = 0 and flips to the
/// dark state at most once, with probability flip_probability per window.
struct ReadoutModel {
  double bright_cps = 15000.0;
  double dark_cps = 1000.0;
  double window = 5e-3;  // s
  double flip_probability = 0.0;

  void validate() const;
};

/// Counting histogram of n_windows readouts with unit-width count bins.
Histogram readout_histogram(const ReadoutModel& model, long n_windows, std::uint64_t seed);

enum class ComponentModel { Poisson, Gaussian };

struct ReadoutFidelity {
  double fidelity = 0.0;   // share of windows assigned to the prepared (bright) state
  double threshold = 0.0;  // counts >= threshold are assigned bright
  double on_mean = 0.0, off_mean = 0.0;
  double on_weight = 0.0, off_weight = 0.0;
  /// Height of the off component at the crossing over the on-peak height.
  double wing_ratio = 0.0;
  /// Peak-ratio figure on_weight / (on_weight + off_weight).
  double peak_ratio = 0.0;
  bool converged = false;
  bool fallback = false;  // raw threshold used instead of the fit
};

/// Two-component mixture fit (EM) and optimal-threshold assignment.
ReadoutFidelity readout_fidelity(const Histogram& h, ComponentModel model = ComponentModel::Poisson);

/// Flip probability at which the fitted fidelity of a fixed-seed histogram
/// reaches target_fidelity (bisection over [0, 1/2]).
double calibrate_flip_probability(const ReadoutModel& base, double target_fidelity, long n_windows,
                                  std::uint64_t seed);

struct ZenoParams {
  double lambda = 1.0;      // 1/s
  double total_time = 1.0;  // s
  long n_measurements = 1;

  double p_step() const;
  void validate() const;
};

/// 1/2 (1 + (1 - 2p)^N), p = (lambda T / N)^2.
double zeno_survival_discrete(const ZenoParams& z);
/// 1/2 (1 + exp(-2 (lambda T)^2 / N)).
double zeno_survival_continuous(const ZenoParams& z);

struct DampingPoint {
  double pump_rate = 0.0;     // 1/s
  double damping_rate = 0.0;  // 1/s, envelope decay of the Rabi oscillation
  bool flagged = false;       // fit failed
};

struct DampingSettings {
  double rabi_mhz = 140.0;
  double intrinsic_dephasing = 1e4;  // 1/s, envelope rate without laser
  int samples_per_period = 16;
};

/// Rabi oscillation between m_s = 0 and -1 under simultaneous laser pumping:
/// five-level Lindblad model (two ground, two excited, singlet). The optical
/// cycle conserves m_s; damping comes from the spin-selective intersystem
/// crossing, so it grows with the pump and saturates with the excited-state
/// population. The envelope rate is fitted for every pump rate.
std::vector<DampingPoint> rabi_damping_vs_power(const std::vector<double>& pump_rates,
                                                const PhotophysicsRates& rates,
                                                const DampingSettings& settings = {});

/// Same model as a Lindblad generator, exposed for the eigenvalue cross-check.
struct DampingModel {
  Operator h;
  std::vector<CollapseChannel> channels;
};
DampingModel rabi_damping_model(double pump_rate, const PhotophysicsRates& rates,
                                const DampingSettings& settings);

}  // namespace nvsim
