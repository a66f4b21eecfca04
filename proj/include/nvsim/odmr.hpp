#pragma once

#include "nvsim/data.hpp"
#include "nvsim/nv_model.hpp"

#include <vector>

namespace nvsim {

enum class Lineshape { Lorentzian, Gaussian };

struct OdmrLine {
  double freq_mhz = 0.0;
  double relative_strength = 0.0;  // strongest line = 1
};

/// ESR lines of the spin Hamiltonian with degenerate transitions merged.
std::vector<OdmrLine> odmr_lines(const SpinHamiltonianParams& params,
                                 const SelectionRule& rule = {},
                                 double merge_tolerance_mhz = 1e-6);

/// CW ODMR: baseline 1 with a dip of depth contrast * relative_strength at
/// every ESR line. linewidth is the FWHM in MHz.
Spectrum cw_odmr_spectrum(const SpinHamiltonianParams& params, const PhotophysicsRates& rates,
                          const Sweep& mw_range, double linewidth_mhz, double contrast = 0.15,
                          Lineshape shape = Lineshape::Lorentzian);

/// Fluorescence contrast between an unperturbed and a fully MW-saturated
/// 0 <-> +-1 ground population, from the seven-level steady state.
double contrast_from_rates(const PhotophysicsRates& rates, double pump_rate);

/// Lifetime-limited FWHM 1/(2 pi tau), in MHz.
double lifetime_limited_fwhm_mhz(double lifetime_ns);

/// Low-temperature fluorescence-excitation line: a single Lorentzian peak of
/// unit height centred at zero detuning, FWHM = 1/(2 pi lifetime) + extra_dephasing.
Spectrum excitation_line(const PhotophysicsRates& rates, double lifetime_ns,
                         double extra_dephasing_mhz, const Sweep& detuning_range);

}  // namespace nvsim
