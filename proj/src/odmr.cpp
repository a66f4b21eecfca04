#include "nvsim/odmr.hpp"

#include "nvsim/error.hpp"
#include "nvsim/units.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace nvsim {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

double lineshape(Lineshape shape, double detuning, double fwhm) {
  if (shape == Lineshape::Lorentzian) {
    const double hw = 0.5 * fwhm;
    return hw * hw / (detuning * detuning + hw * hw);
  }
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  return std::exp(-0.5 * detuning * detuning / (sigma * sigma));
}

}  // namespace

std::vector<OdmrLine> odmr_lines(const SpinHamiltonianParams& params, const SelectionRule& rule,
                                 double merge_tolerance_mhz) {
  const auto table = transition_table(ground_hamiltonian(params), ground_basis(params), rule);
  std::vector<OdmrLine> lines;
  double weight_sum = 0.0;
  for (const auto& t : table) {
    if (!lines.empty() && t.freq_mhz - lines.back().freq_mhz <= merge_tolerance_mhz) {
      auto& l = lines.back();
      const double w = weight_sum + t.strength;
      l.freq_mhz = (l.freq_mhz * weight_sum + t.freq_mhz * t.strength) / w;
      weight_sum = w;
      l.relative_strength = w;
    } else {
      lines.push_back({t.freq_mhz, t.strength});
      weight_sum = t.strength;
    }
  }
  double top = 0.0;
  for (const auto& l : lines) top = std::max(top, l.relative_strength);
  for (auto& l : lines) l.relative_strength /= top;
  return lines;
}

Spectrum cw_odmr_spectrum(const SpinHamiltonianParams& params, const PhotophysicsRates& rates,
                          const Sweep& mw_range, double linewidth_mhz, double contrast,
                          Lineshape shape) {
  require(linewidth_mhz > 0.0, "cw_odmr_spectrum: linewidth must be > 0");
  require(contrast > 0.0 && contrast < 1.0, "cw_odmr_spectrum: contrast must be in (0,1)");
  rates.validate();
  const auto lines = odmr_lines(params);

  Spectrum s;
  s.axis = mw_range.values();
  s.values.assign(s.axis.size(), 1.0);
  for (std::size_t i = 0; i < s.axis.size(); ++i) {
    for (const auto& l : lines) {
      s.values[i] -= contrast * l.relative_strength *
                     lineshape(shape, s.axis[i] - l.freq_mhz, linewidth_mhz);
    }
  }
  s.metadata = {{"experiment", "cw-odmr"},
                {"lineshape", shape == Lineshape::Lorentzian ? "lorentzian" : "gaussian"},
                {"linewidth_mhz", num(linewidth_mhz)},
                {"contrast", num(contrast)},
                {"lines", std::to_string(lines.size())}};
  for (const auto& l : lines) {
    s.metadata.emplace_back("line_mhz", num(l.freq_mhz) + " (rel. strength " +
                                            num(l.relative_strength) + ")");
  }
  return s;
}

double contrast_from_rates(const PhotophysicsRates& rates, double pump_rate) {
  const RateMatrix m0 = optical_rate_matrix(rates, pump_rate);
  RateMatrix m1 = m0;
  // Strong MW mixing of the ground 0 <-> +1 and 0 <-> -1 populations.
  const double mix = 1e3 * std::max({rates.a_rad, pump_rate, rates.k_s_xy});
  for (int side : {kGroundPlus, kGroundMinus}) {
    m1(side, kGroundZero) += mix;
    m1(kGroundZero, kGroundZero) -= mix;
    m1(kGroundZero, side) += mix;
    m1(side, side) -= mix;
  }
  const double f0 = emitted_photon_flux(rates, steady_state(m0));
  const double f1 = emitted_photon_flux(rates, steady_state(m1));
  require(f0 > 0.0, "contrast_from_rates: no fluorescence at this pump rate");
  return 1.0 - f1 / f0;
}

double lifetime_limited_fwhm_mhz(double lifetime_ns) {
  require(lifetime_ns > 0.0, "lifetime must be > 0");
  return units::hz_to_mhz(1.0 / (units::kTwoPi * units::ns(lifetime_ns)));
}

Spectrum excitation_line(const PhotophysicsRates& rates, double lifetime_ns,
                         double extra_dephasing_mhz, const Sweep& detuning_range) {
  require(extra_dephasing_mhz >= 0.0, "excitation_line: extra dephasing must be >= 0");
  const double fwhm = lifetime_limited_fwhm_mhz(lifetime_ns) + extra_dephasing_mhz;

  Spectrum s;
  s.axis_label = "detuning_mhz";
  s.value_label = "fluorescence";
  s.axis = detuning_range.values();
  s.values.reserve(s.axis.size());
  for (double x : s.axis) s.values.push_back(lineshape(Lineshape::Lorentzian, x, fwhm));

  s.metadata = {{"experiment", "excitation-line"},
                {"lifetime_ns", num(lifetime_ns)},
                {"fwhm_mhz", num(fwhm)}};
  if (rates.r_slr > 0.0) {
    // The m_s = +-1 line is shelved through its large ISC rate.
    const double bright = saturated_intensity(rates, rates.k_s_z).emitted;
    const double dark = saturated_intensity(rates, rates.k_s_xy).emitted;
    s.metadata.emplace_back("suppressed_line_ratio", num(dark / bright));
  }
  return s;
}

}  // namespace nvsim
