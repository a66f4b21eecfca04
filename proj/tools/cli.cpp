#include "cli.hpp"

#include "CLI11.hpp"
#include "nvsim/error.hpp"
#include "nvsim/measurement.hpp"
#include "nvsim/odmr.hpp"
#include "nvsim/photonics.hpp"
#include "nvsim/pulsec.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef NVSIM_VERSION
#define NVSIM_VERSION "0.0.0"
#endif

namespace nvsim::cli {

namespace fs = std::filesystem;

namespace {

// Flip probability calibrated to a 0.95 fidelity (seed 1, 2e4 windows).
constexpr double kCalibratedFlipProbability = 0.0938;

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

ParamSpec number(std::string name, double def, std::string help, std::optional<double> min = std::nullopt,
                 bool positive = false) {
  return {std::move(name), ParamKind::Number, def, std::move(help), {}, min, positive};
}
ParamSpec positive(std::string name, double def, std::string help) {
  return number(std::move(name), def, std::move(help), std::nullopt, true);
}
ParamSpec nonneg(std::string name, double def, std::string help) {
  return number(std::move(name), def, std::move(help), 0.0);
}
ParamSpec optional_positive(std::string name, std::string help) {
  return {std::move(name), ParamKind::Number, nullptr, std::move(help), {}, std::nullopt, true};
}
ParamSpec integer(std::string name, long def, std::string help, long min) {
  return {std::move(name), ParamKind::Integer, def, std::move(help), {}, static_cast<double>(min), false};
}
ParamSpec text(std::string name, std::string def, std::vector<std::string> choices, std::string help) {
  return {std::move(name), ParamKind::Text, def, std::move(help), std::move(choices), std::nullopt, false};
}
ParamSpec vec3(std::string name, std::array<double, 3> def, std::string help) {
  return {std::move(name), ParamKind::Vec3, json::array({def[0], def[1], def[2]}), std::move(help), {},
          std::nullopt, false};
}
ParamSpec flag(std::string name, bool def, std::string help) {
  return {std::move(name), ParamKind::Flag, def, std::move(help), {}, std::nullopt, false};
}

double num(const ExperimentConfig& c, const char* k) { return c.params.at(k).get<double>(); }
long integer_param(const ExperimentConfig& c, const char* k) { return c.params.at(k).get<long>(); }
std::string str(const ExperimentConfig& c, const char* k) { return c.params.at(k).get<std::string>(); }
std::array<double, 3> vec(const ExperimentConfig& c, const char* k) {
  const json& v = c.params.at(k);
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}
std::optional<double> maybe(const ExperimentConfig& c, const char* k) {
  const json& v = c.params.at(k);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

Metadata header(const Experiment& e, const ExperimentConfig& c) {
  return {{"experiment", e.name}, {"anchor", e.anchor}, {"seed", std::to_string(c.seed)},
          {"version", NVSIM_VERSION}};
}

void set_curve(ExperimentOutput& out, const Experiment& e, const ExperimentConfig& c, Spectrum s) {
  Metadata m = header(e, c);
  for (const auto& [k, v] : s.metadata) m.emplace_back(k == "experiment" ? "model" : k, v);
  s.metadata = m;
  out.csv = to_csv(s);
  out.curve = {{s.axis_label, s.axis}, {s.value_label, s.values}};
}

void set_curve(ExperimentOutput& out, const Experiment& e, const ExperimentConfig& c, const TimeTrace& t,
               const std::string& time_label) {
  out.csv = to_csv(t, header(e, c), time_label);
  out.curve = {{time_label, t.times}};
  for (std::size_t k = 0; k < t.labels.size(); ++k) out.curve[t.labels[k]] = t.series[k];
}

json matrix_json(const Eigen::Matrix4cd& m, bool imag) {
  json rows = json::array();
  for (int i = 0; i < 4; ++i) {
    json r = json::array();
    for (int j = 0; j < 4; ++j) r.push_back(imag ? m(i, j).imag() : m(i, j).real());
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> linspace(double a, double b, long n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * static_cast<double>(i) / (n - 1);
  return v;
}

NucleusSpec nucleus_from(const std::string& name) {
  return name == "c13" ? NucleusSpec::c13() : NucleusSpec::n14();
}

// Walks from the sample nearest `target` to the adjacent extremum.
std::size_t climb(const std::vector<double>& axis, const std::vector<double>& v, double target, bool up) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (std::abs(axis[i] - target) < std::abs(axis[k] - target)) k = i;
  auto better = [&](std::size_t a, std::size_t b) { return up ? v[a] > v[b] : v[a] < v[b]; };
  while (true) {
    if (k > 0 && better(k - 1, k)) --k;
    else if (k + 1 < v.size() && better(k + 1, k)) ++k;
    else return k;
  }
}

std::vector<Experiment> build_experiments() {
  std::vector<Experiment> list;

  {
    Experiment e{"odmr", "ground-state ODMR: zero-field splitting and hyperfine lines", true, {}, {}};
    e.params = {vec3("b0", {0, 0, 0}, "static field (mT), NV frame, e.g. 0,0,1mT"),
                positive("d", 2880.0, "zero-field splitting D (MHz)"),
                nonneg("e", 0.0, "strain splitting E (MHz)"),
                text("nucleus", "none", {"none", "n14", "c13"}, "hyperfine-coupled nucleus"),
                number("start_mhz", 2780.0, "sweep start (MHz)"),
                number("stop_mhz", 2980.0, "sweep stop (MHz)"),
                integer("points", 2001, "sweep points", 3),
                positive("linewidth_mhz", 1.0, "line FWHM (MHz)"),
                nonneg("contrast", 0.15, "dip depth of the strongest line")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      SpinHamiltonianParams p;
      p.d = num(c, "d");
      p.e = num(c, "e");
      p.b0 = vec(c, "b0");
      if (str(c, "nucleus") != "none") p.nuclei = {nucleus_from(str(c, "nucleus"))};
      p.validate();
      const Sweep sweep{num(c, "start_mhz"), num(c, "stop_mhz"), static_cast<int>(integer_param(c, "points"))};
      require(sweep.stop > sweep.start, "stop_mhz must exceed start_mhz");
      ExperimentOutput out;
      if (!execute) return out;
      const Spectrum s = cw_odmr_spectrum(p, PhotophysicsRates{}, sweep, num(c, "linewidth_mhz"), num(c, "contrast"));
      json lines = json::array();
      for (const auto& l : odmr_lines(p)) lines.push_back({{"freq_mhz", l.freq_mhz}, {"relative_strength", l.relative_strength}});
      json dips = json::array();
      for (std::size_t k : local_minima(s.values, 0.01 * num(c, "contrast"))) dips.push_back(s.axis[k]);
      out.summary = {{"lines", lines}, {"dips_mhz", dips}};
      set_curve(out, *find_experiment("odmr"), c, s);
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"excitation-line", "low-temperature fluorescence excitation line", true, {}, {}};
    e.params = {positive("lifetime_ns", 13.0, "excited-state lifetime (ns)"),
                nonneg("extra_dephasing_mhz", 0.0, "additional broadening (MHz)"),
                positive("span_mhz", 100.0, "detuning half-range (MHz)"),
                integer("points", 801, "sweep points", 3)};
    e.body = [](const ExperimentConfig& c, bool execute) {
      const double tau = num(c, "lifetime_ns"), span = num(c, "span_mhz");
      ExperimentOutput out;
      if (!execute) return out;
      const Spectrum s = excitation_line(PhotophysicsRates{}, tau, num(c, "extra_dephasing_mhz"),
                                         Sweep{-span, span, static_cast<int>(integer_param(c, "points"))});
      const auto peak = static_cast<std::size_t>(std::max_element(s.values.begin(), s.values.end()) - s.values.begin());
      out.summary = {{"fwhm_mhz", full_width_half_max(s.axis, s.values, peak, 0.0)},
                     {"lifetime_limited_fwhm_mhz", lifetime_limited_fwhm_mhz(tau)}};
      set_curve(out, *find_experiment("excitation-line"), c, s);
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"rabi", "Rabi nutation of the electron spin", true, {}, {}};
    e.params = {positive("rabi_mhz", 40.0, "Rabi frequency (MHz)"),
                positive("t_max_ns", 500.0, "trace length (ns)"),
                integer("points", 4001, "samples", 16),
                nonneg("dephasing_rate", 0.0, "envelope decay rate (1/s)")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      const double rabi = num(c, "rabi_mhz"), t_max = num(c, "t_max_ns") * 1e-9;
      const long n = integer_param(c, "points");
      if (static_cast<double>(n - 1) < 8.0 * rabi * 1e6 * t_max)
        throw ConfigError("params.points", "fewer than 8 samples per Rabi period");
      ExperimentOutput out;
      if (!execute) return out;
      const TimeTrace t = rabi_trace(SpinHamiltonianParams{}, rabi, t_max, static_cast<int>(n), num(c, "dephasing_rate"));
      const auto peaks = spectral_peaks(t.column("p0"), t.times[1] - t.times[0], 1);
      out.summary = {{"fft_rabi_mhz", peaks.empty() ? 0.0 : peaks[0]}, {"pi_pulse_ns", 1e3 / (2.0 * rabi)}};
      set_curve(out, *find_experiment("rabi"), c, t, "time_s");
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"echo", "Hahn echo with nuclear-spin modulation", true, {}, {}};
    e.params = {text("nucleus", "n14", {"n14", "c13"}, "coupled nucleus"),
                vec3("b0", {1, 0, 0}, "static field (mT), NV frame"),
                positive("tau_max_us", 10.0, "largest free-evolution time (us)"),
                integer("points", 2001, "tau samples", 16)};
    e.body = [](const ExperimentConfig& c, bool execute) {
      SpinHamiltonianParams p;
      p.b0 = vec(c, "b0");
      p.nuclei = {nucleus_from(str(c, "nucleus"))};
      p.validate();
      ExperimentOutput out;
      if (!execute) return out;
      const auto taus = linspace(0.0, num(c, "tau_max_us") * 1e-6, integer_param(c, "points"));
      const EchoResult r = hahn_echo_trace(p, taus);
      const auto split = manifold_splittings(p);
      out.summary = {{"modulation_depth", r.modulation_depth},
                     {"peaks_mhz", spectral_peaks(r.trace.column("echo"), taus[1] - taus[0], 6)},
                     {"splittings_ms0_mhz", split.ms0},
                     {"splittings_ms_minus1_mhz", split.ms_minus1},
                     {"warnings", r.warnings}};
      set_curve(out, *find_experiment("echo"), c, r.trace, "tau_s");
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"bell-tomography", "electron-nuclear Bell state tomography", false, {}, {}};
    e.params = {text("state", "psi-", {"phi+", "phi-", "psi+", "psi-", "phi-plus", "phi-minus", "psi-plus", "psi-minus"},
                     "target Bell state"),
                nonneg("dephasing_rate", 0.0, "electron dephasing during the pulses (1/s)")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      std::string name = str(c, "state");
      if (name.size() > 4) name = name.substr(0, 3) + (name.substr(4) == "plus" ? "+" : "-");
      const BellState b = bell_state_from_string(name);
      ExperimentOutput out;
      if (!execute) return out;
      std::optional<TomographyNoise> noise;
      if (num(c, "dephasing_rate") > 0.0) noise = TomographyNoise{num(c, "dephasing_rate")};
      const TomographyResult r = tomography_reconstruct(prepare_bell(b), bell_params(), noise);
      json prov = json::array();
      for (const auto& row : r.provenance) prov.push_back(row);
      out.summary = {{"state", to_string(b)},
                     {"rho_real", matrix_json(r.rho, false)},
                     {"rho_imag", matrix_json(r.rho, true)},
                     {"simulated_real", matrix_json(r.simulated, false)},
                     {"simulated_imag", matrix_json(r.simulated, true)},
                     {"fidelity", bell_fidelity(r.rho, b)},
                     {"trace_error", r.trace_error},
                     {"hermiticity_error", r.hermiticity_error},
                     {"flagged", r.flagged},
                     {"provenance", prov}};
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"zeno", "quantum Zeno survival under repeated measurement", false, {}, {}};
    e.params = {nonneg("lambda_t", 1.0, "coupling times total time, lambda T"),
                integer("n", 4, "number of measurements", 1)};
    e.body = [](const ExperimentConfig& c, bool execute) {
      ZenoParams z{num(c, "lambda_t"), 1.0, integer_param(c, "n")};
      z.validate();
      ExperimentOutput out;
      if (!execute) return out;
      out.summary = {{"p_surv", zeno_survival_discrete(z)},
                     {"p_surv_continuous", zeno_survival_continuous(z)},
                     {"p_step", z.p_step()}};
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"readout", "single-shot readout photon-count histogram", true, {}, {}};
    e.params = {nonneg("bright_cps", 15000.0, "m_s = 0 count rate (1/s)"),
                nonneg("dark_cps", 1000.0, "m_s = +-1 count rate (1/s)"),
                positive("window_ms", 5.0, "acquisition window (ms)"),
                nonneg("flip_probability", kCalibratedFlipProbability, "flip probability per window"),
                integer("windows", 20000, "number of readouts", 1),
                text("model", "poisson", {"poisson", "gaussian"}, "mixture component model")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      ReadoutModel m{num(c, "bright_cps"), num(c, "dark_cps"), num(c, "window_ms") * 1e-3, num(c, "flip_probability")};
      m.validate();
      ExperimentOutput out;
      if (!execute) return out;
      const Histogram h = readout_histogram(m, integer_param(c, "windows"), c.seed);
      const ReadoutFidelity f = readout_fidelity(h, str(c, "model") == "gaussian" ? ComponentModel::Gaussian
                                                                                  : ComponentModel::Poisson);
      Spectrum s;
      s.axis.assign(h.bin_edges.begin(), h.bin_edges.end() - 1);
      for (long v : h.frequencies) s.values.push_back(static_cast<double>(v));
      s.axis_label = "counts";
      s.value_label = "windows";
      out.summary = {{"fidelity", f.fidelity},   {"threshold", f.threshold},   {"on_mean", f.on_mean},
                     {"off_mean", f.off_mean},   {"on_weight", f.on_weight},   {"off_weight", f.off_weight},
                     {"wing_ratio", f.wing_ratio}, {"peak_ratio", f.peak_ratio}, {"converged", f.converged},
                     {"fallback", f.fallback}};
      set_curve(out, *find_experiment("readout"), c, s);
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"g2", "photon antibunching g2(tau) of a single emitter", true, {}, {}};
    e.params = {text("emitter", "nv", {"nv", "ne8"}, "emitter parameter set"),
                positive("pump_rate", 5e7, "excitation rate (1/s)"),
                positive("tau_max_ns", 1000.0, "largest |delay| (ns)"),
                integer("points", 2001, "delay samples", 3),
                optional_positive("lifetime_ns", "override the preset lifetime (ns)"),
                {"isc_rate", ParamKind::Number, nullptr, "override the preset ISC rate (1/s)", {}, 0.0, false},
                optional_positive("shelf_lifetime_ns", "override the preset shelf lifetime (ns)")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      EmitterModel m = str(c, "emitter") == "ne8" ? EmitterModel::ne8() : EmitterModel::nv();
      if (auto v = maybe(c, "lifetime_ns")) m.lifetime_ns = *v;
      if (auto v = maybe(c, "isc_rate")) m.isc_rate = *v;
      if (auto v = maybe(c, "shelf_lifetime_ns")) m.shelf_lifetime_ns = *v;
      m.validate();
      ExperimentOutput out;
      if (!execute) return out;
      const double tau = num(c, "tau_max_ns");
      const Spectrum s = g2_curve(m, num(c, "pump_rate"), Sweep{-tau, tau, static_cast<int>(integer_param(c, "points"))});
      const std::size_t zero = climb(s.axis, s.values, 0.0, false);
      out.summary = {{"g2_zero", s.values[zero]},
                     {"g2_tail", s.values.back()},
                     {"g2_max", *std::max_element(s.values.begin(), s.values.end())}};
      set_curve(out, *find_experiment("g2"), c, s);
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"eit", "EIT probe spectrum of the spin lambda system", true, {}, {}};
    const LambdaSystem d;
    e.params = {nonneg("omega_c_mhz", d.omega_c_mhz, "coupling Rabi frequency (MHz)"),
                nonneg("omega_p_mhz", d.omega_p_mhz, "probe Rabi frequency (MHz)"),
                positive("coupling_freq_mhz", d.coupling_freq_mhz, "coupling frequency, resonant with |3>-|2> (MHz)"),
                positive("splitting_mhz", d.splitting_mhz(), "ground splitting |1>-|3> (MHz)"),
                nonneg("ground_dephasing", d.ground_dephasing, "|1>-|3> coherence decay (1/s)"),
                positive("excited_decay", d.excited_decay, "|2> decay (1/s)"),
                positive("ground_relaxation", d.ground_relaxation, "|1> <-> |3> exchange (1/s)"),
                number("start_mhz", 2790.0, "probe sweep start (MHz)"),
                number("stop_mhz", 2804.0, "probe sweep stop (MHz)"),
                integer("points", 1401, "sweep points", 3),
                text("presentation", "fluorescence", {"fluorescence", "absorption"}, "detected signal")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      LambdaSystem sys;
      sys.energies_mhz = {num(c, "splitting_mhz"), num(c, "coupling_freq_mhz"), 0.0};
      sys.coupling_freq_mhz = num(c, "coupling_freq_mhz");
      sys.omega_c_mhz = num(c, "omega_c_mhz");
      sys.omega_p_mhz = num(c, "omega_p_mhz");
      sys.ground_dephasing = num(c, "ground_dephasing");
      sys.excited_decay = num(c, "excited_decay");
      sys.ground_relaxation = num(c, "ground_relaxation");
      sys.validate();
      const Sweep sweep{num(c, "start_mhz"), num(c, "stop_mhz"), static_cast<int>(integer_param(c, "points"))};
      require(sweep.stop > sweep.start, "stop_mhz must exceed start_mhz");
      ExperimentOutput out;
      if (!execute) return out;
      const bool fluo = str(c, "presentation") == "fluorescence";
      const Spectrum s = eit_probe_spectrum(sys, sweep, fluo ? EitPresentation::Fluorescence : EitPresentation::Absorption);
      const std::size_t k = climb(s.axis, s.values, sys.two_photon_resonance_mhz(), fluo);
      out.summary = {{"two_photon_resonance_mhz", sys.two_photon_resonance_mhz()}, {"feature_mhz", s.axis[k]}};
      if (sys.omega_c_mhz == 0.0) out.summary["note"] = "omega_c = 0: single resonance, no EIT";
      set_curve(out, *find_experiment("eit"), c, s);
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"polariton-storage", "dark-polariton photon-to-spin storage and retrieval", true, {}, {}};
    e.params = {positive("omega_mhz", 10.0, "initial control Rabi frequency (MHz)"),
                positive("g", 1e5, "single-emitter coupling (1/s)"),
                positive("n_emitters", 1e4, "number of emitters N"),
                nonneg("duration_us", 500.0, "length of each ramp (us)"),
                integer("samples", 2001, "ramp samples", 2),
                flag("retrieve", true, "ramp the control back up after storage")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      const PolaritonState p0 = polariton(num(c, "omega_mhz"), num(c, "g"), num(c, "n_emitters"));
      ExperimentOutput out;
      if (!execute) return out;
      const long n = integer_param(c, "samples");
      const double dur = num(c, "duration_us") * 1e-6;
      const SweepResult st = storage_sweep(p0, linspace(p0.omega_mhz, 0.0, n), dur);
      std::vector<StoragePoint> traj = st.trajectory;
      std::vector<double> phase(traj.size(), 0.0);
      out.summary = {{"theta0", p0.theta},
                     {"photon_fraction0", p0.photon_fraction()},
                     {"stored_spin_fraction", st.trajectory.back().spin_fraction}};
      if (c.params.at("retrieve").get<bool>()) {
        const SweepResult rt = retrieval_sweep(st.modes, p0.g, p0.n_photons, linspace(0.0, p0.omega_mhz, n), dur);
        for (std::size_t k = 1; k < rt.trajectory.size(); ++k) {
          StoragePoint q = rt.trajectory[k];
          q.t += dur;
          traj.push_back(q);
          phase.push_back(1.0);
        }
        out.summary["retrieved_photon_fraction"] = std::norm(rt.modes[0]);
        out.summary["roundtrip_error"] = std::abs(rt.modes[0] - p0.photon_amplitude);
      }
      double max_exc = 0.0;
      TimeTrace t;
      t.labels = {"phase", "omega_mhz", "theta", "photon", "excited", "spin", "norm"};
      t.series.assign(t.labels.size(), {});
      for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto& q = traj[k];
        t.times.push_back(q.t);
        const double row[] = {phase[k], q.omega_mhz, q.theta, q.photon_fraction, q.excited_fraction, q.spin_fraction, q.norm};
        for (std::size_t j = 0; j < t.labels.size(); ++j) t.series[j].push_back(row[j]);
        max_exc = std::max(max_exc, q.excited_fraction);
      }
      out.summary["max_excited_fraction"] = max_exc;
      set_curve(out, *find_experiment("polariton-storage"), c, t, "time_s");
      return out;
    };
    list.push_back(std::move(e));
  }

  {
    Experiment e{"saturation", "saturated single-defect fluorescence", false, {}, {}};
    const PhotophysicsRates d;
    e.params = {positive("lifetime_ns", 13.0, "excited-state lifetime (ns)"),
                nonneg("isc_rate", d.k_s_xy, "ISC rate k_s of the excited sublevel (1/s)"),
                nonneg("k_x", d.k_x, "singlet -> m_s = +1 (1/s)"),
                nonneg("k_y", d.k_y, "singlet -> m_s = -1 (1/s)"),
                nonneg("k_z", d.k_z, "singlet -> m_s = 0 (1/s)"),
                positive("r_slr", d.r_slr, "spin-lattice rate R (1/s)"),
                nonneg("quantum_yield", d.quantum_yield, "radiative quantum yield"),
                nonneg("detection_eff", d.detection_eff, "detection efficiency")};
    e.body = [](const ExperimentConfig& c, bool execute) {
      PhotophysicsRates r;
      r.a_rad = 1.0 / (num(c, "lifetime_ns") * 1e-9);
      r.k_x = num(c, "k_x");
      r.k_y = num(c, "k_y");
      r.k_z = num(c, "k_z");
      r.r_slr = num(c, "r_slr");
      r.quantum_yield = num(c, "quantum_yield");
      r.detection_eff = num(c, "detection_eff");
      r.validate();
      ExperimentOutput out;
      if (!execute) return out;
      const SaturatedIntensity s = saturated_intensity(r, num(c, "isc_rate"));
      out.summary = {{"emitted_per_s", s.emitted},
                     {"low_t_approx_per_s", s.low_t_approx},
                     {"low_t_branching_per_s", s.low_t_branching},
                     {"detected_per_s", s.detected}};
      return out;
    };
    list.push_back(std::move(e));
  }
  return list;
}

json coerce_json(const ParamSpec& p, const json& v, const std::string& where) {
  auto bad = [&](const std::string& what) { return ConfigError(where, what); };
  json out;
  switch (p.kind) {
    case ParamKind::Number:
      if (v.is_null() && p.default_value.is_null()) return v;
      if (!v.is_number()) throw bad("expected a number");
      out = v.get<double>();
      break;
    case ParamKind::Integer:
      if (!v.is_number_integer()) throw bad("expected an integer");
      out = v.get<long>();
      break;
    case ParamKind::Text:
      if (!v.is_string()) throw bad("expected a string");
      if (std::find(p.choices.begin(), p.choices.end(), v.get<std::string>()) == p.choices.end())
        throw bad("'" + v.get<std::string>() + "' is not one of: " + join(p.choices));
      return v;
    case ParamKind::Vec3:
      if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
        throw bad("expected three numbers (mT)");
      return v;
    case ParamKind::Flag:
      if (!v.is_boolean()) throw bad("expected true or false");
      return v;
  }
  const double x = out.get<double>();
  if (!std::isfinite(x)) throw bad("must be finite");
  std::ostringstream got;
  got << " (got " << x << ")";
  if (p.positive && !(x > 0.0)) throw bad("must be > 0" + got.str());
  if (p.min && x < *p.min) throw bad("must be >= " + std::to_string(static_cast<long>(*p.min)) + got.str());
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(where, "'" + s + "' is not a number");
  }
  if (used != s.size()) throw ConfigError(where, "'" + s + "' is not a number");
  return v;
}

json coerce_text(const ParamSpec& p, const std::string& s, const std::string& where) {
  switch (p.kind) {
    case ParamKind::Number:
      return coerce_json(p, parse_double(s, where), where);
    case ParamKind::Integer: {
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != s.size() || s.empty()) throw ConfigError(where, "'" + s + "' is not an integer");
      return coerce_json(p, v, where);
    }
    case ParamKind::Text:
      return coerce_json(p, s, where);
    case ParamKind::Vec3: {
      std::string body = s;
      double scale = 1.0;
      for (const auto& [unit, f] : {std::pair{"mT", 1.0}, {"T", 1e3}, {"G", 0.1}}) {
        const std::string u = unit;
        if (body.size() > u.size() && body.compare(body.size() - u.size(), u.size(), u) == 0) {
          body.resize(body.size() - u.size());
          scale = f;
          break;
        }
      }
      json v = json::array();
      std::stringstream ss(body);
      std::string part;
      while (std::getline(ss, part, ',')) v.push_back(scale * parse_double(part, where));
      return coerce_json(p, v, where);
    }
    case ParamKind::Flag:
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw ConfigError(where, "expected true or false, got '" + s + "'");
  }
  return nullptr;
}

std::vector<std::string> param_names(const Experiment& e) {
  std::vector<std::string> v;
  for (const auto& p : e.params) v.push_back(p.name);
  return v;
}

const ParamSpec* find_param(const Experiment& e, const std::string& name) {
  for (const auto& p : e.params)
    if (p.name == name) return &p;
  return nullptr;
}

void check_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError(where.empty() ? k : where + "." + k, "unknown key; allowed: " + join(allowed));
  }
}

}  // namespace

const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> list = build_experiments();
  return list;
}

const Experiment* find_experiment(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return &e;
  return nullptr;
}

std::string experiment_names() {
  std::vector<std::string> v;
  for (const auto& e : experiments()) v.push_back(e.name);
  return join(v);
}

ExperimentConfig resolve_config(const std::optional<json>& file, const CommandLine& cl) {
  ExperimentConfig cfg;
  std::string name = cl.experiment;
  const std::string src = "config";
  if (file) {
    check_keys(*file, {"experiment", "seed", "output", "params"}, "");
    if (file->contains("experiment")) {
      const json& v = file->at("experiment");
      if (!v.is_string()) throw ConfigError(src + ": experiment", "expected a string");
      if (!name.empty() && name != v.get<std::string>())
        throw ConfigError("experiment", "command line says '" + name + "', config says '" + v.get<std::string>() + "'");
      name = v.get<std::string>();
    }
  }
  if (name.empty()) throw ConfigError("experiment", "missing; valid experiments: " + experiment_names());
  const Experiment* e = find_experiment(name);
  if (!e) throw ConfigError("experiment", "unknown experiment '" + name + "'; valid experiments: " + experiment_names());
  cfg.experiment = name;
  cfg.format = e->has_curve ? "csv" : "json";

  for (const auto& p : e->params) cfg.params[p.name] = p.default_value;
  if (file) {
    if (file->contains("seed")) {
      const json& s = file->at("seed");
      if (!s.is_number_unsigned()) throw ConfigError(src + ": seed", "expected a non-negative integer");
      cfg.seed = s.get<std::uint64_t>();
    }
    if (file->contains("output")) {
      const json& o = file->at("output");
      check_keys(o, {"dir", "format"}, "output");
      if (o.contains("dir")) {
        if (!o.at("dir").is_string()) throw ConfigError(src + ": output.dir", "expected a string");
        cfg.out_dir = o.at("dir").get<std::string>();
      }
      if (o.contains("format")) {
        if (!o.at("format").is_string()) throw ConfigError(src + ": output.format", "expected a string");
        cfg.format = o.at("format").get<std::string>();
      }
    }
    if (file->contains("params")) {
      const json& ps = file->at("params");
      check_keys(ps, param_names(*e), "params");
      for (const auto& [k, v] : ps.items()) cfg.params[k] = coerce_json(*find_param(*e, k), v, src + ": params." + k);
    }
  }
  for (const auto& [k, raw] : cl.params) {
    const ParamSpec* p = find_param(*e, k);
    if (!p) {
      std::vector<std::string> flags;
      for (const auto& n : param_names(*e)) flags.push_back(flag_name(n));
      throw ConfigError(flag_name(k), "unknown parameter for '" + name + "'; valid: " + join(flags));
    }
    cfg.params[k] = coerce_text(*p, raw, flag_name(k));
  }
  if (cl.out_dir) cfg.out_dir = *cl.out_dir;
  if (cl.format) cfg.format = *cl.format;
  if (cl.seed) cfg.seed = *cl.seed;
  if (cfg.format != "csv" && cfg.format != "json")
    throw ConfigError("format", "'" + cfg.format + "' is not one of: csv, json");
  if (cfg.format == "csv" && !e->has_curve)
    throw ConfigError("format", "experiment '" + name + "' produces scalars only; use json");
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  const Experiment* e = find_experiment(cfg.experiment);
  if (!e) throw ConfigError("experiment", "unknown experiment '" + cfg.experiment + "'");
  e->body(cfg, false);
}

namespace {

json config_snapshot(const ExperimentConfig& cfg) {
  return {{"experiment", cfg.experiment},
          {"seed", cfg.seed},
          {"output", {{"dir", cfg.out_dir}, {"format", cfg.format}}},
          {"params", cfg.params}};
}

class OutputWriter {
 public:
  explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) {}
  ~OutputWriter() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : written_) fs::remove(f, ec);
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path target = dir_ / name;
    const fs::path tmp = dir_ / (name + ".partial");
    {
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + tmp.string());
      os << content;
      if (!os.flush()) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot write " + tmp.string());
      }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
      fs::remove(tmp, ec);
      throw std::runtime_error("cannot write " + target.string());
    }
    written_.push_back(target);
  }

  void commit() { committed_ = true; }
  std::vector<std::string> files() const {
    std::vector<std::string> v;
    for (const auto& f : written_) v.push_back(f.string());
    return v;
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

}  // namespace

RunResult run(const ExperimentConfig& cfg, const std::vector<std::string>& argv) {
  const Experiment* e = find_experiment(cfg.experiment);
  if (!e) throw ConfigError("experiment", "unknown experiment '" + cfg.experiment + "'");
  e->body(cfg, false);
  fs::create_directories(cfg.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.output = e->body(cfg, true);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  OutputWriter w(cfg.out_dir);
  const std::string primary = cfg.experiment + "." + cfg.format;
  if (cfg.format == "csv") {
    w.write(primary, *res.output.csv);
  } else {
    json doc = {{"experiment", e->name}, {"anchor", e->anchor}, {"seed", cfg.seed}, {"version", NVSIM_VERSION}};
    for (const auto& [k, v] : res.output.summary.items()) doc[k] = v;
    if (!res.output.curve.is_null()) doc["curve"] = res.output.curve;
    w.write(primary, doc.dump(2) + "\n");
  }
  json manifest = {{"artifact", "nvsim"},
                   {"version", NVSIM_VERSION},
                   {"experiment", e->name},
                   {"anchor", e->anchor},
                   {"seed", cfg.seed},
                   {"config", config_snapshot(cfg)},
                   {"wall_time_s", wall},
                   {"argv", argv},
                   {"outputs", json::array({primary, "manifest.json"})}};
  w.write("manifest.json", manifest.dump(2) + "\n");
  w.commit();
  res.files = w.files();
  return res;
}

namespace {

// "--name value" / "--name=value" pairs left over by the fixed options.
std::vector<std::pair<std::string, std::string>> parse_params(const std::vector<std::string>& rest) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& tok = rest[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3) throw ConfigError("argument " + std::to_string(i + 1), "unexpected '" + tok + "'");
    std::string name = tok.substr(2), value;
    if (const auto eq = name.find('='); eq != std::string::npos) {
      value = name.substr(eq + 1);
      name.resize(eq);
    } else if (i + 1 < rest.size() && rest[i + 1].rfind("--", 0) != 0) {
      value = rest[++i];
    } else {
      value = "true";
    }
    std::replace(name.begin(), name.end(), '-', '_');
    out.emplace_back(name, value);
  }
  return out;
}

std::optional<json> load_file(const std::optional<std::string>& path) {
  if (!path) return std::nullopt;
  std::ifstream is(*path);
  if (!is) throw ConfigError(*path, "cannot open config file");
  try {
    return json::parse(is);
  } catch (const json::parse_error& ex) {
    throw ConfigError(*path, ex.what());
  }
}

void print_list(std::ostream& out, const std::string& only) {
  for (const auto& e : experiments()) {
    if (!only.empty() && e.name != only) continue;
    out << e.name << "  (" << e.anchor << ")\n";
    if (only.empty()) continue;
    for (const auto& p : e.params) {
      out << "  " << flag_name(p.name) << "  " << p.help;
      if (!p.choices.empty()) out << " [" << join(p.choices, "|") << "]";
      out << "  default: " << p.default_value.dump() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"nvsim: NV-centre spin and photon simulations"};
  app.require_subcommand(1);
  CommandLine cl;
  std::string seed_text;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("experiment", cl.experiment, "experiment name");
    sub->add_option("--config", cl.config_path, "JSON config file");
    sub->add_option("--out", cl.out_dir, "output directory");
    sub->add_option("--format", cl.format, "csv or json");
    sub->add_option("--seed", seed_text, "random seed");
    sub->allow_extras();
  };
  CLI::App* run_cmd = app.add_subcommand("run", "run an experiment and write its outputs");
  CLI::App* validate_cmd = app.add_subcommand("validate", "check a configuration without running it");
  CLI::App* list_cmd = app.add_subcommand("list", "list experiments, or the parameters of one");
  add_common(run_cmd);
  add_common(validate_cmd);
  std::string list_name;
  list_cmd->add_option("experiment", list_name, "experiment name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return 1;
  }

  if (list_cmd->parsed()) {
    if (!list_name.empty() && !find_experiment(list_name)) {
      err << "error: experiment: unknown experiment '" << list_name << "'; valid experiments: " << experiment_names() << "\n";
      return 1;
    }
    print_list(out, list_name);
    return 0;
  }

  CLI::App* sub = run_cmd->parsed() ? run_cmd : validate_cmd;
  try {
    if (!seed_text.empty()) {
      std::size_t used = 0;
      unsigned long long s = 0;
      try {
        s = std::stoull(seed_text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != seed_text.size() || seed_text[0] == '-')
        throw ConfigError("--seed", "'" + seed_text + "' is not a non-negative integer");
      cl.seed = s;
    }
    cl.params = parse_params(sub->remaining());
    const ExperimentConfig cfg = resolve_config(load_file(cl.config_path), cl);
    validate_config(cfg);
    if (sub == validate_cmd) {
      out << "ok: " << cfg.experiment << " is runnable\n";
      return 0;
    }
    const RunResult r = run(cfg, std::vector<std::string>(argv, argv + argc));
    out << r.output.summary.dump() << "\n";
    for (const auto& f : r.files) out << "wrote " << f << "\n";
    return 0;
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  } catch (const ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  } catch (const InvalidArgument& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    err << "runtime error: " << ex.what() << "\n";
    return 2;
  }
}

}  // namespace nvsim::cli
