#include "nvsim/error.hpp"
#include "nvsim/measurement.hpp"
#include "nvsim/odmr.hpp"
#include "nvsim/photonics.hpp"
#include "nvsim/pulsec.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace nvsim;

PYBIND11_MODULE(_core, m) {
  m.doc() = "NV-centre spin and photon simulations";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::object err = py::reinterpret_borrow<py::object>(parse_error)(e.what());
      err.attr("line") = e.line();
      err.attr("column") = e.column();
      PyErr_SetObject(parse_error.ptr(), err.ptr());
    }
  });

  py::class_<Sweep>(m, "Sweep")
      .def(py::init<double, double, int>(), py::arg("start"), py::arg("stop"), py::arg("points"))
      .def_readwrite("start", &Sweep::start)
      .def_readwrite("stop", &Sweep::stop)
      .def_readwrite("points", &Sweep::points)
      .def("values", &Sweep::values);

  py::class_<Spectrum>(m, "Spectrum")
      .def_readonly("axis", &Spectrum::axis)
      .def_readonly("values", &Spectrum::values)
      .def_readonly("axis_label", &Spectrum::axis_label)
      .def_readonly("value_label", &Spectrum::value_label)
      .def_readonly("metadata", &Spectrum::metadata)
      .def("to_csv", [](const Spectrum& s) { return to_csv(s); })
      .def("__len__", &Spectrum::size);

  py::class_<NucleusSpec>(m, "NucleusSpec")
      .def_static("n14", &NucleusSpec::n14)
      .def_static("c13", &NucleusSpec::c13)
      .def_static("c13_isotropic", &NucleusSpec::c13_isotropic, py::arg("a_mhz"))
      .def_readwrite("spin", &NucleusSpec::spin)
      .def_readwrite("a_parallel", &NucleusSpec::a_parallel)
      .def_readwrite("a_perp", &NucleusSpec::a_perp)
      .def_readwrite("quadrupole_p", &NucleusSpec::quadrupole_p);

  py::class_<SpinHamiltonianParams>(m, "SpinHamiltonianParams")
      .def(py::init<>())
      .def_readwrite("d", &SpinHamiltonianParams::d)
      .def_readwrite("e", &SpinHamiltonianParams::e)
      .def_readwrite("gamma_e", &SpinHamiltonianParams::gamma_e)
      .def_readwrite("b0", &SpinHamiltonianParams::b0)
      .def_readwrite("nuclei", &SpinHamiltonianParams::nuclei)
      .def("validate", &SpinHamiltonianParams::validate);

  py::class_<PhotophysicsRates>(m, "PhotophysicsRates")
      .def(py::init<>())
      .def_readwrite("a_rad", &PhotophysicsRates::a_rad)
      .def_readwrite("quantum_yield", &PhotophysicsRates::quantum_yield)
      .def_readwrite("k_s_xy", &PhotophysicsRates::k_s_xy)
      .def_readwrite("k_s_z", &PhotophysicsRates::k_s_z)
      .def_readwrite("k_x", &PhotophysicsRates::k_x)
      .def_readwrite("k_y", &PhotophysicsRates::k_y)
      .def_readwrite("k_z", &PhotophysicsRates::k_z)
      .def_readwrite("r_slr", &PhotophysicsRates::r_slr)
      .def_readwrite("detection_eff", &PhotophysicsRates::detection_eff);

  py::class_<OdmrLine>(m, "OdmrLine")
      .def_readonly("freq_mhz", &OdmrLine::freq_mhz)
      .def_readonly("relative_strength", &OdmrLine::relative_strength);

  m.def("ground_hamiltonian", &ground_hamiltonian, py::arg("params"));
  m.def("odmr_lines", [](const SpinHamiltonianParams& p) { return odmr_lines(p); }, py::arg("params"));
  m.def("cw_odmr_spectrum",
        [](const SpinHamiltonianParams& p, const Sweep& range, double linewidth, double contrast) {
          return cw_odmr_spectrum(p, {}, range, linewidth, contrast);
        },
        py::arg("params"), py::arg("mw_range"), py::arg("linewidth_mhz"), py::arg("contrast") = 0.15);
  m.def("lifetime_limited_fwhm_mhz", &lifetime_limited_fwhm_mhz, py::arg("lifetime_ns"));

  py::class_<SaturatedIntensity>(m, "SaturatedIntensity")
      .def_readonly("emitted", &SaturatedIntensity::emitted)
      .def_readonly("low_t_approx", &SaturatedIntensity::low_t_approx)
      .def_readonly("low_t_branching", &SaturatedIntensity::low_t_branching)
      .def_readonly("detected", &SaturatedIntensity::detected);
  m.def("saturated_intensity", py::overload_cast<const PhotophysicsRates&, double>(&saturated_intensity),
        py::arg("rates"), py::arg("isc_rate"));

  // Pulse programs
  py::enum_<EventKind>(m, "EventKind")
      .value("MwPulse", EventKind::MwPulse)
      .value("RfPulse", EventKind::RfPulse)
      .value("Delay", EventKind::Delay)
      .value("LaserInit", EventKind::LaserInit)
      .value("LaserReadout", EventKind::LaserReadout);
  py::class_<PulseEvent>(m, "PulseEvent")
      .def_readonly("kind", &PulseEvent::kind)
      .def_readonly("frequency_mhz", &PulseEvent::frequency_mhz)
      .def_readonly("rabi_mhz", &PulseEvent::rabi_mhz)
      .def_readonly("phase", &PulseEvent::phase)
      .def_readonly("duration_s", &PulseEvent::duration_s)
      .def_readonly("target", &PulseEvent::target);
  py::class_<PulseSequence>(m, "PulseSequence")
      .def_readonly("name", &PulseSequence::name)
      .def_readonly("events", &PulseSequence::events);
  m.def("parse_sequence", &parse_sequence, py::arg("text"), py::arg("name") = "");
  m.def("print_sequence", &print_sequence, py::arg("sequence"));
  m.def("invert_sequence", &invert_sequence, py::arg("sequence"));

  m.def("rabi_trace",
        [](const SpinHamiltonianParams& p, double rabi, double t_max, int n, double dephasing) {
          auto t = rabi_trace(p, rabi, t_max, n, dephasing);
          return py::make_tuple(t.times, t.column("p0"));
        },
        py::arg("params"), py::arg("rabi_mhz"), py::arg("t_max_s"), py::arg("n_points"),
        py::arg("dephasing_rate") = 0.0);

  py::enum_<BellState>(m, "BellState")
      .value("PhiPlus", BellState::PhiPlus)
      .value("PhiMinus", BellState::PhiMinus)
      .value("PsiPlus", BellState::PsiPlus)
      .value("PsiMinus", BellState::PsiMinus);
  m.def("bell_state_from_string", &bell_state_from_string);
  m.def("bell_tomography",
        [](BellState b) {
          auto r = tomography_reconstruct(prepare_bell(b), bell_params());
          return py::make_tuple(Eigen::Matrix4cd(r.rho), bell_fidelity(r.rho, b));
        },
        py::arg("state"), "Reconstructed 4x4 density matrix and its fidelity with the target.");

  // Measurement
  py::class_<ReadoutModel>(m, "ReadoutModel")
      .def(py::init<>())
      .def_readwrite("bright_cps", &ReadoutModel::bright_cps)
      .def_readwrite("dark_cps", &ReadoutModel::dark_cps)
      .def_readwrite("window", &ReadoutModel::window)
      .def_readwrite("flip_probability", &ReadoutModel::flip_probability);
  py::class_<Histogram>(m, "Histogram")
      .def_readonly("bin_edges", &Histogram::bin_edges)
      .def_readonly("frequencies", &Histogram::frequencies)
      .def_readonly("seed", &Histogram::seed)
      .def("total", &Histogram::total);
  py::class_<ReadoutFidelity>(m, "ReadoutFidelity")
      .def_readonly("fidelity", &ReadoutFidelity::fidelity)
      .def_readonly("threshold", &ReadoutFidelity::threshold)
      .def_readonly("wing_ratio", &ReadoutFidelity::wing_ratio)
      .def_readonly("on_mean", &ReadoutFidelity::on_mean)
      .def_readonly("off_mean", &ReadoutFidelity::off_mean);
  m.def("readout_histogram", &readout_histogram, py::arg("model"), py::arg("n_windows"), py::arg("seed"));
  m.def("readout_fidelity", [](const Histogram& h) { return readout_fidelity(h); }, py::arg("histogram"));
  m.def("zeno_survival",
        [](double lambda_t, long n) { return zeno_survival_discrete({lambda_t, 1.0, n}); },
        py::arg("lambda_t"), py::arg("n"));
  m.def("zeno_survival_continuous",
        [](double lambda_t, long n) { return zeno_survival_continuous({lambda_t, 1.0, n}); },
        py::arg("lambda_t"), py::arg("n"));

  // Photonics
  py::class_<EmitterModel>(m, "EmitterModel")
      .def(py::init<>())
      .def_static("nv", &EmitterModel::nv)
      .def_static("ne8", &EmitterModel::ne8)
      .def_readwrite("name", &EmitterModel::name)
      .def_readwrite("lifetime_ns", &EmitterModel::lifetime_ns)
      .def_readwrite("isc_rate", &EmitterModel::isc_rate)
      .def_readwrite("shelf_lifetime_ns", &EmitterModel::shelf_lifetime_ns);
  m.def("g2_curve", &g2_curve, py::arg("emitter"), py::arg("pump_rate"), py::arg("tau_ns"));

  py::class_<LambdaSystem>(m, "LambdaSystem")
      .def(py::init<>())
      .def_readwrite("energies_mhz", &LambdaSystem::energies_mhz)
      .def_readwrite("coupling_freq_mhz", &LambdaSystem::coupling_freq_mhz)
      .def_readwrite("omega_c_mhz", &LambdaSystem::omega_c_mhz)
      .def_readwrite("omega_p_mhz", &LambdaSystem::omega_p_mhz)
      .def_readwrite("ground_dephasing", &LambdaSystem::ground_dephasing)
      .def("two_photon_resonance_mhz", &LambdaSystem::two_photon_resonance_mhz);
  m.def("eit_probe_spectrum",
        [](const LambdaSystem& s, const Sweep& probe, bool absorption) {
          return eit_probe_spectrum(s, probe, absorption ? EitPresentation::Absorption : EitPresentation::Fluorescence);
        },
        py::arg("system"), py::arg("probe_mhz"), py::arg("absorption") = false);

  py::class_<PolaritonState>(m, "PolaritonState")
      .def_readonly("theta", &PolaritonState::theta)
      .def("photon_fraction", &PolaritonState::photon_fraction)
      .def("spin_fraction", &PolaritonState::spin_fraction);
  m.def("polariton", &polariton, py::arg("omega_mhz"), py::arg("g"), py::arg("n_photons"));
  m.def("storage_round_trip",
        [](double omega_mhz, double g, double n, int samples, double duration_s) {
          std::vector<double> down(samples + 1);
          for (int k = 0; k <= samples; ++k) down[k] = omega_mhz * (1.0 - static_cast<double>(k) / samples);
          const auto init = polariton(omega_mhz, g, n);
          const auto stored = storage_sweep(init, down, duration_s);
          std::vector<double> up(down.rbegin(), down.rend());
          const auto back = retrieval_sweep(stored.modes, g, n, up, duration_s);
          return py::make_tuple(std::norm(stored.modes[2]), std::norm(back.modes[0]));
        },
        py::arg("omega_mhz"), py::arg("g"), py::arg("n_photons"), py::arg("samples") = 1000,
        py::arg("duration_s") = 500e-6,
        "Stored spin fraction and retrieved photon fraction after a linear ramp down and back up.");
  m.def("group_velocity_compression", &group_velocity_compression, py::arg("n"), py::arg("dn_ddelta"),
        py::arg("omega"));
}
