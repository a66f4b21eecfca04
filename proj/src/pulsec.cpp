#include "nvsim/pulsec.hpp"

#include "nvsim/error.hpp"
#include "nvsim/units.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace nvsim {

using namespace units;

SpinSystem SpinSystem::build(const SpinHamiltonianParams& params) {
  params.validate();
  SpinSystem s;
  s.params = params;
  s.basis = ground_basis(params);
  s.h = ground_hamiltonian(params);
  s.eig = eig_hermitian(s.h);
  const int d = s.dim();
  // Greedy one-to-one matching of eigenstates to product levels by weight.
  std::vector<std::tuple<double, int, int>> w;
  for (int l = 0; l < d; ++l)
    for (int k = 0; k < d; ++k) w.emplace_back(std::norm(s.eig.vectors(l, k)), l, k);
  std::sort(w.begin(), w.end(), [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  s.state_of_level.assign(d, -1);
  s.level_of_state.assign(d, -1);
  for (const auto& [weight, l, k] : w) {
    if (s.state_of_level[l] < 0 && s.level_of_state[k] < 0) {
      s.state_of_level[l] = k;
      s.level_of_state[k] = l;
    }
  }
  return s;
}

double SpinSystem::transition_mhz(int level_a, int level_b) const {
  require(level_a >= 0 && level_a < dim() && level_b >= 0 && level_b < dim(), "level index out of range");
  return rad_per_s_to_mhz(std::abs(eig.values(state_of_level[level_b]) - eig.values(state_of_level[level_a])));
}

StateVector SpinSystem::eigenstate(int level) const {
  require(level >= 0 && level < dim(), "level index out of range");
  return eig.vectors.col(state_of_level[level]);
}

Operator SpinSystem::to_level_frame(const Operator& rho) const {
  const Operator r = eig.vectors.adjoint() * rho * eig.vectors;
  Operator out(dim(), dim());
  for (int a = 0; a < dim(); ++a)
    for (int b = 0; b < dim(); ++b) out(a, b) = r(state_of_level[a], state_of_level[b]);
  return out;
}

Operator SpinSystem::from_level_frame(const Operator& rho_levels) const {
  Operator r(dim(), dim());
  for (int a = 0; a < dim(); ++a)
    for (int b = 0; b < dim(); ++b) r(state_of_level[a], state_of_level[b]) = rho_levels(a, b);
  return eig.vectors * r * eig.vectors.adjoint();
}

Eigen::Matrix2cd subspace_propagator(double detuning, double rabi_hz, double phase, double t) {
  const Complex i(0.0, 1.0);
  const double w = M_PI * rabi_hz;
  Operator h(2, 2);
  h << 0.5 * detuning, w * (std::cos(phase) - i * std::sin(phase)),
      w * (std::cos(phase) + i * std::sin(phase)), -0.5 * detuning;
  return unitary_propagator(h, t);
}

namespace {

// Drive operator in the product basis: S_x for microwaves; for RF the full
// Zeeman coupling gamma_e Sx - sum gamma_n Ix (MHz/mT).
Operator drive_operator(const SpinHamiltonianParams& p, EventKind kind) {
  const SpinOperators e = electron_operators(p);
  if (kind == EventKind::MwPulse) return e.x;
  Operator c = p.gamma_e * e.x;
  for (std::size_t k = 0; k < p.nuclei.size(); ++k) c -= p.nuclei[k].gamma_n * nuclear_operators(p, k).x;
  return c;
}

struct Addressed {
  int state_a = -1, state_b = -1;  // eigenstate indices, pulse ordering
  double detuning = 0.0;           // rad/s, drive minus transition
  double freq_mhz = 0.0;           // drive frequency
  double coupling = 0.0;           // |<a|C|b>|
};

std::optional<Addressed> address(const SpinSystem& sys, const PulseEvent& ev, const Operator& c_eig) {
  const int d = sys.dim();
  Addressed ad;
  if (ev.target) {
    const auto [la, lb] = *ev.target;
    if (la >= d || lb >= d) {
      std::ostringstream os;
      os << "line " << ev.line << ": transition " << la + 1 << "-" << lb + 1 << " outside the " << d
         << "-level system";
      throw InvalidArgument(os.str());
    }
    ad.state_a = sys.state_of_level[la];
    ad.state_b = sys.state_of_level[lb];
  } else {
    const double f = *ev.frequency_mhz;
    const double window = std::max(3.0 * ev.rabi_mhz, 1e-6);
    const double cmax = c_eig.cwiseAbs().maxCoeff();
    double best_df = 0.0, best_c = 0.0;
    for (int s = 0; s < d; ++s) {
      for (int t = s + 1; t < d; ++t) {
        const double c = std::abs(c_eig(s, t));
        if (c <= 1e-9 * cmax) continue;
        const double df = std::abs(rad_per_s_to_mhz(sys.eig.values(t) - sys.eig.values(s)) - f);
        if (df > window) continue;
        const bool better = ad.state_a < 0 || df < best_df - 1e-9 || (std::abs(df - best_df) <= 1e-9 && c > best_c);
        if (better) {
          ad.state_a = s;
          ad.state_b = t;
          best_df = df;
          best_c = c;
        }
      }
    }
    if (ad.state_a < 0) return std::nullopt;
  }
  const double e_a = sys.eig.values(ad.state_a), e_b = sys.eig.values(ad.state_b);
  const double f_ab = rad_per_s_to_mhz(std::abs(e_b - e_a));
  ad.freq_mhz = ev.frequency_mhz.value_or(f_ab);
  const double delta = mhz_to_rad_per_s(ad.freq_mhz - f_ab);
  ad.detuning = e_a < e_b ? delta : -delta;
  ad.coupling = std::abs(c_eig(ad.state_a, ad.state_b));
  return ad;
}

// Rotating-frame pulse propagator in the eigenbasis.
Operator pulse_unitary_eig(int d, const Addressed& ad, const PulseEvent& ev) {
  const Eigen::Matrix2cd u2 = subspace_propagator(ad.detuning, ev.rabi_mhz * 1e6, ev.phase, ev.duration_s);
  Operator u = identity(d);
  const int idx[2] = {ad.state_a, ad.state_b};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) u(idx[r], idx[c]) = u2(r, c);
  return u;
}

Operator free_unitary(const SpinSystem& sys, double t) {
  Eigen::VectorXcd ph(sys.dim());
  for (int k = 0; k < sys.dim(); ++k) ph(k) = std::exp(Complex(0.0, -sys.eig.values(k) * t));
  return sys.eig.vectors * ph.asDiagonal() * sys.eig.vectors.adjoint();
}

// Optical pumping into m_s = 0 with the nuclear state untouched.
Operator laser_reset(const SpinSystem& sys, const Operator& rho) {
  const auto& lv = sys.basis.levels;
  const int d = sys.dim();
  std::vector<int> target(d);
  for (int i = 0; i < d; ++i) {
    target[i] = -1;
    for (int j = 0; j < d; ++j) {
      if (lv[j].ms == 0 && lv[j].m_i == lv[i].m_i) target[i] = j;
    }
  }
  Operator out = Operator::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (lv[i].ms == lv[j].ms) out(target[i], target[j]) += rho(i, j);
  return out;
}

struct Recorder {
  const SpinSystem& sys;
  TimeTrace trace;
  explicit Recorder(const SpinSystem& s) : sys(s) {
    for (const auto& l : s.basis.levels) trace.labels.push_back(l.label);
    trace.labels.push_back("ms0");
    trace.series.resize(trace.labels.size());
  }
  void operator()(const Operator& rho, double t) {
    trace.times.push_back(t);
    double p0 = 0.0;
    for (int k = 0; k < sys.dim(); ++k) {
      const double p = rho(k, k).real();
      trace.series[k].push_back(p);
      if (sys.basis.levels[k].ms == 0) p0 += p;
    }
    trace.series.back().push_back(p0);
  }
};

const char* kOffResonant = "off-resonant pulse has negligible effect";

std::string at_line(const PulseEvent& ev, const std::string& msg) {
  if (ev.line == 0) return msg;
  return "line " + std::to_string(ev.line) + ": " + msg;
}

Operator lab_pulse(const SpinSystem& sys, const Operator& rho, const Addressed& ad, const PulseEvent& ev,
                   const Operator& c) {
  require(ad.coupling > 0.0, "lab frame: addressed transition has no drive matrix element");
  const double amp = kTwoPi * ev.rabi_mhz * 1e6 / ad.coupling;
  const double w = mhz_to_rad_per_s(ad.freq_mhz);
  const double periods = ev.duration_s * ad.freq_mhz * 1e6;
  const long n = std::max<long>(400, static_cast<long>(std::ceil(periods * 200.0)));
  const double dt = ev.duration_s / static_cast<double>(n);
  Operator r = rho;
  for (long k = 0; k < n; ++k) {
    const double tm = (static_cast<double>(k) + 0.5) * dt;
    const Operator h = sys.h + amp * std::cos(w * tm + ev.phase) * c;
    const Operator u = unitary_propagator(h, dt);
    r = u * r * u.adjoint();
  }
  return r;
}

}  // namespace

SimulationResult simulate_sequence(const PulseSequence& seq, const SpinHamiltonianParams& params,
                                   const DensityMatrix& initial, Frame frame) {
  seq.validate();
  const SpinSystem sys = SpinSystem::build(params);
  require(initial.dim() == sys.dim(), "initial state dimension does not match the spin system");
  SimulationResult res{initial, {}, {}};
  Recorder rec(sys);
  Operator rho = initial.matrix();
  double t = 0.0;
  rec(rho, t);
  for (const auto& ev : seq.events) {
    switch (ev.kind) {
      case EventKind::MwPulse:
      case EventKind::RfPulse: {
        const Operator c = drive_operator(params, ev.kind);
        const Operator c_eig = sys.eig.vectors.adjoint() * c * sys.eig.vectors;
        const auto ad = address(sys, ev, c_eig);
        if (!ad) {
          res.warnings.push_back(at_line(ev, kOffResonant));
          const Operator u = free_unitary(sys, ev.duration_s);
          rho = u * rho * u.adjoint();
        } else if (frame == Frame::Rotating) {
          const Operator u = sys.eig.vectors * pulse_unitary_eig(sys.dim(), *ad, ev) * sys.eig.vectors.adjoint();
          rho = u * rho * u.adjoint();
        } else {
          rho = lab_pulse(sys, rho, *ad, ev, c);
        }
        break;
      }
      case EventKind::Delay: {
        const Operator u = free_unitary(sys, ev.duration_s);
        rho = u * rho * u.adjoint();
        break;
      }
      case EventKind::LaserInit:
        rho = laser_reset(sys, rho);
        break;
      case EventKind::LaserReadout:
        break;
    }
    t += ev.duration_s;
    rec(rho, t);
  }
  res.final_state = make_trusted_density(rho);
  res.trace = std::move(rec.trace);
  return res;
}

SimulationResult simulate_sequence_open(const PulseSequence& seq, const SpinHamiltonianParams& params,
                                        const DensityMatrix& initial, const OpenSystemOptions& options) {
  seq.validate();
  require(options.electron_dephasing >= 0.0, "dephasing rate must be >= 0");
  const SpinSystem sys = SpinSystem::build(params);
  const int d = sys.dim();
  require(initial.dim() == d, "initial state dimension does not match the spin system");
  const Operator& v = sys.eig.vectors;

  // Everything below runs in the eigenbasis.
  Operator proj = Operator::Zero(d, d);
  for (int k = 0; k < d; ++k)
    if (sys.basis.levels[sys.level_of_state[k]].ms != 0) proj(k, k) = 1.0;
  std::vector<CollapseChannel> channels;
  if (options.electron_dephasing > 0.0) channels.push_back({proj, 2.0 * options.electron_dephasing});

  auto evolve = [&](const Operator& rho, const Operator& h, double t) {
    if (channels.empty()) {
      const Operator u = unitary_propagator(h, t);
      return Operator(u * rho * u.adjoint());
    }
    const double dt_max = 0.5 * max_stable_dt(h, channels);
    const long steps = std::max<long>(1, static_cast<long>(std::ceil(t / dt_max)));
    return lindblad_evolve(make_trusted_density(rho), h, channels, t / static_cast<double>(steps), steps)
        .final_state.matrix();
  };

  SimulationResult res{initial, {}, {}};
  Recorder rec(sys);
  Operator rho = v.adjoint() * initial.matrix() * v;
  double t = 0.0;
  rec(v * rho * v.adjoint(), t);
  const Operator h_free = sys.eig.values.cast<Complex>().asDiagonal();
  for (const auto& ev : seq.events) {
    if (ev.is_pulse()) {
      const Operator c_eig = v.adjoint() * drive_operator(params, ev.kind) * v;
      const auto ad = address(sys, ev, c_eig);
      if (!ad) {
        res.warnings.push_back(at_line(ev, kOffResonant));
        rho = evolve(rho, h_free, ev.duration_s);
      } else {
        const Complex i(0.0, 1.0);
        const double w = M_PI * ev.rabi_mhz * 1e6;
        Operator h = Operator::Zero(d, d);
        h(ad->state_a, ad->state_a) = 0.5 * ad->detuning;
        h(ad->state_b, ad->state_b) = -0.5 * ad->detuning;
        h(ad->state_a, ad->state_b) = w * std::exp(-i * ev.phase);
        h(ad->state_b, ad->state_a) = w * std::exp(i * ev.phase);
        rho = evolve(rho, h, ev.duration_s);
      }
    } else if (ev.kind == EventKind::Delay) {
      rho = evolve(rho, h_free, ev.duration_s);
    } else if (ev.kind == EventKind::LaserInit) {
      rho = v.adjoint() * laser_reset(sys, v * rho * v.adjoint()) * v;
    }
    t += ev.duration_s;
    rec(v * rho * v.adjoint(), t);
  }
  res.final_state = make_trusted_density(v * rho * v.adjoint());
  res.trace = std::move(rec.trace);
  return res;
}

double effective_rabi_mhz(const SpinSystem& system, int level_a, int level_b, double b1_mt) {
  require(b1_mt >= 0.0, "drive amplitude must be >= 0");
  const Operator c = drive_operator(system.params, EventKind::RfPulse);
  const StateVector a = system.eigenstate(level_a), b = system.eigenstate(level_b);
  return std::abs((a.adjoint() * c * b)(0, 0)) * b1_mt;
}

TimeTrace rabi_trace(const SpinHamiltonianParams& params, double rabi_mhz, double t_max_s, int n_points,
                     double dephasing_rate) {
  params.validate();
  require(rabi_mhz > 0.0, "rabi frequency must be > 0");
  require(t_max_s > 0.0, "t_max must be > 0");
  require(n_points >= 2, "need at least two points");
  require(dephasing_rate >= 0.0, "dephasing rate must be >= 0");
  const double sample = t_max_s / (n_points - 1);
  const double rabi_hz = rabi_mhz * 1e6;
  if (sample > 1.0 / (8.0 * rabi_hz)) {
    std::ostringstream os;
    os << "sampling too coarse: " << 1.0 / (sample * rabi_hz)
       << " points per Rabi period, at least 8 required";
    throw InvalidArgument(os.str());
  }
  // Basis {m_s = 0, m_s = -1} in the rotating frame, resonant drive.
  Operator h(2, 2);
  h << 0.0, M_PI * rabi_hz, M_PI * rabi_hz, 0.0;
  Operator p1 = Operator::Zero(2, 2);
  p1(1, 1) = 1.0;
  Operator p0 = Operator::Zero(2, 2);
  p0(0, 0) = 1.0;
  // A projector channel of rate 4g damps the driven population oscillation at g.
  std::vector<CollapseChannel> ch;
  if (dephasing_rate > 0.0) ch.push_back({p1, 4.0 * dephasing_rate});
  const double dt_max = 0.5 * max_stable_dt(h, ch);
  const long sub = std::max<long>(1, static_cast<long>(std::ceil(sample / dt_max)));
  const double dt = sample / static_cast<double>(sub);
  auto res = lindblad_evolve(DensityMatrix::basis_state(2, 0), h, ch, dt, sub * (n_points - 1),
                             {{"p0", p0}}, sub);
  return res.trace;
}

ManifoldSplittings manifold_splittings(const SpinHamiltonianParams& params) {
  const SpinSystem sys = SpinSystem::build(params);
  ManifoldSplittings out;
  for (int ms : {0, -1}) {
    std::vector<double> e;
    for (int k = 0; k < sys.dim(); ++k)
      if (sys.basis.levels[sys.level_of_state[k]].ms == ms) e.push_back(sys.eig.values(k));
    auto& dst = ms == 0 ? out.ms0 : out.ms_minus1;
    for (std::size_t i = 0; i < e.size(); ++i)
      for (std::size_t j = i + 1; j < e.size(); ++j) dst.push_back(rad_per_s_to_mhz(std::abs(e[j] - e[i])));
    std::sort(dst.begin(), dst.end());
  }
  return out;
}

EchoResult hahn_echo_trace(const SpinHamiltonianParams& params, const std::vector<double>& taus) {
  require(!taus.empty(), "echo needs at least one delay");
  for (double tau : taus) require(tau >= 0.0, "echo delays must be >= 0");
  const SpinSystem sys = SpinSystem::build(params);
  const int d = sys.dim();
  const auto& lv = sys.basis.levels;
  EchoResult out;

  if (params.nuclei.empty()) {
    out.warnings.push_back("no nuclear spin: the echo is unmodulated");
  } else {
    const bool zero_field = params.b0[0] == 0.0 && params.b0[1] == 0.0 && params.b0[2] == 0.0;
    bool isotropic = true;
    for (const auto& n : params.nuclei)
      isotropic = isotropic && n.a_parallel == n.a_perp && n.quadrupole_p == 0.0;
    if (zero_field && isotropic)
      out.warnings.push_back("isotropic hyperfine coupling at zero field: no echo modulation expected");
  }

  // Electron 0 <-> -1 flip on every nuclear state, and the coherence readout.
  Operator x = Operator::Zero(d, d);
  Operator coh = Operator::Zero(d, d);
  Operator rho0 = Operator::Zero(d, d);
  int n0 = 0;
  for (int i = 0; i < d; ++i) {
    if (lv[i].ms == 0) {
      rho0(i, i) = 1.0;
      ++n0;
    }
    for (int j = 0; j < d; ++j) {
      if (lv[i].ms == 0 && lv[j].ms == -1 && lv[i].m_i == lv[j].m_i) {
        x(i, j) = x(j, i) = 1.0;
        coh(j, i) = 1.0;
      }
    }
  }
  rho0 /= static_cast<double>(n0);
  const Operator u90 = unitary_propagator(x, M_PI / 4.0);
  const Operator u180 = unitary_propagator(x, M_PI / 2.0);
  const Operator r1 = u90 * rho0 * u90.adjoint();
  const double norm = std::abs((r1 * coh).trace());

  out.trace.labels = {"echo"};
  out.trace.series.resize(1);
  double lo = 1e300, hi = -1e300;
  for (double tau : taus) {
    const Operator uf = free_unitary(sys, tau);
    const Operator u = uf * u180 * uf;
    const double e = std::abs((u * r1 * u.adjoint() * coh).trace()) / norm;
    out.trace.times.push_back(tau);
    out.trace.series[0].push_back(e);
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  out.modulation_depth = hi - lo;
  return out;
}

std::vector<double> spectral_peaks(const std::vector<double>& signal, double sample_interval_s, int max_peaks,
                                   double min_relative_height) {
  require(signal.size() >= 4, "spectrum needs at least 4 samples");
  require(sample_interval_s > 0.0, "sample interval must be > 0");
  const std::size_t n = signal.size();
  std::size_t nfft = 1;
  while (nfft < 8 * n) nfft <<= 1;
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> padded(nfft, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    // Hann window keeps leakage from masking weaker lines.
    const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n - 1));
    padded[k] = (signal[k] - mean) * w;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  std::vector<double> mag(nfft / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spec[k]);
  const double top = *std::max_element(mag.begin(), mag.end());
  if (top == 0.0) return {};
  std::vector<std::pair<double, double>> peaks;  // (height, freq)
  const double df = 1.0 / (static_cast<double>(nfft) * sample_interval_s);
  for (std::size_t k = 1; k + 1 < mag.size(); ++k) {
    if (mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] >= min_relative_height * top) {
      const double a = mag[k - 1], b = mag[k], c = mag[k + 1];
      const double denom = a - 2.0 * b + c;
      const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
      peaks.emplace_back(b, (static_cast<double>(k) + shift) * df * 1e-6);
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const auto& p, const auto& q) { return p.first > q.first; });
  std::vector<double> out;
  for (const auto& p : peaks) {
    if (static_cast<int>(out.size()) >= max_peaks) break;
    out.push_back(p.second);
  }
  return out;
}

}  // namespace nvsim
