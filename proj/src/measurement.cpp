#include "nvsim/measurement.hpp"

#include "nvsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nvsim {

double TelegraphRates::stationary_bright() const {
  const double s = bright_to_dark + dark_to_bright;
  return s > 0.0 ? dark_to_bright / s : 1.0;
}

TelegraphRates telegraph_rates(const PhotophysicsRates& rates, double optical_flip_rate) {
  rates.validate();
  require(optical_flip_rate >= 0.0, "optical flip rate must be >= 0");
  return {2.0 * rates.r_slr + optical_flip_rate, rates.r_slr + optical_flip_rate};
}

bool TelegraphPath::bright_at(double t) const {
  const auto n = std::upper_bound(switch_times.begin(), switch_times.end(), t) - switch_times.begin();
  return (n % 2 == 0) == start_bright;
}

double TelegraphPath::bright_time(double t0, double t1) const {
  double total = 0.0;
  double cursor = t0;
  bool bright = bright_at(t0);
  auto it = std::upper_bound(switch_times.begin(), switch_times.end(), t0);
  for (; it != switch_times.end() && *it < t1; ++it) {
    if (bright) total += *it - cursor;
    cursor = *it;
    bright = !bright;
  }
  if (bright) total += t1 - cursor;
  return total;
}

void TelegraphPath::dwells(std::vector<double>& bright, std::vector<double>& dark) const {
  bright.clear();
  dark.clear();
  double last = 0.0;
  bool state = start_bright;
  for (double t : switch_times) {
    (state ? bright : dark).push_back(t - last);
    last = t;
    state = !state;
  }
}

TelegraphPath simulate_telegraph(const TelegraphRates& flips, double duration, std::uint64_t seed,
                                 bool start_bright) {
  require(flips.bright_to_dark >= 0.0 && flips.dark_to_bright >= 0.0, "flip rates must be >= 0");
  require(duration > 0.0, "duration must be > 0");
  std::mt19937_64 rng(seed);
  TelegraphPath path;
  path.start_bright = start_bright;
  path.duration = duration;
  bool bright = start_bright;
  double t = 0.0;
  for (;;) {
    const double rate = bright ? flips.bright_to_dark : flips.dark_to_bright;
    if (rate <= 0.0) break;
    t += std::exponential_distribution<double>(rate)(rng);
    if (t >= duration) break;
    path.switch_times.push_back(t);
    bright = !bright;
  }
  return path;
}

TimeTrace jump_trace(const TelegraphRates& flips, double bright_cps, double dark_cps, double duration,
                     double bin, std::uint64_t seed) {
  require(bin > 0.0, "bin must be > 0");
  require(dark_cps >= 0.0 && bright_cps > dark_cps, "need bright_cps > dark_cps >= 0");
  require(duration >= bin, "duration must cover at least one bin");
  // Path and photon counts draw from separate streams so each is reproducible.
  const TelegraphPath path = simulate_telegraph(flips, duration, seed, true);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const long n = static_cast<long>(std::floor(duration / bin + 1e-9));
  TimeTrace tr;
  tr.labels = {"counts", "bright_fraction"};
  tr.series.resize(2);
  tr.seed = seed;
  tr.bin = bin;
  for (long k = 0; k < n; ++k) {
    const double t0 = static_cast<double>(k) * bin;
    const double tb = path.bright_time(t0, t0 + bin);
    const double mean = bright_cps * tb + dark_cps * (bin - tb);
    tr.times.push_back(t0);
    tr.series[0].push_back(static_cast<double>(std::poisson_distribution<long>(mean)(rng)));
    tr.series[1].push_back(tb / bin);
  }
  return tr;
}

TimeTrace jump_trace(const PhotophysicsRates& rates, double bright_cps, double dark_cps, double duration,
                     double bin, std::uint64_t seed, double optical_flip_rate) {
  return jump_trace(telegraph_rates(rates, optical_flip_rate), bright_cps, dark_cps, duration, bin, seed);
}

long Histogram::total() const {
  long s = 0;
  for (long f : frequencies) s += f;
  return s;
}

void ReadoutModel::validate() const {
  require(dark_cps >= 0.0 && bright_cps >= dark_cps, "need bright_cps >= dark_cps >= 0");
  require(window > 0.0, "readout window must be > 0");
  require(flip_probability >= 0.0 && flip_probability < 1.0, "flip probability must lie in [0, 1)");
}

Histogram readout_histogram(const ReadoutModel& model, long n_windows, std::uint64_t seed) {
  model.validate();
  require(n_windows >= 1, "need at least one readout window");
  std::mt19937_64 rng(seed);
  const double flip_rate = -std::log1p(-model.flip_probability) / model.window;
  std::vector<long> counts(static_cast<std::size_t>(n_windows));
  long max_count = 0;
  for (auto& c : counts) {
    double t_bright = model.window;
    if (flip_rate > 0.0) t_bright = std::min(model.window, std::exponential_distribution<double>(flip_rate)(rng));
    const double mean = model.bright_cps * t_bright + model.dark_cps * (model.window - t_bright);
    c = std::poisson_distribution<long>(mean)(rng);
    max_count = std::max(max_count, c);
  }
  Histogram h;
  h.acquisition_bin = model.window;
  h.seed = seed;
  h.reference_bright = model.bright_cps * model.window;
  h.reference_dark = model.dark_cps * model.window;
  h.frequencies.assign(static_cast<std::size_t>(max_count) + 1, 0);
  for (long c : counts) ++h.frequencies[static_cast<std::size_t>(c)];
  for (long k = 0; k <= max_count + 1; ++k) h.bin_edges.push_back(static_cast<double>(k));
  return h;
}

namespace {

struct Component {
  double mean = 0.0;
  double var = 1.0;
  double weight = 0.5;

  double pmf(double n, ComponentModel m) const {
    if (m == ComponentModel::Poisson) {
      if (mean <= 0.0) return n == 0.0 ? 1.0 : 0.0;
      return std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
    }
    return std::exp(-0.5 * (n - mean) * (n - mean) / var) / std::sqrt(2.0 * M_PI * var);
  }
};

}  // namespace

ReadoutFidelity readout_fidelity(const Histogram& h, ComponentModel model) {
  require(!h.frequencies.empty() && h.bin_edges.size() == h.frequencies.size() + 1,
          "histogram edges and frequencies are inconsistent");
  const long total = h.total();
  require(total > 0, "histogram is empty");
  std::vector<double> x, f;
  for (std::size_t k = 0; k < h.frequencies.size(); ++k) {
    if (h.frequencies[k] == 0) continue;
    x.push_back(std::floor(0.5 * (h.bin_edges[k] + h.bin_edges[k + 1])));
    f.push_back(static_cast<double>(h.frequencies[k]));
  }
  const double lo = x.front(), hi = x.back();

  Component on, off;
  on.mean = h.reference_bright.value_or(hi);
  off.mean = h.reference_dark.value_or(lo);
  on.var = std::max(1.0, on.mean);
  off.var = std::max(1.0, off.mean);
  on.weight = 0.9;
  off.weight = 0.1;

  ReadoutFidelity out;
  double last_ll = -1e300;
  for (int it = 0; it < 2000; ++it) {
    double s_on = 0, s_off = 0, m_on = 0, m_off = 0, q_on = 0, q_off = 0, ll = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double a = on.weight * on.pmf(x[k], model);
      const double b = off.weight * off.pmf(x[k], model);
      const double s = a + b;
      if (s <= 0.0) continue;
      ll += f[k] * std::log(s);
      const double r = a / s;
      s_on += f[k] * r;
      s_off += f[k] * (1.0 - r);
      m_on += f[k] * r * x[k];
      m_off += f[k] * (1.0 - r) * x[k];
    }
    if (s_on > 0) on.mean = m_on / s_on;
    if (s_off > 0) off.mean = m_off / s_off;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double a = on.weight * on.pmf(x[k], model);
      const double b = off.weight * off.pmf(x[k], model);
      const double s = a + b;
      if (s <= 0.0) continue;
      const double r = a / s;
      q_on += f[k] * r * (x[k] - on.mean) * (x[k] - on.mean);
      q_off += f[k] * (1.0 - r) * (x[k] - off.mean) * (x[k] - off.mean);
    }
    if (s_on > 0) on.var = std::max(0.25, q_on / s_on);
    if (s_off > 0) off.var = std::max(0.25, q_off / s_off);
    on.weight = s_on / static_cast<double>(total);
    off.weight = s_off / static_cast<double>(total);
    if (std::abs(ll - last_ll) < 1e-10 * std::max(1.0, std::abs(ll))) {
      out.converged = true;
      break;
    }
    last_ll = ll;
  }
  if (on.mean < off.mean) std::swap(on, off);

  const bool resolved = out.converged && on.weight > 1e-3 && off.weight > 1e-3 && on.mean - off.mean >= 1.0;
  if (resolved) {
    out.threshold = std::ceil(on.mean);
    for (double n = std::ceil(off.mean); n <= std::floor(on.mean); n += 1.0) {
      if (on.weight * on.pmf(n, model) >= off.weight * off.pmf(n, model)) {
        out.threshold = n;
        break;
      }
    }
    double peak = 0.0;
    for (double n = lo; n <= hi; n += 1.0) peak = std::max(peak, on.weight * on.pmf(n, model));
    out.wing_ratio = peak > 0.0 ? off.weight * off.pmf(out.threshold, model) / peak : 0.0;
  } else {
    out.fallback = true;
    const double b = h.reference_bright.value_or(hi), d = h.reference_dark.value_or(lo);
    out.threshold = std::ceil(0.5 * (b + d));
  }
  double above = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] >= out.threshold) above += f[k];
  out.fidelity = above / static_cast<double>(total);
  out.on_mean = on.mean;
  out.off_mean = off.mean;
  out.on_weight = on.weight;
  out.off_weight = off.weight;
  out.peak_ratio = on.weight / (on.weight + off.weight);
  return out;
}

double calibrate_flip_probability(const ReadoutModel& base, double target_fidelity, long n_windows,
                                  std::uint64_t seed) {
  require(target_fidelity > 0.5 && target_fidelity < 1.0, "target fidelity must lie in (0.5, 1)");
  auto fidelity_at = [&](double p) {
    ReadoutModel m = base;
    m.flip_probability = p;
    return readout_fidelity(readout_histogram(m, n_windows, seed)).fidelity;
  };
  double lo = 0.0, hi = 0.5;
  require(fidelity_at(hi) < target_fidelity, "target fidelity is below the p = 0.5 value");
  // Same seed at every probe, so the fidelity is a step function of p.
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fidelity_at(mid) >= target_fidelity ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double ZenoParams::p_step() const {
  const double a = lambda * total_time / static_cast<double>(n_measurements);
  return a * a;
}

void ZenoParams::validate() const {
  require(n_measurements >= 1, "Zeno: need N >= 1");
  require(lambda >= 0.0 && total_time >= 0.0, "Zeno: lambda and T must be >= 0");
  require(p_step() <= 0.5, "Zeno: p = (lambda T / N)^2 exceeds 1/2");
}

double zeno_survival_discrete(const ZenoParams& z) {
  z.validate();
  return 0.5 * (1.0 + std::pow(1.0 - 2.0 * z.p_step(), static_cast<double>(z.n_measurements)));
}

double zeno_survival_continuous(const ZenoParams& z) {
  require(z.n_measurements >= 1, "Zeno: need N >= 1");
  const double lt = z.lambda * z.total_time;
  return 0.5 * (1.0 + std::exp(-2.0 * lt * lt / static_cast<double>(z.n_measurements)));
}

DampingModel rabi_damping_model(double pump_rate, const PhotophysicsRates& rates,
                                const DampingSettings& settings) {
  rates.validate();
  require(pump_rate >= 0.0, "pump rate must be >= 0");
  require(settings.rabi_mhz > 0.0, "rabi must be > 0");
  require(settings.intrinsic_dephasing >= 0.0, "intrinsic dephasing must be >= 0");
  // 0: g(m_s=0)  1: g(m_s=-1)  2: e(0)  3: e(-1)  4: singlet
  auto op = [](std::initializer_list<std::pair<int, int>> to_from) {
    Operator l = Operator::Zero(5, 5);
    for (const auto& [to, from] : to_from) l(to, from) = 1.0;
    return l;
  };
  DampingModel m;
  m.h = Operator::Zero(5, 5);
  // The microwave drives the spin in either orbital state.
  m.h(0, 1) = m.h(1, 0) = M_PI * settings.rabi_mhz * 1e6;
  m.h(2, 3) = m.h(3, 2) = M_PI * settings.rabi_mhz * 1e6;
  m.channels = {
      // The optical cycle itself conserves the spin, coherence included.
      {op({{2, 0}, {3, 1}}), pump_rate},
      {op({{0, 2}, {1, 3}}), rates.a_rad},
      {op({{4, 2}}), rates.k_s_z},
      {op({{4, 3}}), rates.k_s_xy},
      {op({{0, 4}}), rates.k_z},
      {op({{1, 4}}), rates.k_d()},
      // A projector channel of rate 4g gives a driven envelope decaying at g.
      {op({{1, 1}}), 4.0 * settings.intrinsic_dephasing},
  };
  return m;
}

std::vector<DampingPoint> rabi_damping_vs_power(const std::vector<double>& pump_rates,
                                                const PhotophysicsRates& rates, const DampingSettings& settings) {
  require(!pump_rates.empty(), "need at least one pump rate");
  for (std::size_t k = 0; k < pump_rates.size(); ++k) {
    require(pump_rates[k] >= 0.0, "pump rates must be >= 0");
    if (k > 0) require(pump_rates[k] > pump_rates[k - 1], "pump rates must be ascending");
  }
  require(settings.samples_per_period >= 8, "need at least 8 samples per Rabi period");
  const double period = 1.0 / (settings.rabi_mhz * 1e6);
  const int spp = settings.samples_per_period;
  const double sample = period / spp;
  // Spin signal: m_s = 0 population in the ground and excited states.
  Operator p0 = Operator::Zero(5, 5);
  p0(0, 0) = 1.0;
  p0(2, 2) = 1.0;

  std::vector<DampingPoint> out;
  for (double w : pump_rates) {
    const DampingModel m = rabi_damping_model(w, rates, settings);
    const double dt_max = 0.5 * max_stable_dt(m.h, m.channels);
    const long sub = std::max<long>(1, static_cast<long>(std::ceil(sample / dt_max)));
    const double dt = sample / static_cast<double>(sub);

    // Peak-to-trough amplitude of every Rabi period, chunk by chunk, until it
    // has fallen by e^3 or the period budget runs out.
    std::vector<double> t_mid, amp;
    DensityMatrix rho = DensityMatrix::basis_state(5, 0);
    const long chunk = 512;
    const long max_periods = 1L << 22;
    double t0 = 0.0;
    double a0 = -1.0;
    for (long done = 0; done < max_periods; done += chunk) {
      auto res = lindblad_evolve(rho, m.h, m.channels, dt, sub * spp * chunk, {{"p0", p0}}, sub);
      const auto& s = res.trace.series[0];
      for (long p = 0; p < chunk; ++p) {
        const auto b = s.begin() + p * spp;
        const auto [mn, mx] = std::minmax_element(b, b + spp + 1);
        t_mid.push_back(t0 + (static_cast<double>(p) + 0.5) * period);
        amp.push_back(*mx - *mn);
      }
      if (a0 < 0.0) a0 = amp.front();
      rho = res.final_state;
      t0 += static_cast<double>(chunk) * period;
      if (amp.back() < a0 * std::exp(-3.0)) break;
    }
    // Least-squares slope of log amplitude over the part above e^-3.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (std::size_t k = 0; k < amp.size(); ++k) {
      if (amp[k] < a0 * std::exp(-3.0) || amp[k] <= 0.0) break;
      const double y = std::log(amp[k]);
      sx += t_mid[k];
      sy += y;
      sxx += t_mid[k] * t_mid[k];
      sxy += t_mid[k] * y;
      ++n;
    }
    DampingPoint pt;
    pt.pump_rate = w;
    const double den = static_cast<double>(n) * sxx - sx * sx;
    if (n < 3 || den <= 0.0 || amp.back() > a0 * std::exp(-1.0)) {
      pt.flagged = true;
    } else {
      pt.damping_rate = -(static_cast<double>(n) * sxy - sx * sy) / den;
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace nvsim
