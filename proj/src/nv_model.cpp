#include "nvsim/nv_model.hpp"

#include "nvsim/error.hpp"
#include "nvsim/units.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace nvsim {

namespace {

std::string format_m(double m, bool half_integer) {
  std::ostringstream os;
  if (half_integer) {
    const int twice = static_cast<int>(std::lround(2.0 * m));
    os << (twice >= 0 ? "+" : "-") << std::abs(twice) << "/2";
  } else {
    const int v = static_cast<int>(std::lround(m));
    os << (v > 0 ? "+" : (v < 0 ? "-" : "")) << std::abs(v);
  }
  return os.str();
}

}  // namespace

std::string to_string(NuclearSpecies s) { return s == NuclearSpecies::N14 ? "N14" : "C13"; }

NuclearSpecies nuclear_species_from_string(const std::string& s) {
  if (s == "N14" || s == "14N") return NuclearSpecies::N14;
  if (s == "C13" || s == "13C") return NuclearSpecies::C13;
  throw InvalidArgument("unknown nuclear species '" + s + "' (expected N14 or C13)");
}

NucleusSpec NucleusSpec::n14() { return {}; }

NucleusSpec NucleusSpec::c13() { return c13_isotropic(kC13DefaultCouplingMHz); }

NucleusSpec NucleusSpec::c13_isotropic(double a_mhz) {
  NucleusSpec n;
  n.species = NuclearSpecies::C13;
  n.spin = 0.5;
  n.a_parallel = a_mhz;
  n.a_perp = a_mhz;
  n.quadrupole_p = 0.0;
  n.gamma_n = 0.010705;
  return n;
}

void NucleusSpec::validate() const {
  require(spin == 0.5 || spin == 1.0, "nucleus: unsupported nuclear spin (expected 1/2 or 1)");
  require(spin == 1.0 || quadrupole_p == 0.0, "nucleus: quadrupole_p must be 0 unless I = 1");
  require(std::isfinite(a_parallel) && std::isfinite(a_perp) && std::isfinite(gamma_n),
          "nucleus: couplings must be finite");
}

void SpinHamiltonianParams::validate() const {
  require(d > 0.0, "D must be > 0");
  require(e >= 0.0, "E must be >= 0");
  require(!c3v_symmetry || e == 0.0, "E must be 0 under C3v symmetry");
  require(gamma_e > 0.0, "gamma_e must be > 0");
  for (double b : b0) require(std::isfinite(b), "B0 components must be finite");
  int dim = 3;
  for (const auto& n : nuclei) {
    n.validate();
    dim *= n.multiplicity();
  }
  require(dim <= kMaxDim, "ground space exceeds 16 levels; use fewer nuclei");
}

void PhotophysicsRates::validate() const {
  for (double r : {a_rad, k_s_xy, k_s_z, k_x, k_y, k_z, r_slr}) {
    require(std::isfinite(r) && r >= 0.0, "photophysics rates must be >= 0");
  }
  require(quantum_yield >= 0.0 && quantum_yield <= 1.0, "quantum_yield must be in [0,1]");
  require(detection_eff >= 0.0 && detection_eff <= 1.0, "detection_eff must be in [0,1]");
}

int LevelBasis::index_of(const std::string& label) const {
  for (int i = 0; i < dim(); ++i) {
    if (levels[i].label == label) return i;
  }
  throw InvalidArgument("unknown level label '" + label + "'");
}

LevelBasis ground_basis(const SpinHamiltonianParams& params) {
  LevelBasis basis;
  basis.factor_dims.push_back(3);
  for (const auto& n : params.nuclei) basis.factor_dims.push_back(n.multiplicity());

  std::vector<BasisLevel> levels;
  for (int ms : {1, 0, -1}) {
    BasisLevel l;
    l.ms = ms;
    l.label = "ms=" + format_m(ms, false);
    levels.push_back(l);
  }
  for (const auto& n : params.nuclei) {
    std::vector<BasisLevel> next;
    for (const auto& l : levels) {
      for (int k = 0; k < n.multiplicity(); ++k) {
        const double m = n.spin - k;
        BasisLevel nl = l;
        nl.m_i.push_back(m);
        nl.label += ",mI=" + format_m(m, n.spin == 0.5);
        next.push_back(nl);
      }
    }
    levels = std::move(next);
  }
  basis.levels = std::move(levels);
  return basis;
}

SpinOperators spin_operators(double s) {
  const int dim = static_cast<int>(2.0 * s + 1.5);
  Operator sp = Operator::Zero(dim, dim);
  Operator sz = Operator::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double m = s - k;
    sz(k, k) = m;
    if (k > 0) sp(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const Operator sm = sp.adjoint();
  const Complex i(0.0, 1.0);
  return {0.5 * (sp + sm), -0.5 * i * (sp - sm), sz};
}

namespace {

// Embeds op acting on factor `slot` into the tensor product of dims.
Operator embed(const Operator& op, std::size_t slot, const std::vector<int>& dims) {
  std::vector<Operator> factors;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    factors.push_back(k == slot ? op : identity(dims[k]));
  }
  return kron(factors);
}

std::vector<int> factor_dims(const SpinHamiltonianParams& p) {
  std::vector<int> dims{3};
  for (const auto& n : p.nuclei) dims.push_back(n.multiplicity());
  return dims;
}

}  // namespace

SpinOperators electron_operators(const SpinHamiltonianParams& params) {
  const auto dims = factor_dims(params);
  const SpinOperators s = spin_operators(1.0);
  return {embed(s.x, 0, dims), embed(s.y, 0, dims), embed(s.z, 0, dims)};
}

SpinOperators nuclear_operators(const SpinHamiltonianParams& params, std::size_t k) {
  require(k < params.nuclei.size(), "nucleus index out of range");
  const auto dims = factor_dims(params);
  const SpinOperators s = spin_operators(params.nuclei[k].spin);
  return {embed(s.x, k + 1, dims), embed(s.y, k + 1, dims), embed(s.z, k + 1, dims)};
}

Operator ground_hamiltonian(const SpinHamiltonianParams& params) {
  params.validate();
  const SpinOperators s = electron_operators(params);
  const int dim = static_cast<int>(s.z.rows());
  const auto& b = params.b0;

  Operator h = Operator::Zero(dim, dim);
  h += params.gamma_e * (b[0] * s.x + b[1] * s.y + b[2] * s.z);
  h += params.d * (s.z * s.z - (2.0 / 3.0) * identity(dim));
  h += params.e * (s.x * s.x - s.y * s.y);
  for (std::size_t k = 0; k < params.nuclei.size(); ++k) {
    const auto& n = params.nuclei[k];
    const SpinOperators i = nuclear_operators(params, k);
    h += n.a_perp * (s.x * i.x + s.y * i.y) + n.a_parallel * s.z * i.z;
    if (n.quadrupole_p != 0.0) {
      h += n.quadrupole_p * (i.z * i.z - (n.spin * (n.spin + 1.0) / 3.0) * identity(dim));
    }
    h -= n.gamma_n * (b[0] * i.x + b[1] * i.y + b[2] * i.z);
  }
  return units::mhz_to_rad_per_s(1.0) * h;
}

std::vector<std::string> eigenstate_labels(const EigenSystem& es, const LevelBasis& basis) {
  require(es.vectors.rows() == basis.dim(), "basis dimension mismatch");
  std::vector<std::string> labels;
  for (Eigen::Index k = 0; k < es.vectors.cols(); ++k) {
    Eigen::Index best = 0;
    es.vectors.col(k).cwiseAbs2().maxCoeff(&best);
    labels.push_back(basis.levels[best].label);
  }
  return labels;
}

namespace {

int dominant_level(const Operator& vectors, Eigen::Index col) {
  Eigen::Index best = 0;
  vectors.col(col).cwiseAbs2().maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

std::vector<Transition> transition_table(const Operator& h, const LevelBasis& basis,
                                         const SelectionRule& rule) {
  require(h.rows() == basis.dim(), "transition_table: basis dimension mismatch");
  require(!basis.factor_dims.empty(), "transition_table: basis has no spin structure");
  const EigenSystem es = eig_hermitian(h);
  const auto labels = eigenstate_labels(es, basis);

  std::vector<Operator> factors{spin_operators(1.0).x};
  for (std::size_t k = 1; k < basis.factor_dims.size(); ++k) {
    factors.push_back(identity(basis.factor_dims[k]));
  }
  const Operator sx = kron(factors);
  const Operator sx_eig = es.vectors.adjoint() * sx * es.vectors;

  std::vector<Transition> all;
  const int n = basis.dim();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double f = units::rad_per_s_to_mhz(es.values(j) - es.values(i));
      if (f <= 1e-9) continue;
      Transition t;
      t.freq_mhz = f;
      t.strength = std::norm(sx_eig(i, j));
      t.from_state = i;
      t.to_state = j;
      t.from_label = labels[i];
      t.to_label = labels[j];
      all.push_back(t);
    }
  }
  double max_strength = 0.0;
  for (const auto& t : all) max_strength = std::max(max_strength, t.strength);

  std::vector<Transition> kept;
  for (const auto& t : all) {
    if (rule.kind == SelectionRule::Kind::Esr) {
      if (t.strength < rule.min_relative_strength * max_strength) continue;
      const auto& a = basis.levels[dominant_level(es.vectors, t.from_state)];
      const auto& b = basis.levels[dominant_level(es.vectors, t.to_state)];
      if (std::abs(a.ms - b.ms) != 1) continue;
    }
    kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Transition& a, const Transition& b) { return a.freq_mhz < b.freq_mhz; });
  return kept;
}

LevelBasis optical_basis() {
  LevelBasis b;
  const char* names[] = {"g+1", "g0", "g-1", "e+1", "e0", "e-1", "singlet"};
  const int ms[] = {1, 0, -1, 1, 0, -1, 0};
  for (int k = 0; k < kOpticalLevels; ++k) b.levels.push_back({names[k], ms[k], {}});
  return b;
}

RateMatrix optical_rate_matrix(const PhotophysicsRates& rates, double pump_rate,
                               const PumpSelection& pump) {
  rates.validate();
  require(std::isfinite(pump_rate) && pump_rate >= 0.0, "pump rate W must be >= 0");
  RateMatrix m = RateMatrix::Zero(kOpticalLevels, kOpticalLevels);
  auto add = [&m](int from, int to, double rate) {
    m(to, from) += rate;
    m(from, from) -= rate;
  };
  const bool pumped[] = {pump.plus, pump.zero, pump.minus};
  for (int k = 0; k < 3; ++k) {
    if (pumped[k]) add(kGroundPlus + k, kExcitedPlus + k, pump_rate);
    add(kExcitedPlus + k, kGroundPlus + k, rates.a_rad);
  }
  add(kExcitedPlus, kSinglet, rates.k_s_xy);
  add(kExcitedMinus, kSinglet, rates.k_s_xy);
  add(kExcitedZero, kSinglet, rates.k_s_z);
  add(kSinglet, kGroundPlus, rates.k_x);
  add(kSinglet, kGroundMinus, rates.k_y);
  add(kSinglet, kGroundZero, rates.k_z);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a != b) add(kGroundPlus + a, kGroundPlus + b, rates.r_slr);
    }
  }
  return m;
}

namespace {

// Number of closed communicating classes of the transition graph and one
// member of the first such class.
std::pair<int, int> closed_classes(const RateMatrix& q) {
  const int n = static_cast<int>(q.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int s = 0; s < n; ++s) {
    std::vector<int> stack{s};
    reach[s][s] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (v != u && q(u, v) > 0.0 && !reach[s][v]) {
          reach[s][v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  // A state is recurrent iff everything it reaches can reach it back.
  std::vector<int> cls(n, -1);
  int count = 0;
  int representative = -1;
  for (int s = 0; s < n; ++s) {
    bool recurrent = true;
    for (int v = 0; v < n && recurrent; ++v) {
      if (reach[s][v] && !reach[v][s]) recurrent = false;
    }
    if (!recurrent || cls[s] >= 0) continue;
    for (int v = 0; v < n; ++v) {
      if (reach[s][v]) cls[v] = count;
    }
    if (representative < 0) representative = s;
    ++count;
  }
  return {count, representative};
}

}  // namespace

Eigen::VectorXd steady_state(const RateMatrix& m) {
  require(m.rows() == m.cols() && m.rows() > 0, "steady_state: matrix must be square");
  const int n = static_cast<int>(m.rows());
  const double scale = m.cwiseAbs().maxCoeff();
  for (int j = 0; j < n; ++j) {
    require(std::abs(m.col(j).sum()) <= 1e-12 * std::max(1.0, scale) * n,
            "steady_state: columns must sum to zero");
    for (int i = 0; i < n; ++i) {
      require(i == j || m(i, j) >= 0.0, "steady_state: negative off-diagonal rate");
    }
  }
  // Row convention generator: q(i, j) = rate i -> j.
  const RateMatrix q = m.transpose();
  const auto [count, rep] = closed_classes(q);
  if (count != 1) {
    throw NumericalError("steady_state: degenerate null space (" + std::to_string(count) +
                         " closed classes)");
  }
  // Put a recurrent state first so every eliminated state has a path to it.
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  std::swap(order[0], order[rep]);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = q(order[i], order[j]);

  // Grassmann-Taksar-Heyman state reduction: subtraction-free, so small
  // stationary probabilities keep full relative accuracy.
  for (int k = n - 1; k >= 1; --k) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += a(k, j);
    if (!(s > 0.0)) throw NumericalError("steady_state: degenerate null space");
    for (int i = 0; i < k; ++i) a(i, k) /= s;
    for (int i = 0; i < k; ++i) {
      if (a(i, k) == 0.0) continue;
      for (int j = 0; j < k; ++j) {
        if (i != j) a(i, j) += a(i, k) * a(k, j);
      }
    }
  }
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
  pi(0) = 1.0;
  for (int j = 1; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < j; ++i) acc += pi(i) * a(i, j);
    pi(j) = acc;
  }
  pi /= pi.sum();
  Eigen::VectorXd out(n);
  for (int k = 0; k < n; ++k) out(order[k]) = pi(k);
  return out;
}

Eigen::VectorXd evolve_populations(const RateMatrix& m, const Eigen::VectorXd& p0, double t,
                                   long steps) {
  require(m.rows() == p0.size(), "evolve_populations: dimension mismatch");
  require(t >= 0.0 && steps >= 1, "evolve_populations: need t >= 0 and steps >= 1");
  const double dt = t / static_cast<double>(steps);
  Eigen::VectorXd p = p0;
  for (long n = 0; n < steps; ++n) {
    const Eigen::VectorXd k1 = m * p;
    const Eigen::VectorXd k2 = m * (p + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = m * (p + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = m * (p + dt * k3);
    p += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return p;
}

double excited_decay_flux(const PhotophysicsRates& rates, const Eigen::VectorXd& pops) {
  require(pops.size() == kOpticalLevels, "expected a seven-level population vector");
  return rates.a_rad * (pops(kExcitedPlus) + pops(kExcitedZero) + pops(kExcitedMinus));
}

double emitted_photon_flux(const PhotophysicsRates& rates, const Eigen::VectorXd& pops) {
  return rates.quantum_yield * excited_decay_flux(rates, pops);
}

SaturatedIntensity saturated_intensity(const PhotophysicsRates& rates, double isc_rate) {
  rates.validate();
  require(rates.r_slr > 0.0, "saturated_intensity: R = 0 makes the formula singular");
  require(isc_rate >= 0.0, "saturated_intensity: ISC rate must be >= 0");
  require(rates.k_t() > 0.0, "saturated_intensity: k_T must be > 0");
  const double a = rates.a_rad;
  const double r = rates.r_slr;
  SaturatedIntensity out;
  out.emitted = a / (4.0 + (isc_rate * rates.k_d() + r) / (r * rates.k_t()));
  if (isc_rate > 0.0) {
    out.low_t_approx = r * a / isc_rate;
    if (rates.k_d() > 0.0) out.low_t_branching = r * a * rates.k_t() / (isc_rate * rates.k_d());
  }
  out.detected = out.emitted * rates.quantum_yield * rates.detection_eff;
  return out;
}

SaturatedIntensity saturated_intensity(const PhotophysicsRates& rates) {
  return saturated_intensity(rates, rates.k_s_z);
}

double pump_rate_from_intensity(double kw_per_cm2, double wavelength_nm) {
  require(kw_per_cm2 >= 0.0, "laser intensity must be >= 0");
  require(wavelength_nm > 0.0, "wavelength must be > 0");
  constexpr double kCrossSectionCm2 = 1e-16;
  constexpr double kPlanck = 6.62607015e-34;
  constexpr double kLightSpeed = 2.99792458e8;
  const double photon_energy = kPlanck * kLightSpeed / (wavelength_nm * 1e-9);
  return kCrossSectionCm2 * kw_per_cm2 * 1e3 / photon_energy;
}

}  // namespace nvsim
