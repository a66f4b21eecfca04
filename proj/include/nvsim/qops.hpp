#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace nvsim {

using Complex = std::complex<double>;

/// Dense complex square matrix. Hamiltonians are stored in rad/s.
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Largest Hilbert-space dimension the engine accepts.
inline constexpr int kMaxDim = 16;

bool is_hermitian(const Operator& h, double rel_tol = 1e-12);

/// Trace-one, Hermitian, positive semidefinite matrix.
class DensityMatrix {
 public:
  /// Validates the invariants; throws InvalidArgument if any fails.
  explicit DensityMatrix(Operator m);

  static DensityMatrix pure(const StateVector& psi);
  /// |k><k| in a dim-dimensional space.
  static DensityMatrix basis_state(int dim, int k);
  static DensityMatrix maximally_mixed(int dim);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Operator& matrix() const { return m_; }
  Complex operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }
  double purity() const { return (m_ * m_).trace().real(); }
  double population(int k) const { return m_(k, k).real(); }
  double min_eigenvalue() const;
  Complex expectation(const Operator& op) const { return (op * m_).trace(); }
  /// <psi|rho|psi> for a normalized psi.
  double fidelity_with(const StateVector& psi) const;

 private:
  struct Trusted {};
  DensityMatrix(Operator m, Trusted);
  friend DensityMatrix make_trusted_density(Operator m);

  Operator m_;
};

/// Hermitizes without validating; for engine-internal results whose
/// invariants are tested rather than enforced.
DensityMatrix make_trusted_density(Operator m);

struct CollapseChannel {
  Operator op;
  double rate = 0.0;  // 1/s
};

/// Sampled observables on a time axis. Also the output type of the stochastic
/// readout model, which fills seed and bin.
struct TimeTrace {
  std::vector<double> times;  // s
  std::vector<std::string> labels;
  std::vector<std::vector<double>> series;  // series[k][i] belongs to labels[k], times[i]
  std::uint64_t seed = 0;
  double bin = 0.0;  // s, zero when not binned

  std::size_t size() const { return times.size(); }
  const std::vector<double>& column(const std::string& label) const;
};

struct EigenSystem {
  Eigen::VectorXd values;  // ascending
  Operator vectors;        // columns are eigenvectors
};

Operator identity(int dim);
Operator kron(const Operator& a, const Operator& b);
/// Kronecker product of a list, left to right.
Operator kron(const std::vector<Operator>& factors);
Operator commutator(const Operator& a, const Operator& b);
/// Operator 2-norm.
double spectral_norm(const Operator& a);

EigenSystem eig_hermitian(const Operator& h);

/// exp(-i h t) for Hermitian h, through the eigendecomposition.
Operator unitary_propagator(const Operator& h, double t);
DensityMatrix unitary_evolve(const DensityMatrix& rho, const Operator& h, double t);

/// Right-hand side of the Lindblad equation, d rho / dt.
Operator lindblad_rhs(const Operator& rho, const Operator& h,
                      const std::vector<CollapseChannel>& channels);

/// Recommended largest dt for the fixed-step integrator.
double max_stable_dt(const Operator& h, const std::vector<CollapseChannel>& channels);

struct Observable {
  std::string label;
  Operator op;
};

struct LindbladResult {
  DensityMatrix final_state;
  TimeTrace trace;
};

/// Fixed-step RK4 integration of the Lindblad equation. Observables are
/// recorded at t=0 and every record_every steps (and at the final step).
LindbladResult lindblad_evolve(const DensityMatrix& rho, const Operator& h,
                               const std::vector<CollapseChannel>& channels, double dt,
                               long steps, const std::vector<Observable>& observables = {},
                               long record_every = 1);

/// Row-major vectorization superoperator L with d vec(rho)/dt = L vec(rho),
/// vec(rho)[i*d + j] = rho(i, j).
Eigen::MatrixXcd liouvillian(const Operator& h, const std::vector<CollapseChannel>& channels);

/// Stationary state of the Lindblad generator (null vector with unit trace).
DensityMatrix lindblad_steady_state(const Operator& h,
                                    const std::vector<CollapseChannel>& channels);

}  // namespace nvsim
