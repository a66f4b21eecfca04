#include "nvsim/qops.hpp"

#include "nvsim/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nvsim {

namespace {

void require_square(const Operator& m, const char* what) {
  require(m.rows() > 0 && m.rows() == m.cols(),
          std::string(what) + " must be a non-empty square matrix");
  require(m.rows() <= kMaxDim * kMaxDim, std::string(what) + " dimension too large");
}

Operator hermitize(const Operator& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

bool is_hermitian(const Operator& h, double rel_tol) {
  if (h.rows() != h.cols()) return false;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  return (h - h.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

DensityMatrix::DensityMatrix(Operator m) : m_(std::move(m)) {
  require_square(m_, "density matrix");
  require(m_.rows() <= kMaxDim, "density matrix dimension exceeds 16");
  require((m_ - m_.adjoint()).cwiseAbs().maxCoeff() < 1e-10, "density matrix is not Hermitian");
  require(std::abs(m_.trace() - Complex(1.0)) < 1e-9, "density matrix trace differs from 1");
  m_ = hermitize(m_);
  require(min_eigenvalue() >= -1e-9, "density matrix has a negative eigenvalue");
}

DensityMatrix::DensityMatrix(Operator m, Trusted) : m_(hermitize(m)) {}

DensityMatrix make_trusted_density(Operator m) {
  return DensityMatrix(std::move(m), DensityMatrix::Trusted{});
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  require(psi.size() > 0 && psi.size() <= kMaxDim, "state vector dimension out of range");
  const double n = psi.norm();
  require(n > 0.0, "state vector is zero");
  const StateVector v = psi / n;
  return DensityMatrix(v * v.adjoint());
}

DensityMatrix DensityMatrix::basis_state(int dim, int k) {
  require(k >= 0 && k < dim, "basis index out of range");
  Operator m = Operator::Zero(dim, dim);
  m(k, k) = 1.0;
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  require(dim > 0, "dimension must be positive");
  return DensityMatrix(identity(dim) / static_cast<double>(dim));
}

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Operator> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double DensityMatrix::fidelity_with(const StateVector& psi) const {
  require(psi.size() == m_.rows(), "state dimension mismatch");
  return (psi.adjoint() * m_ * psi)(0, 0).real();
}

const std::vector<double>& TimeTrace::column(const std::string& label) const {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == label) return series[k];
  }
  throw InvalidArgument("no series named '" + label + "' in trace");
}

Operator identity(int dim) { return Operator::Identity(dim, dim); }

Operator kron(const Operator& a, const Operator& b) {
  require_square(a, "kron operand");
  require_square(b, "kron operand");
  const auto da = a.rows();
  const auto db = b.rows();
  Operator out(da * db, da * db);
  for (Eigen::Index i = 0; i < da; ++i) {
    for (Eigen::Index j = 0; j < da; ++j) {
      out.block(i * db, j * db, db, db) = a(i, j) * b;
    }
  }
  return out;
}

Operator kron(const std::vector<Operator>& factors) {
  require(!factors.empty(), "kron of an empty list");
  Operator out = factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k]);
  return out;
}

Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

double spectral_norm(const Operator& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Operator> svd(a);
  return svd.singularValues()(0);
}

EigenSystem eig_hermitian(const Operator& h) {
  require_square(h, "Hamiltonian");
  require(is_hermitian(h, 1e-12), "eig_hermitian: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(h));
  if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

Operator unitary_propagator(const Operator& h, double t) {
  const EigenSystem es = eig_hermitian(h);
  Eigen::VectorXcd phases(es.values.size());
  for (Eigen::Index k = 0; k < es.values.size(); ++k) {
    phases(k) = std::exp(Complex(0.0, -es.values(k) * t));
  }
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

DensityMatrix unitary_evolve(const DensityMatrix& rho, const Operator& h, double t) {
  require(t >= 0.0, "unitary_evolve: negative time");
  require(h.rows() == rho.dim(), "unitary_evolve: dimension mismatch");
  if (t == 0.0) return rho;
  const Operator u = unitary_propagator(h, t);
  return make_trusted_density(u * rho.matrix() * u.adjoint());
}

Operator lindblad_rhs(const Operator& rho, const Operator& h,
                      const std::vector<CollapseChannel>& channels) {
  const Complex minus_i(0.0, -1.0);
  Operator out = minus_i * commutator(h, rho);
  for (const auto& ch : channels) {
    if (ch.rate == 0.0) continue;
    const Operator ldag_l = ch.op.adjoint() * ch.op;
    out += ch.rate * (ch.op * rho * ch.op.adjoint() - 0.5 * (ldag_l * rho + rho * ldag_l));
  }
  return out;
}

double max_stable_dt(const Operator& h, const std::vector<CollapseChannel>& channels) {
  double scale = spectral_norm(h);
  for (const auto& ch : channels) {
    const double n = spectral_norm(ch.op);
    scale = std::max(scale, ch.rate * n * n);
  }
  if (scale == 0.0) return std::numeric_limits<double>::infinity();
  return 0.1 / scale;
}

LindbladResult lindblad_evolve(const DensityMatrix& rho, const Operator& h,
                               const std::vector<CollapseChannel>& channels, double dt,
                               long steps, const std::vector<Observable>& observables,
                               long record_every) {
  require(dt > 0.0, "lindblad_evolve: dt must be positive");
  require(steps >= 0, "lindblad_evolve: negative step count");
  require(record_every >= 1, "lindblad_evolve: record_every must be >= 1");
  require(h.rows() == rho.dim() && h.cols() == rho.dim(), "lindblad_evolve: dimension mismatch");
  require(is_hermitian(h, 1e-12), "lindblad_evolve: Hamiltonian is not Hermitian");
  for (const auto& ch : channels) {
    require(ch.rate >= 0.0, "lindblad_evolve: negative channel rate");
    require(ch.op.rows() == rho.dim() && ch.op.cols() == rho.dim(),
            "lindblad_evolve: channel dimension mismatch");
  }
  const double dt_max = max_stable_dt(h, channels);
  if (!(dt < dt_max)) {
    std::ostringstream os;
    os << "lindblad_evolve: dt=" << dt << " s violates the stability guard; use dt <= "
       << 0.5 * dt_max << " s";
    throw InvalidArgument(os.str());
  }

  TimeTrace trace;
  for (const auto& ob : observables) trace.labels.push_back(ob.label);
  trace.series.resize(observables.size());
  auto record = [&](const Operator& r, double t) {
    trace.times.push_back(t);
    for (std::size_t k = 0; k < observables.size(); ++k) {
      trace.series[k].push_back((observables[k].op * r).trace().real());
    }
  };

  // For a linear generator one RK4 step is the truncated Taylor polynomial of
  // dt*L, so build that step matrix once and reuse it.
  const auto d = rho.dim();
  const Eigen::MatrixXcd l = dt * liouvillian(h, channels);
  Eigen::MatrixXcd step = Eigen::MatrixXcd::Identity(d * d, d * d);
  Eigen::MatrixXcd term = step;
  for (int k = 1; k <= 4; ++k) {
    term = (term * l) / static_cast<double>(k);
    step += term;
  }
  auto power = [](Eigen::MatrixXcd base, long n) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(base.rows(), base.cols());
    while (n > 0) {
      if (n & 1) out = out * base;
      base = base * base;
      n >>= 1;
    }
    return out;
  };
  auto unvec = [d](const Eigen::VectorXcd& v) {
    Operator m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = v(i * d + j);
    return m;
  };
  Eigen::VectorXcd v(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) v(i * d + j) = rho(i, j);

  if (!observables.empty()) record(rho.matrix(), 0.0);
  const long stride = observables.empty() ? std::max(steps, 1L) : record_every;
  const Eigen::MatrixXcd block = power(step, stride);
  long n = 0;
  while (n + stride <= steps) {
    v = block * v;
    n += stride;
    if (!observables.empty()) record(unvec(v), static_cast<double>(n) * dt);
  }
  if (n < steps) {
    v = power(step, steps - n) * v;
    n = steps;
    if (!observables.empty()) record(unvec(v), static_cast<double>(n) * dt);
  }
  return {make_trusted_density(unvec(v)), std::move(trace)};
}

Eigen::MatrixXcd liouvillian(const Operator& h, const std::vector<CollapseChannel>& channels) {
  const auto d = h.rows();
  const Operator id = identity(static_cast<int>(d));
  // Row-major vec: vec(A X B) = (A kron B^T) vec(X).
  const Complex minus_i(0.0, -1.0);
  Eigen::MatrixXcd l = minus_i * (kron(h, id) - kron(id, h.transpose()));
  for (const auto& ch : channels) {
    if (ch.rate == 0.0) continue;
    const Operator ldag_l = ch.op.adjoint() * ch.op;
    l += ch.rate * (kron(ch.op, ch.op.conjugate()) - 0.5 * kron(ldag_l, id) -
                    0.5 * kron(id, ldag_l.transpose()));
  }
  return l;
}

DensityMatrix lindblad_steady_state(const Operator& h,
                                    const std::vector<CollapseChannel>& channels) {
  const auto d = h.rows();
  const Eigen::MatrixXcd l = liouvillian(h, channels);
  Eigen::MatrixXcd a(d * d + 1, d * d);
  a.topRows(d * d) = l;
  a.row(d * d).setZero();
  for (Eigen::Index i = 0; i < d; ++i) a(d * d, i * d + i) = 1.0;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(d * d + 1);
  b(d * d) = 1.0;
  // Scale the generator rows so the trace row is not swamped.
  const double s = std::max(1.0, l.cwiseAbs().maxCoeff());
  a.topRows(d * d) /= s;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < d * d) throw NumericalError("Lindblad steady state is not unique");
  const Eigen::VectorXcd v = qr.solve(b);
  Operator rho(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) rho(i, j) = v(i * d + j);
  return make_trusted_density(std::move(rho));
}

}  // namespace nvsim
