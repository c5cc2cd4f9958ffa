#pragma once

// Core scalar/matrix types, tolerance policy, error taxonomy and small
// dense-matrix helpers shared by every other header.

#include <Eigen/Dense>

#include <complex>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qdeco {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

// Centralized numeric tolerances. Tests may tighten or loosen these
// uniformly through the mutable singleton below.
struct NumericPolicy {
  double hermiticity = 1e-12;   // relative Hermitian-defect tolerance
  double psd_slack = 1e-12;     // eigenvalues above -psd_slack count as >= 0
  double faithfulness = 1e-10;  // smallest eigenvalue above this => faithful
  double equality = 1e-8;       // generic relative equality of derived identities
  double kernel_cut = 1e-10;    // relative singular-value cutoff for nullspaces
  double dd_degeneracy = 1e-10; // divided-difference collision threshold
  double log_floor = 1e-14;     // eigenvalue floor inside log of near-singular states
};

inline NumericPolicy& policy() {
  static NumericPolicy p;
  return p;
}

// ---------------------------------------------------------------------------
// Errors

// Input violates a precondition (dimension mismatch, bad parameter, ...).
struct RejectedInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Operand lies outside the mathematical domain of the operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A structural assumption of the theory failed numerically
// (no faithful invariant state, decomposition leakage, ...).
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small helpers

inline double frobenius(const Matrix& a) { return a.norm(); }

inline Matrix identity(Eigen::Index d) { return Matrix::Identity(d, d); }

inline Matrix matrix_unit(Eigen::Index d, Eigen::Index i, Eigen::Index j) {
  Matrix e = Matrix::Zero(d, d);
  e(i, j) = 1.0;
  return e;
}

inline double hermitian_defect(const Matrix& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Matrix& a, double rel_tol = policy().hermiticity) {
  if (a.rows() != a.cols()) return false;
  return hermitian_defect(a) <= rel_tol * std::max(1.0, frobenius(a));
}

inline Matrix hermitize(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

// Column-stacking vectorization: vec(ABC) = (C^T otimes A) vec(B).
inline Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index d) {
  return Eigen::Map<const Matrix>(v.data(), d, d);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      c.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return c;
}

// Partial traces on H_A otimes H_B with dim(H_A)=da, dim(H_B)=db.
inline Matrix partial_trace_second(const Matrix& m, Eigen::Index da, Eigen::Index db) {
  Matrix out = Matrix::Zero(da, da);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j)
      for (Eigen::Index k = 0; k < db; ++k)
        out(i, j) += m(i * db + k, j * db + k);
  return out;
}

inline Matrix partial_trace_first(const Matrix& m, Eigen::Index da, Eigen::Index db) {
  Matrix out = Matrix::Zero(db, db);
  for (Eigen::Index k = 0; k < db; ++k)
    for (Eigen::Index l = 0; l < db; ++l)
      for (Eigen::Index i = 0; i < da; ++i)
        out(k, l) += m(i * db + k, i * db + l);
  return out;
}

inline double trace_norm(const Matrix& a) {
  if (is_hermitian(a, 1e-10)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(a));
    return es.eigenvalues().cwiseAbs().sum();
  }
  return a.jacobiSvd().singularValues().sum();
}

// ---------------------------------------------------------------------------
// Seeded sampling (property tests and optimizer starts)

using Rng = std::mt19937_64;

inline Matrix random_ginibre(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = Complex(n(rng), n(rng));
  return g;
}

// Full-rank state G G* / Tr(G G*) with complex Ginibre G.
inline Matrix random_state(Eigen::Index d, Rng& rng) {
  Matrix g = random_ginibre(d, rng);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return hermitize(rho);
}

inline Matrix random_hermitian(Eigen::Index d, Rng& rng) {
  return hermitize(random_ginibre(d, rng)) * std::sqrt(0.5);
}

// Random Hermitian with spectrum inside [lo, hi].
inline Matrix random_hermitian_spectrum(Eigen::Index d, double lo, double hi, Rng& rng) {
  Matrix h = random_hermitian(d, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  RealVector ev = es.eigenvalues();
  double a = ev.minCoeff(), b = ev.maxCoeff();
  double span = std::max(b - a, 1e-12);
  RealVector mapped = (ev.array() - a) / span * (hi - lo) + lo;
  return hermitize(es.eigenvectors() * mapped.asDiagonal().toDenseMatrix().cast<Complex>() *
                   es.eigenvectors().adjoint());
}

inline Matrix random_pure_state(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector psi(d);
  for (Eigen::Index i = 0; i < d; ++i) psi(i) = Complex(n(rng), n(rng));
  psi.normalize();
  return psi * psi.adjoint();
}

// ---------------------------------------------------------------------------
// Data-parallel map over an index range. Thread count is capped by the
// QMS_DECO_THREADS environment variable; results are slot-assigned so the
// outcome does not depend on scheduling.
inline unsigned max_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("QMS_DECO_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned nt = std::min<std::size_t>(max_threads(), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (unsigned t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nt) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace qdeco
