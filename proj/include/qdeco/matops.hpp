#pragma once

// Dense Hermitian matrix core: spectral calculus, divided-difference
// functional calculus (Daleckii-Krein), the log-divided-difference inversion
// map, and the weighted inner products used throughout.

#include "qdeco/numeric.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>

namespace qdeco {

// ---------------------------------------------------------------------------
// Density matrices

struct DensityMatrix {
  Matrix mat;
  bool faithful = false;

  Eigen::Index dim() const { return mat.rows(); }
};

/// Validates Hermiticity, unit trace and positivity, and tags faithfulness.
inline DensityMatrix make_density(const Matrix& rho) {
  const auto& p = policy();
  if (rho.rows() != rho.cols()) throw RejectedInput("density matrix must be square");
  if (!is_hermitian(rho)) throw RejectedInput("density matrix must be Hermitian");
  if (std::abs(rho.trace().real() - 1.0) > 1e-12 || std::abs(rho.trace().imag()) > 1e-12)
    throw RejectedInput("density matrix must have unit trace");
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(rho));
  double lo = es.eigenvalues().minCoeff();
  if (lo < -p.psd_slack)
    throw RejectedInput("density matrix has negative eigenvalue " + std::to_string(lo));
  return DensityMatrix{hermitize(rho), lo > p.faithfulness};
}

inline DensityMatrix maximally_mixed(Eigen::Index d) {
  return DensityMatrix{Matrix::Identity(d, d) / static_cast<double>(d), true};
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition

struct HermitianEig {
  RealVector values;  // ascending
  Matrix vectors;     // unitary, columns are eigenvectors
};

inline HermitianEig eig_hermitian(const Matrix& a) {
  if (a.rows() != a.cols()) throw RejectedInput("eig_hermitian: matrix must be square");
  if (!is_hermitian(a))
    throw RejectedInput("eig_hermitian: Hermitian defect " + std::to_string(hermitian_defect(a)) +
                        " exceeds tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(a));
  if (es.info() != Eigen::Success) throw StructuralError("eig_hermitian: solver failed");
  return HermitianEig{es.eigenvalues(), es.eigenvectors()};
}

// ---------------------------------------------------------------------------
// Scalar functions with derivative, for spectral calculus

struct ScalarFunction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  // Spectral domain: eigenvalues must exceed this bound (strictly).
  double domain_min = -std::numeric_limits<double>::infinity();
};

namespace sf {

inline ScalarFunction identity() {
  return {"x", [](double x) { return x; }, [](double) { return 1.0; }};
}
inline ScalarFunction square() {
  return {"x^2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }};
}
inline ScalarFunction cube() {
  return {"x^3", [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; }};
}
inline ScalarFunction sqrt() {
  return {"sqrt", [](double x) { return std::sqrt(x); },
          [](double x) { return 0.5 / std::sqrt(x); }, 0.0};
}
inline ScalarFunction log() {
  return {"log", [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; }, 0.0};
}
inline ScalarFunction exp() {
  return {"exp", [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }};
}
inline ScalarFunction xlogx() {
  return {"x*log(x)", [](double x) { return x * std::log(x); },
          [](double x) { return std::log(x) + 1.0; }, 0.0};
}
inline ScalarFunction power(double p) {
  ScalarFunction s{"x^" + std::to_string(p), [p](double x) { return std::pow(x, p); },
                   [p](double x) { return p * std::pow(x, p - 1.0); }};
  if (p < 1.0 || p != std::floor(p)) s.domain_min = 0.0;
  return s;
}
inline ScalarFunction inverse() {
  return {"1/x", [](double x) { return 1.0 / x; }, [](double x) { return -1.0 / (x * x); }, 0.0};
}

}  // namespace sf

inline void check_spectral_domain(const ScalarFunction& f, const RealVector& ev) {
  if (f.domain_min == -std::numeric_limits<double>::infinity()) return;
  // Domain-restricted f (log, fractional powers, 1/x) needs strict positivity.
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) <= std::max(f.domain_min, policy().psd_slack))
      throw DomainError("matfunc(" + f.name + "): eigenvalue " + std::to_string(ev(i)) +
                        " outside domain");
}

/// Spectral calculus: V diag(f(lambda)) V* for Hermitian input.
inline Matrix matfunc(const Matrix& a, const ScalarFunction& f) {
  HermitianEig eig = eig_hermitian(a);
  check_spectral_domain(f, eig.values);
  RealVector fv(eig.values.size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f.f(eig.values(i));
  return hermitize(eig.vectors * fv.asDiagonal().toDenseMatrix().cast<Complex>() *
                   eig.vectors.adjoint());
}

inline Matrix mat_log(const Matrix& a) { return matfunc(a, sf::log()); }
inline Matrix mat_sqrt(const Matrix& a) { return matfunc(a, sf::sqrt()); }
inline Matrix mat_pow(const Matrix& a, double p) { return matfunc(a, sf::power(p)); }

// Log with an eigenvalue floor, for states that are only numerically faithful.
// Returns the flag telling whether the floor was hit.
inline std::pair<Matrix, bool> mat_log_floored(const Matrix& a) {
  HermitianEig eig = eig_hermitian(a);
  bool floored = false;
  RealVector fv(eig.values.size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) {
    double x = eig.values(i);
    if (x < policy().log_floor) {
      x = policy().log_floor;
      floored = true;
    }
    fv(i) = std::log(x);
  }
  Matrix out = hermitize(eig.vectors * fv.asDiagonal().toDenseMatrix().cast<Complex>() *
                         eig.vectors.adjoint());
  return {out, floored};
}

// ---------------------------------------------------------------------------
// Divided-difference functional calculus

/// pi_{X,Y}(f~) . Z  in the eigenbases of X (left) and Y (right):
///   out = U ( M o (U* Z W) ) W*,  M_ab = (f(x_a)-f(y_b))/(x_a-y_b),
/// switching to f'(x_a) on near-collisions (Daleckii-Krein practice).
inline Matrix divided_difference_rep(const Matrix& x, const Matrix& y, const ScalarFunction& f,
                                     const Matrix& z) {
  HermitianEig ex = eig_hermitian(x);
  HermitianEig ey = eig_hermitian(y);
  check_spectral_domain(f, ex.values);
  check_spectral_domain(f, ey.values);
  if (z.rows() != x.rows() || z.cols() != y.rows())
    throw RejectedInput("divided_difference_rep: dimension mismatch");

  const Eigen::Index n = ex.values.size(), m = ey.values.size();
  RealMatrix dd(n, m);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double xa = ex.values(a), fxa = f.f(xa);
    for (Eigen::Index b = 0; b < m; ++b) {
      const double yb = ey.values(b);
      if (std::abs(xa - yb) <= policy().dd_degeneracy * std::max(1.0, std::abs(xa)))
        dd(a, b) = f.df(xa);
      else
        dd(a, b) = (fxa - f.f(yb)) / (xa - yb);
    }
  }
  Matrix core = ex.vectors.adjoint() * z * ey.vectors;
  core = core.cwiseProduct(dd.cast<Complex>());
  return ex.vectors * core * ey.vectors.adjoint();
}

/// Theta_sigma(Z) = int_0^inf (t+sigma)^{-1} Z (t+sigma)^{-1} dt, evaluated
/// as the log divided-difference kernel in sigma's eigenbasis.
inline Matrix theta_map(const DensityMatrix& sigma, const Matrix& z) {
  if (!sigma.faithful) throw DomainError("theta_map: weight state must be faithful");
  return divided_difference_rep(sigma.mat, sigma.mat, sf::log(), z);
}

// ---------------------------------------------------------------------------
// Weighted inner products

enum class InnerKind { KMS, GNS, HS };

struct WeightedInner {
  DensityMatrix sigma;
  InnerKind kind = InnerKind::KMS;
};

/// <X,Y>: KMS = Tr[s^{1/2} X* s^{1/2} Y], GNS = Tr[s X* Y], HS = Tr[X* Y].
inline Complex weighted_inner(const WeightedInner& w, const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw RejectedInput("weighted_inner: dimension mismatch");
  switch (w.kind) {
    case InnerKind::HS:
      return (x.adjoint() * y).trace();
    case InnerKind::GNS:
      return (w.sigma.mat * x.adjoint() * y).trace();
    case InnerKind::KMS: {
      Matrix r = mat_sqrt(w.sigma.mat);
      return (r * x.adjoint() * r * y).trace();
    }
  }
  throw RejectedInput("weighted_inner: unknown kind");
}

inline double weighted_norm2(const WeightedInner& w, const Matrix& x) {
  return weighted_inner(w, x, x).real();
}

}  // namespace qdeco
