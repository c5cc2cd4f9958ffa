#pragma once

// GKSL generators: Heisenberg/Schrodinger action, superoperator
// representations, semigroup evaluation, invariant states, weighted adjoints,
// reversibility / detailed-balance checks, and the modular-eigenvector
// derivation decomposition available under detailed balance.

#include "qdeco/matops.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace qdeco {

struct Lindbladian {
  Eigen::Index dim = 0;
  Matrix hamiltonian;
  std::vector<Matrix> jumps;
};

inline Lindbladian make_lindbladian(const Matrix& h, std::vector<Matrix> jumps) {
  const Eigen::Index d = h.rows();
  if (h.cols() != d) throw RejectedInput("hamiltonian must be square");
  if (!is_hermitian(h)) throw RejectedInput("hamiltonian must be Hermitian");
  for (const auto& l : jumps)
    if (l.rows() != d || l.cols() != d) throw RejectedInput("jump operator dimension mismatch");
  return Lindbladian{d, hermitize(h), std::move(jumps)};
}

/// L(X) = i[H,X] + sum_k (L_k* X L_k - 1/2 {L_k* L_k, X}).
inline Matrix apply_generator(const Lindbladian& gen, const Matrix& x) {
  if (x.rows() != gen.dim || x.cols() != gen.dim)
    throw RejectedInput("apply_generator: dimension mismatch");
  Matrix out = kI * (gen.hamiltonian * x - x * gen.hamiltonian);
  for (const auto& l : gen.jumps) {
    Matrix ll = l.adjoint() * l;
    out += l.adjoint() * x * l - 0.5 * (ll * x + x * ll);
  }
  return out;
}

/// Predual: L_*(rho) = -i[H,rho] + sum_k (L_k rho L_k* - 1/2 {L_k* L_k, rho}).
inline Matrix apply_predual(const Lindbladian& gen, const Matrix& rho) {
  if (rho.rows() != gen.dim || rho.cols() != gen.dim)
    throw RejectedInput("apply_predual: dimension mismatch");
  Matrix out = -kI * (gen.hamiltonian * rho - rho * gen.hamiltonian);
  for (const auto& l : gen.jumps) {
    Matrix ll = l.adjoint() * l;
    out += l * rho * l.adjoint() - 0.5 * (ll * rho + rho * ll);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Superoperators (column-stacking vectorization)

enum class Picture { Heisenberg, Schrodinger };

struct Superoperator {
  Eigen::Index dim = 0;  // Hilbert space dimension; matrix is dim^2 x dim^2
  Matrix mat;

  Matrix apply(const Matrix& x) const { return unvec(mat * vec(x), dim); }
};

inline Superoperator to_superoperator(const Lindbladian& gen, Picture which) {
  const Eigen::Index d = gen.dim;
  const Matrix id = identity(d);
  Matrix ham = kron(id, gen.hamiltonian) - kron(gen.hamiltonian.transpose(), id);
  Matrix s = (which == Picture::Heisenberg ? kI : -kI) * ham;
  for (const auto& l : gen.jumps) {
    Matrix ll = l.adjoint() * l;
    s -= 0.5 * (kron(id, ll) + kron(ll.transpose(), id));
    if (which == Picture::Heisenberg)
      s += kron(l.transpose(), l.adjoint());
    else
      s += kron(l.conjugate(), l);
  }
  return Superoperator{d, std::move(s)};
}

/// exp(t S); scaling-and-squaring Pade via Eigen's matrix functions.
inline Superoperator expm(const Superoperator& s, double t) {
  Matrix m = (t * s.mat).exp();
  return Superoperator{s.dim, std::move(m)};
}

inline Superoperator semigroup(const Lindbladian& gen, double t, Picture which) {
  if (t < 0.0) throw RejectedInput("semigroup: time must be nonnegative");
  return expm(to_superoperator(gen, which), t);
}

/// Choi matrix sum_ij E_ij otimes M(E_ij); PSD iff the map is CP.
inline Matrix choi_matrix(const Superoperator& s) {
  const Eigen::Index d = s.dim;
  Matrix c = Matrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      c += kron(matrix_unit(d, i, j), s.apply(matrix_unit(d, i, j)));
  return c;
}

// ---------------------------------------------------------------------------
// Invariant states

struct InvariantStates {
  std::vector<Matrix> kernel;  // HS-orthonormal basis of Ker L_*
  DensityMatrix faithful_pick;
};

namespace detail {

inline std::vector<Vector> small_singular_columns(const Matrix& basis, const RealVector& svals) {
  std::vector<Vector> cols;
  double cut = policy().kernel_cut * svals.maxCoeff();
  for (Eigen::Index i = 0; i < svals.size(); ++i)
    if (svals(i) <= cut) cols.push_back(basis.col(i));
  return cols;
}

}  // namespace detail

/// Kernel of the Schrodinger generator plus a deterministic faithful invariant
/// state: the spectral projection onto Ker L_* along Ran L_* applied to I/d.
inline InvariantStates invariant_states(const Lindbladian& gen) {
  const Eigen::Index d = gen.dim;
  Superoperator schro = to_superoperator(gen, Picture::Schrodinger);
  Eigen::JacobiSVD<Matrix> svd(schro.mat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  auto right = detail::small_singular_columns(svd.matrixV(), svd.singularValues());
  auto left = detail::small_singular_columns(svd.matrixU(), svd.singularValues());
  if (right.empty()) throw StructuralError("invariant_states: generator has trivial kernel");

  InvariantStates out;
  for (const auto& v : right) out.kernel.push_back(unvec(v, d));

  const Eigen::Index k = static_cast<Eigen::Index>(right.size());
  Matrix kmat(d * d, k), jmat(d * d, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    kmat.col(i) = right[static_cast<std::size_t>(i)];
    jmat.col(i) = left[static_cast<std::size_t>(i)];
  }
  Matrix overlap = jmat.adjoint() * kmat;
  Eigen::FullPivLU<Matrix> lu(overlap);
  if (!lu.isInvertible())
    throw StructuralError("invariant_states: zero eigenvalue of the generator is not semisimple");

  // Ergodic projection of a state, P0 = K (J^H K)^{-1} J^H on vectorized operators.
  auto project = [&](const Matrix& rho) {
    Vector p = kmat * lu.solve(jmat.adjoint() * vec(rho));
    Matrix m = hermitize(unvec(p, d));
    double tr = m.trace().real();
    if (std::abs(tr) < 1e-12) throw StructuralError("invariant_states: projection lost the trace");
    return Matrix(m / tr);
  };

  Matrix pick = project(Matrix::Identity(d, d) / static_cast<double>(d));
  Eigen::SelfAdjointEigenSolver<Matrix> es(pick);
  if (es.eigenvalues().minCoeff() < -policy().psd_slack)
    throw StructuralError("invariant_states: no positive semidefinite invariant state found");

  if (es.eigenvalues().minCoeff() > policy().faithfulness) {
    out.faithful_pick = DensityMatrix{pick, true};
    return out;
  }
  // Ergodic projection of I/d was not faithful; try maximal-support mixtures of
  // projected random states before giving up.
  Rng rng(0x5eedULL);
  Matrix best = pick;
  double best_min = es.eigenvalues().minCoeff();
  for (int attempt = 0; attempt < 8; ++attempt) {
    Matrix cand = project(random_state(d, rng));
    cand = hermitize(0.5 * (cand + best));
    cand /= cand.trace().real();
    double mn = Eigen::SelfAdjointEigenSolver<Matrix>(cand).eigenvalues().minCoeff();
    if (mn > best_min) {
      best_min = mn;
      best = cand;
    }
  }
  if (best_min <= policy().faithfulness)
    throw StructuralError("invariant_states: no faithful invariant state (minimum eigenvalue " +
                          std::to_string(best_min) + ")");
  out.faithful_pick = DensityMatrix{best, true};
  return out;
}

// ---------------------------------------------------------------------------
// Adjoints with respect to weighted inner products

/// Gram matrix G with <X,Y>_w = vec(X)^H G vec(Y).
inline Matrix gram_matrix(const WeightedInner& w, Eigen::Index d) {
  switch (w.kind) {
    case InnerKind::HS:
      return Matrix::Identity(d * d, d * d);
    case InnerKind::GNS:
      return kron(w.sigma.mat.transpose(), identity(d));
    case InnerKind::KMS: {
      Matrix r = mat_sqrt(w.sigma.mat);
      return kron(r.transpose(), r);
    }
  }
  throw RejectedInput("gram_matrix: unknown kind");
}

/// Adjoint wrt <.,.>_w:  S^ = G^{-1} S^H G (G Hermitian positive definite).
inline Superoperator adjoint_wrt(const Superoperator& s, const WeightedInner& w) {
  if (!w.sigma.faithful) throw DomainError("adjoint_wrt: weight must be faithful");
  const Eigen::Index d = s.dim;
  Matrix g = gram_matrix(w, d);
  Matrix ginv;
  switch (w.kind) {
    case InnerKind::HS:
      ginv = Matrix::Identity(d * d, d * d);
      break;
    case InnerKind::GNS:
      ginv = kron(matfunc(w.sigma.mat, sf::inverse()).transpose(), identity(d));
      break;
    case InnerKind::KMS: {
      Matrix rinv = mat_pow(w.sigma.mat, -0.5);
      ginv = kron(rinv.transpose(), rinv);
      break;
    }
  }
  return Superoperator{d, ginv * s.mat.adjoint() * g};
}

// ---------------------------------------------------------------------------
// Analysis context

struct QmsContext {
  Lindbladian gen;
  Superoperator heisenberg;
  Superoperator schrodinger;
  DensityMatrix sigma_inv;  // some faithful invariant state
  DensityMatrix sigma_tr;   // reference state, set by the structure pipeline
  bool reversible = false;
  bool dbc = false;
};

/// Partial context: superoperators and a faithful invariant state.
/// sigma_tr and the reversibility flags are filled by dfstructure.
inline QmsContext make_context(const Lindbladian& gen) {
  QmsContext ctx;
  ctx.gen = gen;
  ctx.heisenberg = to_superoperator(gen, Picture::Heisenberg);
  ctx.schrodinger = to_superoperator(gen, Picture::Schrodinger);
  ctx.sigma_inv = invariant_states(gen).faithful_pick;
  return ctx;
}

inline bool check_reversible(const QmsContext& ctx) {
  Superoperator hat = adjoint_wrt(ctx.heisenberg, {ctx.sigma_tr, InnerKind::KMS});
  double scale = std::max(1.0, frobenius(ctx.heisenberg.mat));
  return frobenius(ctx.heisenberg.mat - hat.mat) <= 1e-8 * scale;
}

inline bool check_dbc(const QmsContext& ctx) {
  Superoperator hat = adjoint_wrt(ctx.heisenberg, {ctx.sigma_tr, InnerKind::GNS});
  double scale = std::max(1.0, frobenius(ctx.heisenberg.mat));
  return frobenius(ctx.heisenberg.mat - hat.mat) <= 1e-8 * scale;
}

// ---------------------------------------------------------------------------
// Canonical GKSL form (traceless orthonormal jumps) from a superoperator

struct CanonicalForm {
  Matrix hamiltonian;           // traceless Hermitian
  std::vector<Matrix> jumps;    // HS-orthonormal, traceless
  std::vector<double> weights;  // nonnegative rates per jump
};

namespace detail {

/// Orthonormal operator basis starting with I/sqrt(d); the remainder is
/// traceless. `frame` rotates the construction basis (columns = o.n.b. of H).
inline std::vector<Matrix> operator_basis(Eigen::Index d, const Matrix& frame) {
  std::vector<Matrix> basis;
  basis.push_back(Matrix::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j) basis.push_back(frame.col(i) * frame.col(j).adjoint());
  // Helmert-style traceless diagonal elements.
  for (Eigen::Index k = 1; k < d; ++k) {
    Matrix g = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < k; ++i) g += frame.col(i) * frame.col(i).adjoint();
    g -= static_cast<double>(k) * frame.col(k) * frame.col(k).adjoint();
    basis.push_back(g / std::sqrt(static_cast<double>(k * (k + 1))));
  }
  return basis;
}

/// Coefficients of S in the sandwich expansion S = sum c_ab conj(G_b) ox G_a,
/// i.e. L(rho) = sum c_ab G_a rho G_b^*.
inline Matrix sandwich_coefficients(const Superoperator& s, const std::vector<Matrix>& basis) {
  const Eigen::Index d = s.dim, n = d * d;
  // Reshuffle: R[(r2,c2),(r1,c1)] = S[(r1,r2),(c1,c2)] so that
  // c = B^H R B with B's columns the vectorized basis elements.
  Matrix r(n, n);
  for (Eigen::Index r1 = 0; r1 < d; ++r1)
    for (Eigen::Index r2 = 0; r2 < d; ++r2)
      for (Eigen::Index c1 = 0; c1 < d; ++c1)
        for (Eigen::Index c2 = 0; c2 < d; ++c2)
          r(r2 + c2 * d, r1 + c1 * d) = s.mat(r1 * d + r2, c1 * d + c2);
  Matrix b(n, n);
  for (Eigen::Index a = 0; a < n; ++a) b.col(a) = vec(basis[static_cast<std::size_t>(a)]);
  return b.adjoint() * r * b;
}

}  // namespace detail

/// Extracts the unique canonical form L_*(rho) = -i[H,rho]
/// + sum_j w_j (V_j rho V_j^* - 1/2 {V_j^* V_j, rho}) with traceless H, V_j
/// from the Schrodinger superoperator. Throws with a certificate when the map
/// is not conditionally completely positive.
inline CanonicalForm canonical_gksl(const Superoperator& schro,
                                    const std::vector<Matrix>& basis_in = {}) {
  const Eigen::Index d = schro.dim, n = d * d;
  std::vector<Matrix> basis =
      basis_in.empty() ? detail::operator_basis(d, identity(d)) : basis_in;
  Matrix c = detail::sandwich_coefficients(schro, basis);

  Matrix chi = hermitize(c.block(1, 1, n - 1, n - 1));
  Eigen::SelfAdjointEigenSolver<Matrix> es(chi);
  double top = std::max(1.0, es.eigenvalues().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-9 * top)
    throw StructuralError("canonical_gksl: not conditionally completely positive (chi minimum "
                          "eigenvalue " +
                          std::to_string(es.eigenvalues().minCoeff()) + ")");

  CanonicalForm out;
  for (Eigen::Index j = n - 2; j >= 0; --j) {
    double w = es.eigenvalues()(j);
    if (w <= 1e-12 * top) continue;
    Matrix v = Matrix::Zero(d, d);
    for (Eigen::Index a = 1; a < n; ++a)
      v += es.eigenvectors()(a - 1, j) * basis[static_cast<std::size_t>(a)];
    out.jumps.push_back(std::move(v));
    out.weights.push_back(w);
  }

  const double rd = std::sqrt(static_cast<double>(d));
  Vector kappa_coeff(n);
  kappa_coeff(0) = c(0, 0) / (2.0 * rd);
  for (Eigen::Index a = 1; a < n; ++a) kappa_coeff(a) = c(a, 0) / rd;
  Matrix kappa = Matrix::Zero(d, d);
  for (Eigen::Index a = 0; a < n; ++a)
    kappa += kappa_coeff(a) * basis[static_cast<std::size_t>(a)];
  Matrix h = 0.5 * kI * (kappa - kappa.adjoint());
  h -= (h.trace() / static_cast<double>(d)) * identity(d);
  out.hamiltonian = hermitize(h);

  // Round-trip: the extracted pieces must reproduce the superoperator.
  std::vector<Matrix> scaled;
  for (std::size_t j = 0; j < out.jumps.size(); ++j)
    scaled.push_back(std::sqrt(out.weights[j]) * out.jumps[j]);
  Superoperator rebuilt =
      to_superoperator(Lindbladian{d, out.hamiltonian, scaled}, Picture::Schrodinger);
  double scale = std::max(1.0, frobenius(schro.mat));
  if (frobenius(rebuilt.mat - schro.mat) > 1e-9 * scale)
    throw StructuralError("canonical_gksl: superoperator is not of GKSL form (residual " +
                          std::to_string(frobenius(rebuilt.mat - schro.mat)) + ")");
  return out;
}

// ---------------------------------------------------------------------------
// Detailed-balance derivation decomposition

struct ModularJump {
  Matrix v;      // derivation jump, sigma_tr V = e^omega V sigma_tr
  double omega;  // modular frequency
};

/// For a sigma_tr-DBC generator, returns jumps {V_j, omega_j} such that
///   E_L(X,Y) = sum_j <[V_j,X],[V_j,Y]>_{sigma_tr}   (KMS inner product).
/// Construction: canonical chi matrix in the eigenbasis of sigma_tr, block
/// diagonal over modular eigenspaces; each block eigenvector gives a modular
/// jump with weight w, rescaled by sqrt(w e^{-omega/2} / 2).
inline std::vector<ModularJump> dbc_jump_decomposition(const QmsContext& ctx) {
  if (!check_dbc(ctx))
    throw StructuralError("dbc_jump_decomposition: generator lacks the sigma_tr-DBC property");
  const Eigen::Index d = ctx.gen.dim, n = d * d;
  HermitianEig sig = eig_hermitian(ctx.sigma_tr.mat);

  std::vector<Matrix> basis = detail::operator_basis(d, sig.vectors);
  // Modular frequency of each traceless basis element.
  std::vector<double> omega(static_cast<std::size_t>(n - 1), 0.0);
  {
    std::size_t idx = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        if (i != j) omega[idx++] = std::log(sig.values(i)) - std::log(sig.values(j));
    // Helmert diagonal elements commute with sigma_tr: omega = 0 already.
  }

  Matrix c = detail::sandwich_coefficients(ctx.schrodinger, basis);
  Matrix chi = hermitize(c.block(1, 1, n - 1, n - 1));
  double top = std::max(1.0, chi.cwiseAbs().maxCoeff());

  // Group traceless indices by modular frequency.
  std::vector<std::vector<Eigen::Index>> groups;
  std::vector<double> gomega;
  for (Eigen::Index a = 0; a < n - 1; ++a) {
    bool placed = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (std::abs(omega[static_cast<std::size_t>(a)] - gomega[g]) <=
          1e-8 * std::max(1.0, std::abs(gomega[g]))) {
        groups[g].push_back(a);
        placed = true;
        break;
      }
    }
    if (!placed) {
      groups.push_back({a});
      gomega.push_back(omega[static_cast<std::size_t>(a)]);
    }
  }

  // DBC forces chi to be block diagonal over the modular eigenspaces.
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t h = g + 1; h < groups.size(); ++h)
      for (Eigen::Index a : groups[g])
        for (Eigen::Index b : groups[h])
          if (std::abs(chi(a, b)) > 1e-7 * top)
            throw StructuralError(
                "dbc_jump_decomposition: chi couples distinct modular eigenspaces");

  std::vector<ModularJump> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& idx = groups[g];
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Matrix sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = chi(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<Matrix> es(sub);
    if (es.eigenvalues().minCoeff() < -1e-9 * top)
      throw StructuralError("dbc_jump_decomposition: chi block not positive semidefinite");
    for (Eigen::Index j = 0; j < m; ++j) {
      double w = es.eigenvalues()(j);
      if (w <= 1e-12 * top) continue;
      Matrix v = Matrix::Zero(d, d);
      for (Eigen::Index a = 0; a < m; ++a)
        v += es.eigenvectors()(a, j) * basis[static_cast<std::size_t>(idx[a] + 1)];
      v *= std::sqrt(0.5 * w * std::exp(-0.5 * gomega[g]));
      out.push_back(ModularJump{std::move(v), gomega[g]});
    }
  }
  return out;
}

/// Heisenberg generator rebuilt from modular derivation jumps:
///   L(X) = sum_j e^{omega/2} V*[X,V] + e^{-omega/2} [V*,X] V.
inline Superoperator rebuild_from_modular_jumps(const std::vector<ModularJump>& jumps,
                                                Eigen::Index d) {
  Matrix s = Matrix::Zero(d * d, d * d);
  const Matrix id = identity(d);
  for (const auto& mj : jumps) {
    const Matrix& v = mj.v;
    Matrix vd = v.adjoint();
    double ep = std::exp(0.5 * mj.omega), em = std::exp(-0.5 * mj.omega);
    // e^{w/2} (V* X V - V* V X) + e^{-w/2} (V X V* - X V V*), as superoperator.
    s += ep * (kron(v.transpose(), vd) - kron(id, vd * v));
    s += em * (kron(v.conjugate(), v) - kron((v * vd).transpose(), id));
  }
  return Superoperator{d, std::move(s)};
}

}  // namespace qdeco
