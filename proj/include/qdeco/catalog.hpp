#pragma once

// Constructors for the worked examples: the decoherence semigroup
// gamma (E_diag - Id), the tau-depolarizing channel, the bipartite factor
// model, generators diagonal in a matrix-unit basis, and the generalized
// conditional-expectation semigroup gamma (E_N - Id).

#include "qdeco/dfstructure.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qdeco {

// ---------------------------------------------------------------------------

/// gamma (E_diag - Id) via the pinching Kraus set {sqrt(gamma) |i><i|}.
inline Lindbladian build_deco(Eigen::Index d, double gamma) {
  if (d < 2) throw RejectedInput("build_deco: dimension must be at least 2");
  if (gamma <= 0.0) throw RejectedInput("build_deco: rate must be positive");
  std::vector<Matrix> jumps;
  for (Eigen::Index i = 0; i < d; ++i) jumps.push_back(std::sqrt(gamma) * matrix_unit(d, i, i));
  return make_lindbladian(Matrix::Zero(d, d), std::move(jumps));
}

/// Predual action rho -> gamma (tau Tr rho - rho), with the amplitude
/// reshuffling Kraus set {sqrt(gamma tau_j) |psi_j><i|}.
inline Lindbladian build_depolarizing(const DensityMatrix& tau, double gamma) {
  if (gamma <= 0.0) throw RejectedInput("build_depolarizing: rate must be positive");
  if (!tau.faithful) throw RejectedInput("build_depolarizing: target state must be faithful");
  const Eigen::Index d = tau.dim();
  HermitianEig eig = eig_hermitian(tau.mat);
  std::vector<Matrix> jumps;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      Matrix k = Matrix::Zero(d, d);
      k += eig.vectors.col(j) * Vector::Unit(d, i).adjoint();
      jumps.push_back(std::sqrt(gamma * eig.values(j)) * k);
    }
  return make_lindbladian(Matrix::Zero(d, d), std::move(jumps));
}

/// L = i[H_A ox I, .] + I ox L_B for a primitive inner generator on H_B.
inline Lindbladian build_bipartite(const Matrix& h_a, const Lindbladian& inner) {
  if (!is_hermitian(h_a)) throw RejectedInput("build_bipartite: H_A must be Hermitian");
  const Eigen::Index da = h_a.rows(), db = inner.dim;
  Matrix h = kron(h_a, identity(db)) + kron(identity(da), inner.hamiltonian);
  std::vector<Matrix> jumps;
  for (const auto& l : inner.jumps) jumps.push_back(kron(identity(da), l));
  return make_lindbladian(h, std::move(jumps));
}

/// Generator with L(|e_i><e_j|) = gamma_ij |e_i><e_j|. The coefficient matrix
/// must be Hermitian with zero diagonal and Re gamma_ij < 0 off the diagonal;
/// realizability (conditional complete positivity) is certified by the
/// canonical-form extraction.
inline Lindbladian build_diagonal_gamma(const Matrix& gamma_matrix) {
  const Eigen::Index d = gamma_matrix.rows();
  if (gamma_matrix.cols() != d || d < 2)
    throw RejectedInput("build_diagonal_gamma: bad coefficient matrix");
  if (!is_hermitian(gamma_matrix))
    throw RejectedInput("build_diagonal_gamma: coefficient matrix must be Hermitian");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(gamma_matrix(i, i)) > 1e-12)
      throw RejectedInput("build_diagonal_gamma: diagonal coefficients must vanish");
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j && gamma_matrix(i, j).real() >= 0.0)
        throw RejectedInput("build_diagonal_gamma: Re gamma_ij must be negative off-diagonal");
  }
  Matrix s = Matrix::Zero(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      s(i + j * d, i + j * d) = std::conj(gamma_matrix(i, j));
  CanonicalForm cf = canonical_gksl(Superoperator{d, std::move(s)});
  std::vector<Matrix> jumps;
  for (std::size_t k = 0; k < cf.jumps.size(); ++k)
    jumps.push_back(std::sqrt(cf.weights[k]) * cf.jumps[k]);
  return make_lindbladian(cf.hamiltonian, std::move(jumps));
}

/// gamma (E_N - Id) for the conditional expectation determined by a block
/// structure (dims, tau_i, basis). Jumps are sqrt(gamma) times the Kraus
/// operators of E_N, so the realization is honest GKSL.
inline Lindbladian build_generic_conditional(const BlockStructure& spec, double gamma) {
  if (gamma <= 0.0) throw RejectedInput("build_generic_conditional: rate must be positive");
  ConditionalExpectation cond = conditional_expectations(spec);
  const Eigen::Index d = spec.dim;
  Matrix choi = hermitize(choi_matrix(cond.heisenberg));
  Eigen::SelfAdjointEigenSolver<Matrix> es(choi);
  if (es.eigenvalues().minCoeff() < -1e-9)
    throw RejectedInput("build_generic_conditional: spec is not a CP projection");
  std::vector<Matrix> jumps;
  for (Eigen::Index m = 0; m < es.eigenvalues().size(); ++m) {
    double mu = es.eigenvalues()(m);
    if (mu <= 1e-12) continue;
    Matrix kraus(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index k = 0; k < d; ++k) kraus(i, k) = es.eigenvectors()(k * d + i, m);
    kraus *= std::sqrt(mu);
    jumps.push_back(std::sqrt(gamma) * kraus.adjoint());
  }
  Lindbladian gen = make_lindbladian(Matrix::Zero(d, d), std::move(jumps));
  // The realization must reproduce gamma (E_N - Id) exactly.
  Superoperator target{d, gamma * (cond.heisenberg.mat - Matrix::Identity(d * d, d * d))};
  Superoperator got = to_superoperator(gen, Picture::Heisenberg);
  if (frobenius(got.mat - target.mat) > 1e-10 * std::max(1.0, frobenius(target.mat)))
    throw StructuralError("build_generic_conditional: Kraus realization mismatch");
  return gen;
}

/// Block structure with the given dims/taus in the computational basis;
/// convenience input for build_generic_conditional.
inline BlockStructure make_block_spec(
    const std::vector<std::pair<Eigen::Index, Matrix>>& blocks_dimh_tau,
    const Matrix& basis = Matrix()) {
  BlockStructure s;
  Eigen::Index d = 0;
  for (const auto& [dim_h, tau] : blocks_dimh_tau) {
    BlockStructure::Block b;
    b.dim_h = dim_h;
    b.dim_k = tau.rows();
    b.tau = tau;
    b.p = 0.0;
    s.blocks.push_back(std::move(b));
    d += dim_h * tau.rows();
  }
  s.dim = d;
  s.basis = basis.size() == 0 ? Matrix(identity(d)) : basis;
  if (s.basis.rows() != d || s.basis.cols() != d)
    throw RejectedInput("make_block_spec: basis dimension mismatch");
  return s;
}

/// Seeded random GKSL generator; property tests only.
inline Lindbladian build_random(Eigen::Index d, int njumps, Rng& rng) {
  std::vector<Matrix> jumps;
  for (int k = 0; k < njumps; ++k) jumps.push_back(0.5 * random_ginibre(d, rng));
  return make_lindbladian(random_hermitian(d, rng), std::move(jumps));
}

// ---------------------------------------------------------------------------
// JSON-facing model description (parsed by the CLI layer)

enum class ModelKind { Deco, Depolarizing, BipartiteFactor, DiagonalGamma, GenericConditional };

struct ModelSpec {
  ModelKind kind = ModelKind::Deco;
  double gamma = 1.0;
  Eigen::Index dim = 2;                     // Deco
  Matrix tau;                               // Depolarizing
  Matrix h_a;                               // BipartiteFactor
  std::shared_ptr<ModelSpec> inner;         // BipartiteFactor (builder-defined B side)
  Matrix gamma_matrix;                      // DiagonalGamma
  std::vector<std::pair<Eigen::Index, Matrix>> blocks;  // GenericConditional
  Matrix block_basis;                       // GenericConditional, optional
};

struct BipartiteInfo {
  Eigen::Index dim_a = 0, dim_b = 0;
  Lindbladian inner;
  DensityMatrix tau;  // unique faithful invariant state of the inner generator
};

struct BuiltModel {
  Lindbladian gen;
  std::optional<BipartiteInfo> bipartite;
};

inline BuiltModel build_model(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::Deco:
      return {build_deco(spec.dim, spec.gamma), std::nullopt};
    case ModelKind::Depolarizing:
      return {build_depolarizing(make_density(spec.tau), spec.gamma), std::nullopt};
    case ModelKind::DiagonalGamma:
      return {build_diagonal_gamma(spec.gamma_matrix), std::nullopt};
    case ModelKind::GenericConditional:
      return {build_generic_conditional(make_block_spec(spec.blocks, spec.block_basis),
                                        spec.gamma),
              std::nullopt};
    case ModelKind::BipartiteFactor: {
      if (!spec.inner) throw RejectedInput("bipartite model needs an inner generator");
      BuiltModel inner_built = build_model(*spec.inner);
      const Lindbladian& inner = inner_built.gen;
      Lindbladian total = build_bipartite(spec.h_a, inner);
      BipartiteInfo info;
      info.dim_a = spec.h_a.rows();
      info.dim_b = inner.dim;
      info.inner = inner;
      info.tau = invariant_states(inner).faithful_pick;
      return {std::move(total), std::move(info)};
    }
  }
  throw RejectedInput("build_model: unknown kind");
}

}  // namespace qdeco
