#pragma once

// Decoherence-free structure: the algebra on which the semigroup acts as a
// group of automorphisms, its Wedderburn block decomposition
// H = (+)_i H_i ox K_i, the reference state sigma_tr, and the conditional
// expectations onto the algebra.

#include "qdeco/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace qdeco {

struct BlockStructure {
  struct Block {
    Eigen::Index dim_h = 0;  // automorphic factor
    Eigen::Index dim_k = 0;  // multiplicity space
    Matrix tau;              // faithful density on K_i (set by extract_taus)
    double p = 0.0;          // weight Tr[P_i sigma]
  };
  std::vector<Block> blocks;
  Matrix basis;  // unitary W: computational basis -> (+)_i H_i ox K_i ordering
  Eigen::Index dim = 0;

  Eigen::Index block_offset(std::size_t i) const {
    Eigen::Index off = 0;
    for (std::size_t j = 0; j < i; ++j) off += blocks[j].dim_h * blocks[j].dim_k;
    return off;
  }
  Eigen::Index algebra_dim() const {
    Eigen::Index n = 0;
    for (const auto& b : blocks) n += b.dim_h * b.dim_h;
    return n;
  }
};

struct ConditionalExpectation {
  Superoperator heisenberg;   // E_N
  Superoperator schrodinger;  // E_N*
  BlockStructure structure;
};

namespace detail {

// Orthonormal span tracker over vectorized operators.
class OperatorSpan {
 public:
  explicit OperatorSpan(Eigen::Index d) : d_(d) {}

  // Returns true when m enlarged the span.
  bool insert(const Matrix& m) {
    Vector v = vec(m);
    for (const auto& b : cols_) v -= (b.adjoint() * v) * b;
    double norm = v.norm();
    if (norm <= 1e-10 * std::max(1.0, frobenius(m))) return false;
    cols_.push_back(v / norm);
    return true;
  }

  double residual(const Matrix& m) const {
    Vector v = vec(m);
    for (const auto& b : cols_) v -= (b.adjoint() * v) * b;
    return v.norm();
  }

  std::size_t size() const { return cols_.size(); }
  const std::vector<Vector>& columns() const { return cols_; }

 private:
  Eigen::Index d_;
  std::vector<Vector> cols_;
};

inline std::vector<std::vector<Eigen::Index>> cluster_sorted(const RealVector& vals, double gap) {
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (i == 0 || vals(i) - vals(i - 1) > gap) groups.emplace_back();
    groups.back().push_back(i);
  }
  return groups;
}

inline Matrix polar_unitary(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Decoherence-free algebra

/// HS-orthonormal basis of {delta_H^n(L_k), delta_H^n(L_k*)}' with
/// delta_H = [H, .]. Structural verifications run in analyze_qms once the
/// conditional expectation is available.
inline std::vector<Matrix> df_algebra_basis(const Lindbladian& gen) {
  const Eigen::Index d = gen.dim;
  // Iterated commutators, kept only while they enlarge the span.
  detail::OperatorSpan span(d);
  std::vector<Matrix> frontier;
  for (const auto& l : gen.jumps) {
    for (const Matrix& seed : {Matrix(l), Matrix(l.adjoint())})
      if (span.insert(seed)) frontier.push_back(seed);
  }
  for (Eigen::Index n = 1; n < d * d && !frontier.empty(); ++n) {
    std::vector<Matrix> next;
    for (const auto& g : frontier) {
      Matrix c = gen.hamiltonian * g - g * gen.hamiltonian;
      if (span.insert(c)) next.push_back(std::move(c));
    }
    frontier = std::move(next);
  }

  // Commutant: nullspace of the stacked commutator map.
  const auto& gens = span.columns();
  if (gens.empty()) {
    // No dissipation: the whole algebra evolves unitarily.
    std::vector<Matrix> all;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) all.push_back(matrix_unit(d, i, j));
    return all;
  }
  Matrix stacked(static_cast<Eigen::Index>(gens.size()) * d * d, d * d);
  for (std::size_t m = 0; m < gens.size(); ++m) {
    Matrix g = unvec(gens[m], d);
    stacked.middleRows(static_cast<Eigen::Index>(m) * d * d, d * d) =
        kron(identity(d), g) - kron(g.transpose(), identity(d));
  }
  Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  double cut = policy().kernel_cut * svd.singularValues().maxCoeff();
  std::vector<Matrix> basis;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) <= cut) basis.push_back(unvec(svd.matrixV().col(i), d));
  if (basis.empty()) throw StructuralError("df_algebra_basis: commutant is empty");
  return basis;
}

// ---------------------------------------------------------------------------
// Block decomposition

/// Wedderburn decomposition of the *-algebra spanned by `algebra` (which must
/// contain the identity): minimal central projections from a generic central
/// element, then factorization of each block into H_i ox K_i with multiplicity
/// spaces aligned through a generic algebra element.
inline BlockStructure block_decompose(const std::vector<Matrix>& algebra,
                                      const DensityMatrix& sigma_inv) {
  if (algebra.empty()) throw RejectedInput("block_decompose: empty algebra");
  const Eigen::Index d = algebra[0].rows();
  const Eigen::Index n = static_cast<Eigen::Index>(algebra.size());

  {  // The identity must lie in the span.
    detail::OperatorSpan span(d);
    for (const auto& b : algebra) span.insert(b);
    if (span.residual(identity(d)) > 1e-8 * std::sqrt(static_cast<double>(d)))
      throw RejectedInput("block_decompose: algebra does not contain the identity");
  }

  // Center: elements of the span commuting with every basis element.
  Matrix comm(n * d * d, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      std::size_t si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
      comm.block(j * d * d, i, d * d, 1) = vec(algebra[si] * algebra[sj] - algebra[sj] * algebra[si]);
    }
  Eigen::BDCSVD<Matrix> csvd(comm, Eigen::ComputeFullV);
  double cut = policy().kernel_cut * csvd.singularValues().maxCoeff();
  std::vector<Matrix> center;
  for (Eigen::Index i = 0; i < csvd.singularValues().size(); ++i)
    if (csvd.singularValues()(i) <= cut) {
      Matrix z = Matrix::Zero(d, d);
      for (Eigen::Index a = 0; a < n; ++a)
        z += csvd.matrixV()(a, i) * algebra[static_cast<std::size_t>(a)];
      center.push_back(std::move(z));
    }
  if (center.empty()) throw StructuralError("block_decompose: trivial center not found");

  Rng rng(0x9d2c5680ULL);  // fixed seed; degenerate draws resample once
  std::normal_distribution<double> nd(0.0, 1.0);
  auto hermitian_combo = [&](const std::vector<Matrix>& set) {
    Matrix c = Matrix::Zero(d, d);
    for (const auto& z : set) c += nd(rng) * (z + z.adjoint()) + nd(rng) * (kI * (z - z.adjoint()));
    return hermitize(c);
  };

  struct RawBlock {
    Matrix cols;  // d x r orthonormal columns spanning the central block
    Eigen::Index dim_h = 0, dim_k = 0;
    double weight = 0.0;
  };

  for (int attempt = 0; attempt < 2; ++attempt) {
    // Minimal central projections from a generic Hermitian central element.
    HermitianEig ce = eig_hermitian(hermitian_combo(center));
    double spread = std::max(1.0, ce.values(d - 1) - ce.values(0));
    auto groups = detail::cluster_sorted(ce.values, 1e-6 * spread);
    if (groups.size() != center.size()) continue;  // eigenvalue collision across blocks

    std::vector<RawBlock> raw;
    bool ok = true;
    for (const auto& g : groups) {
      RawBlock rb;
      rb.cols.resize(d, static_cast<Eigen::Index>(g.size()));
      for (std::size_t c = 0; c < g.size(); ++c) rb.cols.col(static_cast<Eigen::Index>(c)) = ce.vectors.col(g[c]);
      const Eigen::Index r = rb.cols.cols();

      // Restrict the algebra to the block and factor out the multiplicity.
      std::vector<Matrix> restricted;
      restricted.reserve(algebra.size());
      for (const auto& b : algebra) restricted.push_back(rb.cols.adjoint() * b * rb.cols);
      Matrix a = Matrix::Zero(r, r);
      for (const auto& z : restricted)
        a += nd(rng) * (z + z.adjoint()) + nd(rng) * (kI * (z - z.adjoint()));
      a = hermitize(a);
      Eigen::SelfAdjointEigenSolver<Matrix> aes(a);
      double aspread = std::max(1.0, aes.eigenvalues().maxCoeff() - aes.eigenvalues().minCoeff());
      auto agroups = detail::cluster_sorted(aes.eigenvalues(), 1e-6 * aspread);
      const Eigen::Index nh = static_cast<Eigen::Index>(agroups.size());
      const Eigen::Index mk = static_cast<Eigen::Index>(agroups[0].size());
      for (const auto& ag : agroups)
        if (static_cast<Eigen::Index>(ag.size()) != mk) ok = false;
      if (!ok || nh * mk != r) {
        ok = false;
        break;
      }

      // Align multiplicity spaces across eigenvalue groups with a generic
      // (non-Hermitian) algebra element.
      Matrix gelem = Matrix::Zero(r, r);
      for (const auto& z : restricted) gelem += Complex(nd(rng), nd(rng)) * z;
      std::vector<Matrix> qs;
      for (Eigen::Index g2 = 0; g2 < nh; ++g2) {
        Matrix q(r, mk);
        for (Eigen::Index c = 0; c < mk; ++c)
          q.col(c) = aes.eigenvectors().col(agroups[static_cast<std::size_t>(g2)][static_cast<std::size_t>(c)]);
        qs.push_back(std::move(q));
      }
      Matrix wb(r, r);
      wb.leftCols(mk) = qs[0];
      for (Eigen::Index g2 = 1; g2 < nh; ++g2) {
        Matrix rmat = qs[static_cast<std::size_t>(g2)].adjoint() * gelem * qs[0];
        Eigen::JacobiSVD<Matrix> rsvd(rmat);
        if (rsvd.singularValues()(mk - 1) < 0.05 * rsvd.singularValues()(0)) {
          ok = false;  // generic element failed to connect the groups
          break;
        }
        wb.middleCols(g2 * mk, mk) = qs[static_cast<std::size_t>(g2)] * detail::polar_unitary(rmat);
      }
      if (!ok) break;
      rb.cols = rb.cols * wb;
      rb.dim_h = nh;
      rb.dim_k = mk;
      rb.weight = ((rb.cols.adjoint() * sigma_inv.mat * rb.cols).trace()).real();
      raw.push_back(std::move(rb));
    }
    if (!ok) continue;

    std::sort(raw.begin(), raw.end(), [](const RawBlock& a, const RawBlock& b) {
      if (a.dim_h != b.dim_h) return a.dim_h > b.dim_h;
      if (a.dim_k != b.dim_k) return a.dim_k > b.dim_k;
      return a.weight > b.weight;
    });

    BlockStructure out;
    out.dim = d;
    out.basis.resize(d, d);
    Eigen::Index off = 0;
    for (const auto& rb : raw) {
      out.basis.middleCols(off, rb.cols.cols()) = rb.cols;
      out.blocks.push_back({rb.dim_h, rb.dim_k, Matrix(), rb.weight});
      off += rb.cols.cols();
    }
    if (frobenius(out.basis.adjoint() * out.basis - identity(d)) > 1e-10 * d)
      throw StructuralError("block_decompose: assembled basis is not unitary");

    // Conjugated basis elements must live block-diagonally as A_i ox I_{K_i}.
    double leak = 0.0;
    for (const auto& b : algebra) {
      Matrix bb = out.basis.adjoint() * b * out.basis;
      for (std::size_t i = 0; i < out.blocks.size(); ++i) {
        Eigen::Index oi = out.block_offset(i), ri = out.blocks[i].dim_h * out.blocks[i].dim_k;
        Matrix sub = bb.block(oi, oi, ri, ri);
        Matrix ai = partial_trace_second(sub, out.blocks[i].dim_h, out.blocks[i].dim_k) /
                    static_cast<double>(out.blocks[i].dim_k);
        leak = std::max(leak, (sub - kron(ai, identity(out.blocks[i].dim_k))).cwiseAbs().maxCoeff());
        bb.block(oi, oi, ri, ri).setZero();
      }
      leak = std::max(leak, bb.cwiseAbs().maxCoeff());
    }
    if (leak > 1e-8 * std::max(1.0, static_cast<double>(d)))
      throw StructuralError("block_decompose: off-block leakage " + std::to_string(leak));
    return out;
  }
  throw StructuralError("block_decompose: generic-element sampling failed twice");
}

// ---------------------------------------------------------------------------
// Invariant-state restriction and the reference state

/// Fills tau_i and p_i from a faithful invariant state: each block of sigma
/// must factor as p_i sigma_i ox tau_i.
inline BlockStructure extract_taus(BlockStructure structure, const DensityMatrix& sigma_inv) {
  if (!sigma_inv.faithful) throw RejectedInput("extract_taus: invariant state must be faithful");
  Matrix s = structure.basis.adjoint() * sigma_inv.mat * structure.basis;
  Matrix reassembled = Matrix::Zero(structure.dim, structure.dim);
  for (std::size_t i = 0; i < structure.blocks.size(); ++i) {
    auto& blk = structure.blocks[i];
    Eigen::Index off = structure.block_offset(i), r = blk.dim_h * blk.dim_k;
    Matrix sub = s.block(off, off, r, r);
    double p = sub.trace().real();
    if (p <= 0.0) throw StructuralError("extract_taus: nonpositive block weight");
    Matrix sigma_i = partial_trace_second(sub, blk.dim_h, blk.dim_k) / p;
    Matrix tau_i = partial_trace_first(sub, blk.dim_h, blk.dim_k) / p;
    blk.p = p;
    blk.tau = hermitize(tau_i);
    if (Eigen::SelfAdjointEigenSolver<Matrix>(blk.tau).eigenvalues().minCoeff() <=
        policy().faithfulness)
      throw StructuralError("extract_taus: tau_i is not faithful");
    reassembled.block(off, off, r, r) = p * kron(sigma_i, tau_i);
  }
  if (frobenius(reassembled - s) > 1e-8 * std::max(1.0, frobenius(s)))
    throw StructuralError("extract_taus: invariant state is not of product form on a block");
  return structure;
}

/// sigma_tr = E_N*(I/d) = (+)_i (dim K_i / d) I_{H_i} ox tau_i.
inline DensityMatrix sigma_tr_state(const BlockStructure& structure) {
  const Eigen::Index d = structure.dim;
  Matrix s = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < structure.blocks.size(); ++i) {
    const auto& blk = structure.blocks[i];
    Eigen::Index off = structure.block_offset(i), r = blk.dim_h * blk.dim_k;
    s.block(off, off, r, r) =
        (static_cast<double>(blk.dim_k) / static_cast<double>(d)) *
        kron(identity(blk.dim_h), blk.tau);
  }
  return make_density(structure.basis * s * structure.basis.adjoint());
}

// ---------------------------------------------------------------------------
// Conditional expectations

inline ConditionalExpectation conditional_expectations(const BlockStructure& structure) {
  const Eigen::Index d = structure.dim;
  Matrix en = Matrix::Zero(d * d, d * d), ens = Matrix::Zero(d * d, d * d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) {
      Matrix x = structure.basis.adjoint() * matrix_unit(d, r, c) * structure.basis;
      Matrix hx = Matrix::Zero(d, d), sx = Matrix::Zero(d, d);
      for (std::size_t i = 0; i < structure.blocks.size(); ++i) {
        const auto& blk = structure.blocks[i];
        Eigen::Index off = structure.block_offset(i), ri = blk.dim_h * blk.dim_k;
        Matrix sub = x.block(off, off, ri, ri);
        // Tr_tau over K_i for the Heisenberg map.
        Matrix a = Matrix::Zero(blk.dim_h, blk.dim_h);
        for (Eigen::Index ai = 0; ai < blk.dim_h; ++ai)
          for (Eigen::Index bi = 0; bi < blk.dim_h; ++bi) {
            Complex acc = 0.0;
            for (Eigen::Index be = 0; be < blk.dim_k; ++be)
              for (Eigen::Index ga = 0; ga < blk.dim_k; ++ga)
                acc += sub(ai * blk.dim_k + be, bi * blk.dim_k + ga) * blk.tau(ga, be);
            a(ai, bi) = acc;
          }
        hx.block(off, off, ri, ri) = kron(a, identity(blk.dim_k));
        // Plain partial trace over K_i, tensored with tau_i, for the predual.
        Matrix b = partial_trace_second(sub, blk.dim_h, blk.dim_k);
        sx.block(off, off, ri, ri) = kron(b, blk.tau);
      }
      en.col(r + c * d) = vec(structure.basis * hx * structure.basis.adjoint());
      ens.col(r + c * d) = vec(structure.basis * sx * structure.basis.adjoint());
    }
  return ConditionalExpectation{Superoperator{d, en}, Superoperator{d, ens}, structure};
}

// ---------------------------------------------------------------------------
// Full analysis pipeline

struct AnalyzedQms {
  QmsContext ctx;
  std::vector<Matrix> algebra;  // HS-orthonormal basis of N(P)
  BlockStructure structure;
  ConditionalExpectation cond;
};

namespace detail {

// Slowest strictly-decaying rate of the generator, for verification grids.
inline double decay_rate_estimate(const Superoperator& heis) {
  Eigen::ComplexEigenSolver<Matrix> es(heis.mat);
  double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  double rate = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double re = es.eigenvalues()(i).real();
    if (re < -1e-9 * scale) rate = (rate == 0.0) ? -re : std::min(rate, -re);
  }
  return rate > 0.0 ? rate : 1.0;
}

inline void verify_structure(const AnalyzedQms& a) {
  const Eigen::Index d = a.ctx.gen.dim;
  const auto& basis = a.algebra;
  // (a) closure under product and adjoint.
  OperatorSpan span(d);
  for (const auto& b : basis) span.insert(b);
  for (const auto& x : basis) {
    if (span.residual(x.adjoint()) > 1e-9 * std::max(1.0, frobenius(x)))
      throw StructuralError("df algebra verification: not closed under adjoint");
    for (const auto& y : basis)
      if (span.residual(x * y) > 1e-9 * std::max(1.0, frobenius(x * y)))
        throw StructuralError("df algebra verification: not closed under product");
  }
  // (b) the semigroup restricted to the algebra preserves the sigma_tr Gram.
  WeightedInner w{a.ctx.sigma_tr, InnerKind::KMS};
  double rate = decay_rate_estimate(a.ctx.heisenberg);
  for (double t : {0.7 / rate, 1.9 / rate}) {
    Superoperator pt = expm(a.ctx.heisenberg, t);
    const std::size_t nb = basis.size();
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = 0; j < nb; ++j) {
        Complex before = weighted_inner(w, basis[i], basis[j]);
        Complex after = weighted_inner(w, pt.apply(basis[i]), pt.apply(basis[j]));
        if (std::abs(before - after) > 1e-8 * std::max(1.0, std::abs(before)))
          throw StructuralError("df algebra verification: evolution is not isometric on N(P)");
      }
  }
  // (c) the orthogonal complement decays.
  Superoperator plate = expm(a.ctx.heisenberg, 50.0 / rate);
  Rng rng(0xabcdULL);
  for (int k = 0; k < 3; ++k) {
    Matrix x = random_hermitian(d, rng);
    Matrix y = x - a.cond.heisenberg.apply(x);
    if (frobenius(plate.apply(y)) > 1e-6 * std::max(1.0, frobenius(y)))
      throw StructuralError("df algebra verification: complement fails to decay");
  }
}

inline void verify_conditional(const AnalyzedQms& a) {
  const Eigen::Index d = a.ctx.gen.dim;
  const Matrix& en = a.cond.heisenberg.mat;
  if (frobenius(en * en - en) > 1e-9 * std::max(1.0, frobenius(en)))
    throw StructuralError("conditional expectation is not idempotent");
  if (frobenius(a.cond.heisenberg.apply(identity(d)) - identity(d)) > 1e-9)
    throw StructuralError("conditional expectation is not unital");
  if (frobenius(en.adjoint() - a.cond.schrodinger.mat) > 1e-9 * std::max(1.0, frobenius(en)))
    throw StructuralError("conditional expectation duality failed");
  Eigen::SelfAdjointEigenSolver<Matrix> choi(hermitize(choi_matrix(a.cond.heisenberg)));
  if (choi.eigenvalues().minCoeff() < -1e-9)
    throw StructuralError("conditional expectation is not completely positive");
  // sigma_tr compatibility: sigma_tr o E_N = sigma_tr.
  Vector st = vec(a.ctx.sigma_tr.mat);
  if ((en.adjoint() * st - st).norm() > 1e-9)
    throw StructuralError("conditional expectation is not sigma_tr compatible");
}

}  // namespace detail

/// Runs the full structure pipeline: invariant states -> N(P) -> blocks ->
/// tau_i -> sigma_tr -> conditional expectations, with the a-posteriori
/// verifications of the commutant construction.
inline AnalyzedQms analyze_qms(const Lindbladian& gen) {
  AnalyzedQms out;
  out.ctx = make_context(gen);
  out.algebra = df_algebra_basis(gen);
  out.structure = block_decompose(out.algebra, out.ctx.sigma_inv);
  out.structure = extract_taus(out.structure, out.ctx.sigma_inv);
  if (out.structure.algebra_dim() != static_cast<Eigen::Index>(out.algebra.size()))
    throw StructuralError("analyze_qms: block dimensions disagree with the commutant dimension");
  out.ctx.sigma_tr = sigma_tr_state(out.structure);
  if (frobenius(apply_predual(gen, out.ctx.sigma_tr.mat)) > 1e-9)
    throw StructuralError("analyze_qms: sigma_tr is not invariant");
  for (const auto& b : out.algebra)
    if (frobenius(out.ctx.sigma_tr.mat * b - b * out.ctx.sigma_tr.mat) > 1e-9)
      throw StructuralError("analyze_qms: N(P) does not commute with sigma_tr");
  out.cond = conditional_expectations(out.structure);
  out.ctx.reversible = check_reversible(out.ctx);
  out.ctx.dbc = check_dbc(out.ctx);
  detail::verify_structure(out);
  detail::verify_conditional(out);
  return out;
}

}  // namespace qdeco
