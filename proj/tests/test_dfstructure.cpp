#include <catch2/catch_amalgamated.hpp>

#include "qdeco/catalog.hpp"
#include "qdeco/dfstructure.hpp"

#include <cmath>

using namespace qdeco;

namespace {

Lindbladian bipartite_model(double gamma = 1.0) {
  Matrix tau = Matrix::Zero(2, 2);
  tau.diagonal() << 0.6, 0.4;
  Matrix ha = Matrix::Zero(2, 2);
  ha.diagonal() << 1.0, -1.0;
  return build_bipartite(ha, build_depolarizing(make_density(tau), gamma));
}

Matrix bipartite_tau() {
  Matrix tau = Matrix::Zero(2, 2);
  tau.diagonal() << 0.6, 0.4;
  return tau;
}

}  // namespace

TEST_CASE("decoherence-free algebra dimensions", "[dfstructure]") {
  SECTION("deco: diagonal algebra of dimension d") {
    auto basis = df_algebra_basis(build_deco(4, 1.0));
    REQUIRE(basis.size() == 4);
    for (const auto& b : basis) {
      Matrix off = b;
      off.diagonal().setZero();
      REQUIRE(frobenius(off) <= 1e-9);
    }
  }
  SECTION("bipartite factor: B(H_A) ox I of dimension d_A^2") {
    auto basis = df_algebra_basis(bipartite_model());
    REQUIRE(basis.size() == 4);
  }
  SECTION("primitive depolarizing: multiples of the identity") {
    Matrix tau = Matrix::Zero(2, 2);
    tau.diagonal() << 0.7, 0.3;
    auto basis = df_algebra_basis(build_depolarizing(make_density(tau), 1.0));
    REQUIRE(basis.size() == 1);
    Matrix b = basis[0];
    REQUIRE(frobenius(b - (b.trace() / 2.0) * identity(2)) <= 1e-9);
  }
}

TEST_CASE("block decomposition shapes", "[dfstructure]") {
  SECTION("diagonal algebra: d abelian blocks") {
    auto a = analyze_qms(build_deco(3, 1.0));
    REQUIRE(a.structure.blocks.size() == 3);
    for (const auto& b : a.structure.blocks) {
      REQUIRE(b.dim_h == 1);
      REQUIRE(b.dim_k == 1);
    }
  }
  SECTION("factor algebra: one block d_A x d_B") {
    auto a = analyze_qms(bipartite_model());
    REQUIRE(a.structure.blocks.size() == 1);
    REQUIRE(a.structure.blocks[0].dim_h == 2);
    REQUIRE(a.structure.blocks[0].dim_k == 2);
  }
  SECTION("trivial algebra: one block 1 x d") {
    Matrix tau = Matrix::Zero(3, 3);
    tau.diagonal() << 0.5, 0.3, 0.2;
    auto a = analyze_qms(build_depolarizing(make_density(tau), 1.0));
    REQUIRE(a.structure.blocks.size() == 1);
    REQUIRE(a.structure.blocks[0].dim_h == 1);
    REQUIRE(a.structure.blocks[0].dim_k == 3);
  }
  SECTION("identity must be in the span") {
    std::vector<Matrix> not_algebra{matrix_unit(2, 0, 1)};
    REQUIRE_THROWS_AS(block_decompose(not_algebra, maximally_mixed(2)), RejectedInput);
  }
}

TEST_CASE("invariant-state restriction to blocks", "[dfstructure]") {
  SECTION("deco with sigma = I/d: scalar taus, uniform weights") {
    auto a = analyze_qms(build_deco(4, 1.0));
    for (const auto& b : a.structure.blocks) {
      REQUIRE(b.p == Catch::Approx(0.25).margin(1e-10));
      REQUIRE(b.tau.rows() == 1);
      REQUIRE(b.tau(0, 0).real() == Catch::Approx(1.0).margin(1e-10));
    }
  }
  SECTION("bipartite: single tau equals the inner invariant state") {
    auto a = analyze_qms(bipartite_model());
    REQUIRE(a.structure.blocks[0].p == Catch::Approx(1.0).margin(1e-10));
    RealVector got =
        Eigen::SelfAdjointEigenSolver<Matrix>(a.structure.blocks[0].tau).eigenvalues();
    REQUIRE(got(0) == Catch::Approx(0.4).margin(1e-9));
    REQUIRE(got(1) == Catch::Approx(0.6).margin(1e-9));
  }
  SECTION("non-faithful invariant state rejected") {
    auto a = analyze_qms(build_deco(2, 1.0));
    Matrix pure = Matrix::Zero(2, 2);
    pure(0, 0) = 1.0;
    REQUIRE_THROWS_AS(extract_taus(a.structure, DensityMatrix{pure, false}), RejectedInput);
  }
}

TEST_CASE("reference state sigma_tr", "[dfstructure]") {
  SECTION("deco: maximally mixed") {
    auto a = analyze_qms(build_deco(3, 0.5));
    REQUIRE(frobenius(a.ctx.sigma_tr.mat - identity(3) / 3.0) <= 1e-9);
  }
  SECTION("diagonal DF algebra: maximally mixed") {
    Rng rng(101);
    // Gamma from a random diagonal-jump realization.
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix ell(3, 2);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index k = 0; k < 2; ++k) ell(i, k) = Complex(nd(rng), nd(rng));
    Matrix gmat = Matrix::Zero(3, 3);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 3; ++j) {
        if (i == j) continue;
        Complex acc = 0.0;
        for (Eigen::Index k = 0; k < 2; ++k)
          acc += ell(i, k) * std::conj(ell(j, k)) -
                 0.5 * (std::norm(ell(i, k)) + std::norm(ell(j, k)));
        gmat(i, j) = acc;
      }
    auto a = analyze_qms(build_diagonal_gamma(gmat));
    REQUIRE(frobenius(a.ctx.sigma_tr.mat - identity(3) / 3.0) <= 1e-9);
  }
  SECTION("bipartite: (I/d_A) ox tau") {
    auto a = analyze_qms(bipartite_model());
    Matrix expect = kron(identity(2) / 2.0, bipartite_tau());
    REQUIRE(frobenius(a.ctx.sigma_tr.mat - expect) <= 1e-9);
  }
  SECTION("sigma_tr is invariant and central for N(P)") {
    auto a = analyze_qms(bipartite_model());
    REQUIRE(frobenius(apply_predual(a.ctx.gen, a.ctx.sigma_tr.mat)) <= 1e-9);
    for (const auto& b : a.algebra)
      REQUIRE(frobenius(a.ctx.sigma_tr.mat * b - b * a.ctx.sigma_tr.mat) <= 1e-9);
  }
}

TEST_CASE("conditional expectations", "[dfstructure]") {
  Rng rng(55);
  SECTION("deco: pinching to the diagonal") {
    auto a = analyze_qms(build_deco(3, 1.0));
    Matrix x = random_ginibre(3, rng);
    Matrix pinched = Matrix::Zero(3, 3);
    pinched.diagonal() = x.diagonal();
    REQUIRE(frobenius(a.cond.heisenberg.apply(x) - pinched) <= 1e-9);
  }
  SECTION("orthogonal projection for the sigma_tr inner product") {
    auto a = analyze_qms(bipartite_model());
    WeightedInner w{a.ctx.sigma_tr, InnerKind::KMS};
    for (int k = 0; k < 10; ++k) {
      Matrix x = random_ginibre(4, rng), y = random_ginibre(4, rng);
      Matrix ex = a.cond.heisenberg.apply(x), ey = a.cond.heisenberg.apply(y);
      Complex a1 = weighted_inner(w, ex, y), a2 = weighted_inner(w, ex, ey),
              a3 = weighted_inner(w, x, ey);
      REQUIRE(std::abs(a1 - a2) <= 1e-9);
      REQUIRE(std::abs(a2 - a3) <= 1e-9);
    }
  }
  SECTION("intertwining with sigma_tr^{1/2}") {
    auto a = analyze_qms(bipartite_model());
    Matrix r = mat_sqrt(a.ctx.sigma_tr.mat);
    for (int k = 0; k < 10; ++k) {
      Matrix x = random_ginibre(4, rng);
      Matrix lhs = r * a.cond.heisenberg.apply(x) * r;
      Matrix rhs = a.cond.schrodinger.apply(r * x * r);
      REQUIRE(frobenius(lhs - rhs) <= 1e-9 * std::max(1.0, frobenius(lhs)));
    }
  }
  SECTION("bipartite predual: E_N*(rho) = rho_A ox tau") {
    auto a = analyze_qms(bipartite_model());
    Matrix rho = random_state(4, rng);
    Matrix expect = kron(partial_trace_second(rho, 2, 2), bipartite_tau());
    REQUIRE(frobenius(a.cond.schrodinger.apply(rho) - expect) <= 1e-9);
  }
  SECTION("duality on a basis") {
    auto a = analyze_qms(build_deco(3, 1.0));
    for (Eigen::Index i = 0; i < 9; ++i)
      for (Eigen::Index j = 0; j < 9; ++j) {
        Matrix x = matrix_unit(3, i / 3, i % 3), y = matrix_unit(3, j / 3, j % 3);
        Complex lhs = (a.cond.heisenberg.apply(x) * y).trace();
        Complex rhs = (x * a.cond.schrodinger.apply(y)).trace();
        REQUIRE(std::abs(lhs - rhs) <= 1e-9);
      }
  }
}

TEST_CASE("harder algebra shapes", "[dfstructure]") {
  Rng rng(202);
  SECTION("two isomorphic factors M2 (+) M2") {
    auto spec = make_block_spec({{2, Matrix::Ones(1, 1)}, {2, Matrix::Ones(1, 1)}});
    auto a = analyze_qms(build_generic_conditional(spec, 1.0));
    REQUIRE(a.structure.blocks.size() == 2);
    for (const auto& b : a.structure.blocks) {
      REQUIRE(b.dim_h == 2);
      REQUIRE(b.dim_k == 1);
    }
    REQUIRE(a.structure.algebra_dim() == 8);
  }
  SECTION("iterated commutators shrink the commutant: H = sx with a sz jump") {
    Matrix sx(2, 2), sz(2, 2);
    sx << 0, 1, 1, 0;
    sz << 1, 0, 0, -1;
    // The jump alone commutes with the diagonal algebra, but [H, sz] adds a
    // second direction and the algebra collapses to multiples of the identity.
    auto a = analyze_qms(make_lindbladian(sx, {sz}));
    REQUIRE(a.structure.algebra_dim() == 1);
    REQUIRE(frobenius(a.ctx.sigma_tr.mat - identity(2) / 2.0) <= 1e-9);
  }
  SECTION("blocks hidden behind a random unitary are recovered") {
    // Haar-ish unitary from the QR factorization of a Ginibre matrix.
    Matrix g = random_ginibre(4, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix w = qr.householderQ();
    Matrix tau = Matrix::Zero(2, 2);
    tau.diagonal() << 0.35, 0.65;
    auto spec = make_block_spec({{2, Matrix::Ones(1, 1)}, {1, tau}}, w);
    Lindbladian gen = build_generic_conditional(spec, 1.0);
    auto a = analyze_qms(gen);
    REQUIRE(a.structure.blocks.size() == 2);
    REQUIRE(a.structure.blocks[0].dim_h == 2);
    REQUIRE(a.structure.blocks[0].dim_k == 1);
    REQUIRE(a.structure.blocks[1].dim_h == 1);
    REQUIRE(a.structure.blocks[1].dim_k == 2);
    RealVector ev =
        Eigen::SelfAdjointEigenSolver<Matrix>(a.structure.blocks[1].tau).eigenvalues();
    REQUIRE(ev(0) == Catch::Approx(0.35).margin(1e-9));
    REQUIRE(ev(1) == Catch::Approx(0.65).margin(1e-9));
    // The recovered conditional expectation agrees with the construction.
    ConditionalExpectation built = conditional_expectations(spec);
    REQUIRE(frobenius(a.cond.heisenberg.mat - built.heisenberg.mat) <= 1e-8);
  }
}

TEST_CASE("analysis pipeline invariants", "[dfstructure]") {
  Rng rng(66);
  SECTION("E_N commutes with the evolution") {
    auto a = analyze_qms(bipartite_model());
    for (double t : {0.3, 1.1}) {
      Superoperator pt = expm(a.ctx.heisenberg, t);
      Matrix lhs = a.cond.heisenberg.mat * pt.mat;
      Matrix rhs = pt.mat * a.cond.heisenberg.mat;
      REQUIRE(frobenius(lhs - rhs) <= 1e-8 * std::max(1.0, frobenius(lhs)));
    }
  }
  SECTION("decoherence limit in the Schrodinger picture") {
    auto a = analyze_qms(build_deco(3, 1.0));
    Superoperator pt = expm(a.ctx.schrodinger, 50.0);
    for (int k = 0; k < 5; ++k) {
      Matrix rho = random_state(3, rng);
      Matrix drift = pt.apply(rho - a.cond.schrodinger.apply(rho));
      REQUIRE(trace_norm(drift) <= 1e-6);
    }
  }
  SECTION("independence from the choice of faithful invariant state") {
    Lindbladian gen = build_deco(3, 1.0);
    auto a = analyze_qms(gen);
    Matrix other = Matrix::Zero(3, 3);
    other.diagonal() << 0.5, 0.3, 0.2;  // another faithful invariant state
    auto basis = df_algebra_basis(gen);
    BlockStructure s2 =
        extract_taus(block_decompose(basis, make_density(other)), make_density(other));
    DensityMatrix st2 = sigma_tr_state(s2);
    REQUIRE(frobenius(st2.mat - a.ctx.sigma_tr.mat) <= 1e-8);
    ConditionalExpectation c2 = conditional_expectations(s2);
    REQUIRE(frobenius(c2.heisenberg.mat - a.cond.heisenberg.mat) <= 1e-8);
  }
  SECTION("algebra dimension bookkeeping") {
    REQUIRE(analyze_qms(build_deco(4, 1.0)).structure.algebra_dim() == 4);
    REQUIRE(analyze_qms(bipartite_model()).structure.algebra_dim() == 4);
  }
  SECTION("flags: deco is reversible and DBC, bipartite with H_A is neither") {
    REQUIRE(analyze_qms(build_deco(2, 1.0)).ctx.dbc);
    auto a = analyze_qms(bipartite_model());
    REQUIRE_FALSE(a.ctx.reversible);
    REQUIRE_FALSE(a.ctx.dbc);
  }
}
