#include <catch2/catch_amalgamated.hpp>

#include "qdeco/lindblad.hpp"

#include <cmath>

using namespace qdeco;

namespace {

Matrix pauli(char which) {
  Matrix m(2, 2);
  switch (which) {
    case 'x': m << 0, 1, 1, 0; break;
    case 'y': m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    default:  m << 1, 0, 0, -1; break;
  }
  return m;
}

// gamma (E_diag - Id), realized with pinching Kraus jumps sqrt(gamma)|i><i|.
Lindbladian deco_inline(Eigen::Index d, double gamma) {
  std::vector<Matrix> jumps;
  for (Eigen::Index i = 0; i < d; ++i) jumps.push_back(std::sqrt(gamma) * matrix_unit(d, i, i));
  return make_lindbladian(Matrix::Zero(d, d), std::move(jumps));
}

Lindbladian random_gksl(Eigen::Index d, int njumps, Rng& rng) {
  std::vector<Matrix> jumps;
  for (int k = 0; k < njumps; ++k) jumps.push_back(0.5 * random_ginibre(d, rng));
  return make_lindbladian(random_hermitian(d, rng), std::move(jumps));
}

Matrix pinch_diagonal(const Matrix& rho) {
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  out.diagonal() = rho.diagonal();
  return out;
}

}  // namespace

TEST_CASE("generator action", "[lindblad]") {
  Rng rng(5);
  SECTION("unital: L(I) = 0") {
    for (int k = 0; k < 6; ++k) {
      Lindbladian gen = random_gksl(4, 2, rng);
      REQUIRE(frobenius(apply_generator(gen, identity(4))) <= 1e-10);
    }
  }
  SECTION("deco generator damps off-diagonal units") {
    Lindbladian gen = deco_inline(3, 0.8);
    Matrix e01 = matrix_unit(3, 0, 1);
    REQUIRE(frobenius(apply_generator(gen, e01) + 0.8 * e01) <= 1e-12);
  }
  SECTION("pure Hamiltonian part: i[sigma_z, sigma_x] = -2 sigma_y") {
    Lindbladian gen = make_lindbladian(pauli('z'), {});
    REQUIRE(frobenius(apply_generator(gen, pauli('x')) + 2.0 * pauli('y')) <= 1e-12);
  }
  SECTION("dimension mismatch rejected") {
    Lindbladian gen = deco_inline(2, 1.0);
    REQUIRE_THROWS_AS(apply_generator(gen, identity(3)), RejectedInput);
  }
}

TEST_CASE("predual action", "[lindblad]") {
  Rng rng(6);
  SECTION("diagonal states are invariant for the deco generator") {
    Lindbladian gen = deco_inline(3, 1.3);
    Matrix rho = Matrix::Zero(3, 3);
    rho.diagonal() << 0.5, 0.3, 0.2;
    REQUIRE(frobenius(apply_predual(gen, rho)) <= 1e-12);
  }
  SECTION("duality Tr[L(X) rho] = Tr[X L_*(rho)]") {
    Lindbladian gen = random_gksl(3, 2, rng);
    for (int k = 0; k < 8; ++k) {
      Matrix x = random_ginibre(3, rng), rho = random_ginibre(3, rng);
      Complex lhs = (apply_generator(gen, x) * rho).trace();
      Complex rhs = (x * apply_predual(gen, rho)).trace();
      REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
  }
  SECTION("trace annihilation") {
    Lindbladian gen = random_gksl(4, 3, rng);
    for (int k = 0; k < 5; ++k)
      REQUIRE(std::abs(apply_predual(gen, random_state(4, rng)).trace()) <= 1e-10);
  }
}

TEST_CASE("superoperator representations", "[lindblad]") {
  Rng rng(7);
  SECTION("zero generator maps to the zero matrix") {
    Lindbladian gen = make_lindbladian(Matrix::Zero(2, 2), {});
    REQUIRE(frobenius(to_superoperator(gen, Picture::Heisenberg).mat) == 0.0);
  }
  SECTION("qubit deco spectrum {0,0,-1,-1}") {
    Superoperator s = to_superoperator(deco_inline(2, 1.0), Picture::Heisenberg);
    Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Matrix>(s.mat).eigenvalues();
    RealVector re = ev.real();
    std::sort(re.begin(), re.end());
    REQUIRE(re(0) == Catch::Approx(-1.0).margin(1e-10));
    REQUIRE(re(1) == Catch::Approx(-1.0).margin(1e-10));
    REQUIRE(re(2) == Catch::Approx(0.0).margin(1e-10));
    REQUIRE(re(3) == Catch::Approx(0.0).margin(1e-10));
    REQUIRE(ev.imag().cwiseAbs().maxCoeff() <= 1e-10);
  }
  SECTION("schrodinger matrix is the HS dual of the heisenberg matrix") {
    Lindbladian gen = random_gksl(3, 2, rng);
    Matrix sh = to_superoperator(gen, Picture::Heisenberg).mat;
    Matrix ss = to_superoperator(gen, Picture::Schrodinger).mat;
    REQUIRE(frobenius(ss - sh.adjoint()) <= 1e-12 * std::max(1.0, frobenius(sh)));
  }
  SECTION("matrix action agrees with the direct application") {
    Lindbladian gen = random_gksl(4, 2, rng);
    Superoperator sh = to_superoperator(gen, Picture::Heisenberg);
    Superoperator ss = to_superoperator(gen, Picture::Schrodinger);
    for (int k = 0; k < 6; ++k) {
      Matrix x = random_ginibre(4, rng);
      REQUIRE(frobenius(sh.apply(x) - apply_generator(gen, x)) <= 1e-12);
      REQUIRE(frobenius(ss.apply(x) - apply_predual(gen, x)) <= 1e-12);
    }
  }
}

TEST_CASE("semigroup evaluation", "[lindblad]") {
  Rng rng(9);
  SECTION("t = 0 gives the identity") {
    Superoperator p0 = semigroup(deco_inline(3, 1.0), 0.0, Picture::Heisenberg);
    REQUIRE(frobenius(p0.mat - Matrix::Identity(9, 9)) <= 1e-14);
  }
  SECTION("negative time rejected") {
    REQUIRE_THROWS_AS(semigroup(deco_inline(2, 1.0), -0.1, Picture::Heisenberg), RejectedInput);
  }
  SECTION("deco closed form e^{-gt} rho + (1-e^{-gt}) diag(rho)") {
    Lindbladian gen = deco_inline(3, 0.7);
    Matrix rho = random_state(3, rng);
    for (double t : {0.3, 1.0, 4.0}) {
      Matrix evolved = semigroup(gen, t, Picture::Schrodinger).apply(rho);
      Matrix expect = std::exp(-0.7 * t) * rho + (1 - std::exp(-0.7 * t)) * pinch_diagonal(rho);
      REQUIRE(frobenius(evolved - expect) <= 1e-12);
    }
  }
  SECTION("semigroup property P_{t+s} = P_t P_s") {
    Lindbladian gen = random_gksl(3, 2, rng);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int k = 0; k < 5; ++k) {
      double t = u(rng), s = u(rng);
      Matrix lhs = semigroup(gen, t + s, Picture::Heisenberg).mat;
      Matrix rhs = semigroup(gen, t, Picture::Heisenberg).mat *
                   semigroup(gen, s, Picture::Heisenberg).mat;
      REQUIRE(frobenius(lhs - rhs) <= 1e-8 * std::max(1.0, frobenius(lhs)));
    }
  }
  SECTION("complete positivity: Choi matrix of P_t is PSD") {
    for (int k = 0; k < 4; ++k) {
      Lindbladian gen = random_gksl(3, 2, rng);
      Superoperator pt = semigroup(gen, 0.5, Picture::Schrodinger);
      Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(choi_matrix(pt)));
      REQUIRE(es.eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("invariant states", "[lindblad]") {
  Rng rng(13);
  SECTION("deco qubit: diagonal kernel and maximally mixed pick") {
    InvariantStates inv = invariant_states(deco_inline(2, 1.0));
    REQUIRE(inv.kernel.size() == 2);
    for (const auto& k : inv.kernel) {
      REQUIRE(std::abs(k(0, 1)) <= 1e-10);
      REQUIRE(std::abs(k(1, 0)) <= 1e-10);
    }
    REQUIRE(frobenius(inv.faithful_pick.mat - identity(2) / 2.0) <= 1e-10);
    REQUIRE(inv.faithful_pick.faithful);
  }
  SECTION("primitive depolarizing: unique invariant tau") {
    Matrix tau = Matrix::Zero(2, 2);
    tau.diagonal() << 0.7, 0.3;
    std::vector<Matrix> jumps;
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j)
        jumps.push_back(std::sqrt(tau(j, j).real()) * matrix_unit(2, j, i));
    Lindbladian gen = make_lindbladian(Matrix::Zero(2, 2), std::move(jumps));
    InvariantStates inv = invariant_states(gen);
    REQUIRE(inv.kernel.size() == 1);
    REQUIRE(frobenius(inv.faithful_pick.mat - tau) <= 1e-9);
  }
  SECTION("bipartite factor: rho_A ox tau lies in the kernel") {
    // H_A = sigma_z on A, depolarizing to tau on B.
    Matrix tau = Matrix::Zero(2, 2);
    tau.diagonal() << 0.6, 0.4;
    std::vector<Matrix> jumps;
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j)
        jumps.push_back(kron(identity(2), std::sqrt(tau(j, j).real()) * matrix_unit(2, j, i)));
    Lindbladian gen = make_lindbladian(kron(pauli('z'), identity(2)), std::move(jumps));
    Matrix rho_a = Matrix::Zero(2, 2);
    rho_a.diagonal() << 0.25, 0.75;
    REQUIRE(frobenius(apply_predual(gen, kron(rho_a, tau))) <= 1e-10);
    InvariantStates inv = invariant_states(gen);
    REQUIRE(inv.faithful_pick.faithful);
    REQUIRE(frobenius(apply_predual(gen, inv.faithful_pick.mat)) <= 1e-9);
  }
  SECTION("amplitude damping has no faithful invariant state") {
    Matrix lower = matrix_unit(2, 0, 1);
    Lindbladian gen = make_lindbladian(Matrix::Zero(2, 2), {lower});
    REQUIRE_THROWS_AS(invariant_states(gen), StructuralError);
  }
}

TEST_CASE("weighted adjoints", "[lindblad]") {
  Rng rng(17);
  SECTION("deco is KMS self-adjoint at the maximally mixed weight") {
    Superoperator s = to_superoperator(deco_inline(2, 1.0), Picture::Heisenberg);
    Superoperator hat = adjoint_wrt(s, {maximally_mixed(2), InnerKind::KMS});
    REQUIRE(frobenius(s.mat - hat.mat) <= 1e-12);
  }
  SECTION("Hamiltonian part is antisymmetric when the weight commutes") {
    Matrix h = Matrix::Zero(3, 3);
    h.diagonal() << 1.0, -0.4, 0.2;
    Superoperator s = to_superoperator(make_lindbladian(h, {}), Picture::Heisenberg);
    Matrix sigma = Matrix::Zero(3, 3);
    sigma.diagonal() << 0.5, 0.3, 0.2;
    Superoperator hat = adjoint_wrt(s, {make_density(sigma), InnerKind::KMS});
    REQUIRE(frobenius(hat.mat + s.mat) <= 1e-10);
  }
  SECTION("double adjoint returns the original") {
    Lindbladian gen = random_gksl(3, 2, rng);
    Superoperator s = to_superoperator(gen, Picture::Heisenberg);
    WeightedInner w{make_density(random_state(3, rng)), InnerKind::KMS};
    Superoperator twice = adjoint_wrt(adjoint_wrt(s, w), w);
    REQUIRE(frobenius(twice.mat - s.mat) <= 1e-10 * std::max(1.0, frobenius(s.mat)));
  }
  SECTION("adjoint relation holds on a basis") {
    Lindbladian gen = random_gksl(3, 2, rng);
    Superoperator s = to_superoperator(gen, Picture::Heisenberg);
    for (auto kind : {InnerKind::KMS, InnerKind::GNS}) {
      WeightedInner w{make_density(random_state(3, rng)), kind};
      Superoperator hat = adjoint_wrt(s, w);
      for (Eigen::Index a = 0; a < 9; ++a)
        for (Eigen::Index b = 0; b < 9; ++b) {
          Matrix x = matrix_unit(3, a / 3, a % 3), y = matrix_unit(3, b / 3, b % 3);
          Complex lhs = weighted_inner(w, x, s.apply(y));
          Complex rhs = weighted_inner(w, hat.apply(x), y);
          REQUIRE(std::abs(lhs - rhs) <= 1e-9);
        }
    }
  }
  SECTION("KMS adjoint matches the conjugation formula for the generator") {
    Lindbladian gen = random_gksl(3, 2, rng);
    DensityMatrix sigma = make_density(random_state(3, rng));
    Superoperator hat =
        adjoint_wrt(to_superoperator(gen, Picture::Heisenberg), {sigma, InnerKind::KMS});
    Matrix rs = mat_sqrt(sigma.mat), rsi = mat_pow(sigma.mat, -0.5);
    for (int k = 0; k < 5; ++k) {
      Matrix x = random_hermitian(3, rng);
      Matrix expect = rsi * apply_predual(gen, rs * x * rs) * rsi;
      REQUIRE(frobenius(hat.apply(x) - expect) <= 1e-9 * std::max(1.0, frobenius(expect)));
    }
  }
  SECTION("non-faithful weight rejected") {
    Matrix proj = Matrix::Zero(2, 2);
    proj(0, 0) = 1.0;
    Superoperator s = to_superoperator(deco_inline(2, 1.0), Picture::Heisenberg);
    REQUIRE_THROWS_AS(adjoint_wrt(s, {DensityMatrix{proj, false}, InnerKind::KMS}), DomainError);
  }
}

namespace {

QmsContext context_with_sigma_tr(const Lindbladian& gen, const Matrix& sigma_tr) {
  QmsContext ctx = make_context(gen);
  ctx.sigma_tr = make_density(sigma_tr);
  ctx.reversible = check_reversible(ctx);
  ctx.dbc = check_dbc(ctx);
  return ctx;
}

double derivation_residual(const QmsContext& ctx, const std::vector<ModularJump>& jumps) {
  const Eigen::Index d = ctx.gen.dim;
  WeightedInner w{ctx.sigma_tr, InnerKind::KMS};
  double worst = 0.0;
  for (Eigen::Index a = 0; a < d * d; ++a)
    for (Eigen::Index b = 0; b < d * d; ++b) {
      Matrix x = matrix_unit(d, a / d, a % d), y = matrix_unit(d, b / d, b % d);
      Complex dirichlet = -weighted_inner(w, x, apply_generator(ctx.gen, y));
      Complex sum = 0.0;
      for (const auto& mj : jumps)
        sum += weighted_inner(w, mj.v * x - x * mj.v, mj.v * y - y * mj.v);
      worst = std::max(worst, std::abs(dirichlet - sum));
    }
  return worst;
}

}  // namespace

TEST_CASE("reversibility and detailed balance checks", "[lindblad]") {
  SECTION("deco: reversible and DBC") {
    QmsContext ctx = context_with_sigma_tr(deco_inline(3, 1.0), identity(3) / 3.0);
    REQUIRE(ctx.reversible);
    REQUIRE(ctx.dbc);
  }
  SECTION("deco plus diagonal Hamiltonian: not reversible") {
    Lindbladian gen = deco_inline(3, 1.0);
    Matrix h = Matrix::Zero(3, 3);
    h.diagonal() << 1.0, 2.0, -3.0;
    gen.hamiltonian = h;
    QmsContext ctx = context_with_sigma_tr(gen, identity(3) / 3.0);
    REQUIRE_FALSE(ctx.reversible);
    REQUIRE_FALSE(ctx.dbc);
  }
  SECTION("single self-adjoint jump: DBC at I/2") {
    Matrix sx = pauli('x');
    QmsContext ctx =
        context_with_sigma_tr(make_lindbladian(Matrix::Zero(2, 2), {sx}), identity(2) / 2.0);
    REQUIRE(ctx.dbc);
    REQUIRE(ctx.reversible);
  }
}

TEST_CASE("canonical GKSL extraction", "[lindblad]") {
  Rng rng(19);
  SECTION("round-trips a random generator") {
    Lindbladian gen = random_gksl(3, 2, rng);
    Superoperator s = to_superoperator(gen, Picture::Schrodinger);
    CanonicalForm cf = canonical_gksl(s);
    for (const auto& v : cf.jumps) REQUIRE(std::abs(v.trace()) <= 1e-10);
    std::vector<Matrix> scaled;
    for (std::size_t j = 0; j < cf.jumps.size(); ++j)
      scaled.push_back(std::sqrt(cf.weights[j]) * cf.jumps[j]);
    Superoperator rebuilt = to_superoperator(make_lindbladian(cf.hamiltonian, std::move(scaled)),
                                             Picture::Schrodinger);
    REQUIRE(frobenius(rebuilt.mat - s.mat) <= 1e-9 * std::max(1.0, frobenius(s.mat)));
  }
  SECTION("rejects a non-CCP map with a certificate") {
    // gamma (Id - E_diag) is the deco generator with flipped dissipation sign.
    Superoperator s = to_superoperator(deco_inline(2, 1.0), Picture::Schrodinger);
    s.mat = -s.mat;
    REQUIRE_THROWS_AS(canonical_gksl(s), StructuralError);
  }
}

TEST_CASE("DBC derivation decomposition", "[lindblad]") {
  SECTION("deco: central sigma_tr, all omega zero, Dirichlet identity") {
    QmsContext ctx = context_with_sigma_tr(deco_inline(3, 1.4), identity(3) / 3.0);
    auto jumps = dbc_jump_decomposition(ctx);
    REQUIRE_FALSE(jumps.empty());
    for (const auto& mj : jumps) {
      REQUIRE(std::abs(mj.omega) <= 1e-10);
      REQUIRE(frobenius(ctx.sigma_tr.mat * mj.v - std::exp(mj.omega) * mj.v * ctx.sigma_tr.mat) <=
              1e-8 * frobenius(mj.v));
    }
    REQUIRE(derivation_residual(ctx, jumps) <= 1e-7);
  }
  SECTION("single self-adjoint jump: one derivation, omega zero") {
    Matrix sx = pauli('x');
    QmsContext ctx =
        context_with_sigma_tr(make_lindbladian(Matrix::Zero(2, 2), {sx}), identity(2) / 2.0);
    auto jumps = dbc_jump_decomposition(ctx);
    REQUIRE(jumps.size() == 1);
    REQUIRE(std::abs(jumps[0].omega) <= 1e-12);
    REQUIRE(derivation_residual(ctx, jumps) <= 1e-7);
  }
  SECTION("thermal qubit: nontrivial modular frequencies") {
    // Raising/lowering rates in detailed balance with sigma = diag(2/3, 1/3).
    Matrix lower = matrix_unit(2, 0, 1), raise = matrix_unit(2, 1, 0);
    Lindbladian gen =
        make_lindbladian(Matrix::Zero(2, 2), {lower, std::sqrt(0.5) * raise});
    Matrix sigma = Matrix::Zero(2, 2);
    sigma.diagonal() << 2.0 / 3.0, 1.0 / 3.0;
    QmsContext ctx = context_with_sigma_tr(gen, sigma);
    REQUIRE(ctx.dbc);
    auto jumps = dbc_jump_decomposition(ctx);
    bool saw_positive = false, saw_negative = false;
    for (const auto& mj : jumps) {
      REQUIRE(frobenius(ctx.sigma_tr.mat * mj.v - std::exp(mj.omega) * mj.v * ctx.sigma_tr.mat) <=
              1e-8 * frobenius(mj.v));
      if (mj.omega > 0.1) saw_positive = true;
      if (mj.omega < -0.1) saw_negative = true;
    }
    REQUIRE(saw_positive);
    REQUIRE(saw_negative);
    REQUIRE(derivation_residual(ctx, jumps) <= 1e-7);
    Superoperator rebuilt = rebuild_from_modular_jumps(jumps, 2);
    REQUIRE(frobenius(rebuilt.mat - ctx.heisenberg.mat) <=
            1e-7 * std::max(1.0, frobenius(ctx.heisenberg.mat)));
  }
  SECTION("reconstruction reproduces the dissipative superoperator") {
    QmsContext ctx = context_with_sigma_tr(deco_inline(3, 0.9), identity(3) / 3.0);
    Superoperator rebuilt = rebuild_from_modular_jumps(dbc_jump_decomposition(ctx), 3);
    REQUIRE(frobenius(rebuilt.mat - ctx.heisenberg.mat) <=
            1e-7 * std::max(1.0, frobenius(ctx.heisenberg.mat)));
  }
  SECTION("rejected without detailed balance") {
    Lindbladian gen = deco_inline(2, 1.0);
    gen.hamiltonian = pauli('z');
    QmsContext ctx = context_with_sigma_tr(gen, identity(2) / 2.0);
    REQUIRE_THROWS_AS(dbc_jump_decomposition(ctx), StructuralError);
  }
}

TEST_CASE("generator invariant properties", "[lindblad]") {
  Rng rng(29);
  Lindbladian gen = random_gksl(3, 2, rng);
  InvariantStates inv = invariant_states(gen);
  SECTION("trace preservation along the flow") {
    for (double t : {0.1, 1.0, 10.0}) {
      Superoperator pt = semigroup(gen, t, Picture::Schrodinger);
      for (int k = 0; k < 5; ++k) {
        Matrix rho = random_state(3, rng);
        REQUIRE(std::abs(pt.apply(rho).trace().real() - 1.0) <= 1e-9);
      }
    }
  }
  SECTION("positivity on pure states") {
    Superoperator pt = semigroup(gen, 0.7, Picture::Schrodinger);
    for (int k = 0; k < 5; ++k) {
      Matrix rho = pt.apply(random_pure_state(3, rng));
      Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(rho));
      REQUIRE(es.eigenvalues().minCoeff() >= -1e-8);
    }
  }
  SECTION("invariance of the faithful pick") {
    for (double t : {0.5, 2.0}) {
      Superoperator pt = semigroup(gen, t, Picture::Schrodinger);
      REQUIRE(frobenius(pt.apply(inv.faithful_pick.mat) - inv.faithful_pick.mat) <= 1e-8);
    }
  }
  SECTION("Heisenberg/Schrodinger duality on random pairs") {
    Superoperator ph = semigroup(gen, 0.9, Picture::Heisenberg);
    Superoperator ps = semigroup(gen, 0.9, Picture::Schrodinger);
    for (int k = 0; k < 5; ++k) {
      Matrix x = random_ginibre(3, rng), rho = random_ginibre(3, rng);
      Complex lhs = (ph.apply(x) * rho).trace();
      Complex rhs = (x * ps.apply(rho)).trace();
      REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
  }
}
