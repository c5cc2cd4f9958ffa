#pragma once

// Scalar functionals of states and observables: variances and their
// decoherence-free counterparts, relative entropies, Dirichlet and
// p-Dirichlet forms, entropy/information production, and the L_p-regularity
// diagnostics.

#include "qdeco/catalog.hpp"
#include "qdeco/dfstructure.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace qdeco {

/// -Tr[rho log rho] with the 0 log 0 = 0 convention.
inline double von_neumann_entropy(const Matrix& rho) {
  HermitianEig eig = eig_hermitian(rho);
  double s = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    double x = eig.values(i);
    if (x > policy().log_floor) s -= x * std::log(x);
  }
  return s;
}

/// Tr[rho (log rho - log sigma)]; spectral cutoff handles 0 log 0 on rho.
inline double relative_entropy(const Matrix& rho, const Matrix& sigma) {
  if (rho.rows() != sigma.rows()) throw RejectedInput("relative_entropy: dimension mismatch");
  if (!is_hermitian(rho) || !is_hermitian(sigma))
    throw RejectedInput("relative_entropy: states must be Hermitian");
  Matrix log_sigma = mat_log_floored(sigma).first;
  HermitianEig eig = eig_hermitian(rho);
  double value = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    double x = eig.values(i);
    if (x <= policy().log_floor) continue;
    Vector v = eig.vectors.col(i);
    value += x * (std::log(x) - (v.adjoint() * log_sigma * v)(0).real());
  }
  return value;
}

/// Tr[(rho-center) weight^{-1/2} (rho-center) weight^{-1/2}].
inline double chi_squared_weighted(const Matrix& rho, const Matrix& center,
                                   const Matrix& weight) {
  Matrix isq = mat_pow(weight, -0.5);
  Matrix diff = rho - center;
  return (diff * isq * diff * isq).trace().real();
}

/// chi^2 divergence Tr[(rho-sigma) sigma^{-1/2} (rho-sigma) sigma^{-1/2}].
inline double chi_squared(const Matrix& rho, const Matrix& sigma) {
  return chi_squared_weighted(rho, sigma, sigma);
}

struct RegularityReport {
  std::vector<double> margins;      // EP - 2 E_L(sigma^{-1/4} rho^{1/2} sigma^{-1/4})
  std::vector<double> margins_dbc;  // factor-4 variant, meaningful under DBC
  double min_margin = 0.0;
  int violations = 0;
};

struct LpRegularityReport {
  struct Row {
    double p = 2.0;
    double margin_strong = 0.0;  // E_p(X) - (2/p) E_2(I_{2,p}(X))
    double margin_weak = 0.0;    // weak-regularity variant
  };
  std::vector<Row> rows;
  double min_strong = 0.0;
  int violations_strong = 0;
};

// ---------------------------------------------------------------------------

class Functionals {
 public:
  Functionals(QmsContext ctx, ConditionalExpectation cond,
              std::optional<BipartiteInfo> bipartite = std::nullopt)
      : ctx_(std::move(ctx)), cond_(std::move(cond)), bipartite_(std::move(bipartite)) {
    if (!ctx_.sigma_tr.faithful) throw RejectedInput("Functionals: sigma_tr must be faithful");
    kms_ = WeightedInner{ctx_.sigma_tr, InnerKind::KMS};
    sqrt_sig_ = mat_sqrt(ctx_.sigma_tr.mat);
    iquart_sig_ = mat_pow(ctx_.sigma_tr.mat, -0.25);
    log_sig_ = mat_log(ctx_.sigma_tr.mat);
  }

  explicit Functionals(const AnalyzedQms& sys,
                       std::optional<BipartiteInfo> bipartite = std::nullopt)
      : Functionals(sys.ctx, sys.cond, std::move(bipartite)) {}

  const QmsContext& ctx() const { return ctx_; }
  const ConditionalExpectation& cond() const { return cond_; }
  const std::optional<BipartiteInfo>& bipartite() const { return bipartite_; }
  int log_floor_events() const { return log_floor_events_->load(); }

  Matrix rho_df(const Matrix& rho) const { return cond_.schrodinger.apply(rho); }

  // -- variances ------------------------------------------------------------

  double variance_sigma(const Matrix& x) const {
    require_hermitian(x);
    Complex mean = (ctx_.sigma_tr.mat * x).trace();
    Matrix centered = x - mean * identity(ctx_.gen.dim);
    return weighted_norm2(kms_, centered);
  }

  double df_variance(const Matrix& x) const {
    require_hermitian(x);
    Matrix centered = x - cond_.heisenberg.apply(x);
    return weighted_norm2(kms_, centered);
  }

  // -- entropies ------------------------------------------------------------

  double df_entropy(const Matrix& rho) const { return relative_entropy(rho, rho_df(rho)); }

  // -- Dirichlet forms -------------------------------------------------------

  double dirichlet(const Matrix& x) const { return dirichlet(x, x); }

  double dirichlet(const Matrix& x, const Matrix& y) const {
    require_hermitian(x);
    require_hermitian(y);
    return -weighted_inner(kms_, x, apply_generator(ctx_.gen, y)).real();
  }

  /// sigma^{-1/(2q)} |sigma^{1/(2p)} X sigma^{1/(2p)}|^{p/q} sigma^{-1/(2q)}.
  Matrix power_transform(const Matrix& x, double p, double q) const {
    Matrix inner = mat_pow(ctx_.sigma_tr.mat, 0.5 / p) * x * mat_pow(ctx_.sigma_tr.mat, 0.5 / p);
    ScalarFunction abspow{"abs^{p/q}",
                          [e = p / q](double t) { return std::pow(std::abs(t), e); },
                          [e = p / q](double t) {
                            return e * std::pow(std::abs(t), e - 1.0) * (t < 0 ? -1.0 : 1.0);
                          }};
    Matrix outer = mat_pow(ctx_.sigma_tr.mat, -0.5 / q);
    return outer * matfunc(inner, abspow) * outer;
  }

  double p_dirichlet(const Matrix& x, double p) const {
    require_hermitian(x);
    if (p < 1.0) throw RejectedInput("p_dirichlet: p must be at least 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(x));
    if (es.eigenvalues().minCoeff() <= policy().psd_slack)
      throw DomainError("p_dirichlet: argument must be positive definite");
    Matrix lx = apply_generator(ctx_.gen, x);
    if (p == 1.0) {
      // Limit branch: -1/2 Tr[s^{1/2} L(X) s^{1/2} (log(s^{1/2} X s^{1/2}) - log s)].
      Matrix mid = mat_log(sqrt_sig_ * x * sqrt_sig_) - log_sig_;
      return -0.5 * (sqrt_sig_ * lx * sqrt_sig_ * mid).trace().real();
    }
    const double q = p / (p - 1.0);  // Hoelder conjugate; p/(2(p-1)) = q/2
    Matrix weight = power_transform(x, p, q);
    return -0.5 * q * weighted_inner(kms_, weight, lx).real();
  }

  // -- entropy production -----------------------------------------------------

  double entropy_production(const Matrix& rho) const {
    require_hermitian(rho);
    auto [log_rho, floored] = mat_log_floored(rho);
    if (floored) log_floor_events_->fetch_add(1);
    Matrix drho = apply_predual(ctx_.gen, rho);
    return -(drho * (log_rho - log_sig_)).trace().real();
  }

  // -- bipartite functionals ---------------------------------------------------

  std::pair<Eigen::Index, Eigen::Index> split() const {
    if (!bipartite_) throw RejectedInput("functional requires a bipartite model");
    return {bipartite_->dim_a, bipartite_->dim_b};
  }

  double mutual_information(const Matrix& rho) const {
    auto [da, db] = split();
    return mutual_information(rho, da, db);
  }

  /// S(rho_A) + S(rho_B) - S(rho); cross-checked against D(rho || rho_A ox rho_B).
  double mutual_information(const Matrix& rho, Eigen::Index da, Eigen::Index db) const {
    require_hermitian(rho);
    Matrix ra = partial_trace_second(rho, da, db), rb = partial_trace_first(rho, da, db);
    double by_entropies = von_neumann_entropy(ra) + von_neumann_entropy(rb) -
                          von_neumann_entropy(rho);
    double by_divergence = relative_entropy(rho, kron(ra, rb));
    if (std::abs(by_entropies - by_divergence) > 1e-8 * std::max(1.0, std::abs(by_entropies)))
      throw StructuralError("mutual_information: the two evaluation routes disagree");
    return by_entropies;
  }

  double information_production(const Matrix& rho) const {
    auto [da, db] = split();
    require_hermitian(rho);
    Matrix ra = partial_trace_second(rho, da, db), rb = partial_trace_first(rho, da, db);
    auto [log_rho, floored] = mat_log_floored(rho);
    if (floored) log_floor_events_->fetch_add(1);
    Matrix log_prod = mat_log_floored(kron(ra, rb)).first;
    Matrix drho = apply_predual(ctx_.gen, rho);
    return -(drho * (log_rho - log_prod)).trace().real();
  }

  /// Entropy production of the inner generator at its own invariant state.
  double entropy_production_inner(const Matrix& rho_b) const {
    if (!bipartite_) throw RejectedInput("entropy_production_inner requires a bipartite model");
    auto [log_rho, floored] = mat_log_floored(rho_b);
    if (floored) log_floor_events_->fetch_add(1);
    Matrix log_tau = mat_log(bipartite_->tau.mat);
    Matrix drho = apply_predual(bipartite_->inner, rho_b);
    return -(drho * (log_rho - log_tau)).trace().real();
  }

  // -- regularity diagnostics ---------------------------------------------------

  RegularityReport check_l1_regularity(const std::vector<Matrix>& states) const {
    RegularityReport rep;
    for (const auto& rho : states) {
      Matrix arg = iquart_sig_ * mat_sqrt(rho) * iquart_sig_;
      double e = dirichlet(arg);
      double ep = entropy_production(rho);
      rep.margins.push_back(ep - 2.0 * e);
      rep.margins_dbc.push_back(ep - 4.0 * e);
    }
    rep.min_margin = rep.margins.empty() ? 0.0 : *std::min_element(rep.margins.begin(),
                                                                   rep.margins.end());
    for (double m : rep.margins)
      if (m < -1e-8) ++rep.violations;
    return rep;
  }

  LpRegularityReport check_strong_lp_regularity(const std::vector<Matrix>& observables,
                                                const std::vector<double>& p_grid) const {
    LpRegularityReport rep;
    rep.min_strong = std::numeric_limits<double>::infinity();
    for (const auto& x : observables)
      for (double p : p_grid) {
        LpRegularityReport::Row row;
        row.p = p;
        double ep = p_dirichlet(x, p);
        Matrix i2p = power_transform(x, p, 2.0);
        double e2 = dirichlet(i2p);
        row.margin_strong = ep - (2.0 / p) * e2;
        double weak_factor = p <= 2.0 ? 1.0 : (p - 1.0);
        row.margin_weak = ep - weak_factor * e2;
        rep.min_strong = std::min(rep.min_strong, row.margin_strong);
        if (row.margin_strong < -1e-8) ++rep.violations_strong;
        rep.rows.push_back(row);
      }
    if (rep.rows.empty()) rep.min_strong = 0.0;
    return rep;
  }

  // -- second-order (perturbative) forms ---------------------------------------
  // For sigma in N_* and E_N(Y) = 0:
  //   D(rho_eps || sigma)  = eps^2/2 <Y, Theta_sigma(g)> + o(eps^2),
  //   EP(rho_eps)          = eps^2 E_L(Y, Theta_sigma(g)) + o(eps^2),
  // with g = sigma_tr^{1/2} Y sigma_tr^{1/2}.

  Matrix theta_weighted(const DensityMatrix& sigma, const Matrix& y) const {
    return theta_map(sigma, sqrt_sig_ * y * sqrt_sig_);
  }

  double theta_pairing(const DensityMatrix& sigma, const Matrix& y) const {
    return weighted_inner(kms_, y, theta_weighted(sigma, y)).real();
  }

  double dirichlet_theta(const DensityMatrix& sigma, const Matrix& y) const {
    return dirichlet(y, hermitize(theta_weighted(sigma, y)));
  }

 private:
  void require_hermitian(const Matrix& x) const {
    if (!is_hermitian(x, 1e-9)) throw RejectedInput("functional requires a Hermitian argument");
  }

  QmsContext ctx_;
  ConditionalExpectation cond_;
  std::optional<BipartiteInfo> bipartite_;
  WeightedInner kms_;
  Matrix sqrt_sig_, iquart_sig_, log_sig_;
  std::shared_ptr<std::atomic<int>> log_floor_events_ =
      std::make_shared<std::atomic<int>>(0);
};

inline Functionals make_functionals(const AnalyzedQms& sys,
                                    std::optional<BipartiteInfo> bip = std::nullopt) {
  return Functionals(sys, std::move(bip));
}

}  // namespace qdeco
