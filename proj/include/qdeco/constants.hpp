#pragma once

// Functional-inequality constants: the DF-Poincare constant (spectral gap of
// the KMS-symmetrized generator off the algebra) computed exactly, and
// upper estimates of the DF modified log-Sobolev constant alpha_N and the
// information constant beta_N by seeded multi-start minimization.

#include "qdeco/functionals.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <utility>
#include <vector>

namespace qdeco {

// ---------------------------------------------------------------------------
// Spectral gap

struct GapResult {
  double lambda = 0.0;
  Matrix eigvec;  // Hermitian achiever of the Poincare ratio
  enum class Method { SymmetrizedSpectrum } method = Method::SymmetrizedSpectrum;
};

/// Spectral gap of (L + L^)/2 restricted to the KMS-orthogonal complement of
/// N(P): smallest nonzero decay rate, with its (Hermitian) eigenvector.
inline GapResult spectral_gap(const Functionals& fn) {
  const QmsContext& ctx = fn.ctx();
  const Eigen::Index d = ctx.gen.dim, n = d * d;
  Matrix q = mat_pow(ctx.sigma_tr.mat, 0.25);
  Matrix qi = mat_pow(ctx.sigma_tr.mat, -0.25);
  Matrix ghalf = kron(q.transpose(), q), ghalf_inv = kron(qi.transpose(), qi);

  Superoperator hat = adjoint_wrt(ctx.heisenberg, {ctx.sigma_tr, InnerKind::KMS});
  Matrix sym = 0.5 * (ctx.heisenberg.mat + hat.mat);
  Matrix flat = hermitize(ghalf * sym * ghalf_inv);
  Matrix proj = hermitize(ghalf * fn.cond().heisenberg.mat * ghalf_inv);
  Matrix restricted = hermitize((Matrix::Identity(n, n) - proj) * flat *
                                (Matrix::Identity(n, n) - proj));

  Eigen::SelfAdjointEigenSolver<Matrix> es(restricted);
  double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  double cut = 1e-10 * scale;
  Eigen::Index zeros = 0;
  double lambda = 0.0;
  Eigen::Index gap_index = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    double ev = es.eigenvalues()(i);
    if (ev > cut)
      throw StructuralError("spectral_gap: symmetrized generator has positive spectrum");
    if (std::abs(ev) <= cut) {
      ++zeros;
    } else if (-ev < lambda || gap_index < 0) {
      lambda = -ev;
      gap_index = i;
    }
  }
  if (zeros != static_cast<Eigen::Index>(fn.cond().structure.algebra_dim()))
    throw StructuralError(
        "spectral_gap: kernel of the symmetrization differs from N(P) (dimension " +
        std::to_string(zeros) + ")");
  if (gap_index < 0) throw StructuralError("spectral_gap: no decaying direction found");

  Matrix x = unvec(ghalf_inv * es.eigenvectors().col(gap_index), d);
  Matrix herm = hermitize(x), skew = hermitize(kI * (x - x.adjoint()) * 0.5);
  Matrix achiever = frobenius(herm) >= frobenius(skew) ? herm : skew;
  achiever /= frobenius(achiever);

  GapResult out;
  out.lambda = lambda;
  out.eigvec = achiever;
  double ratio = fn.dirichlet(achiever) / fn.df_variance(achiever);
  if (std::abs(ratio - lambda) > 1e-7 * std::max(1.0, lambda))
    throw StructuralError("spectral_gap: achiever ratio " + std::to_string(ratio) +
                          " disagrees with the gap " + std::to_string(lambda));
  return out;
}

/// Minimum Dirichlet/DF-variance ratio over the samples plus the gap achiever;
/// samples inside N(P) (vanishing DF-variance) are skipped.
inline double poincare_check(const Functionals& fn, const GapResult& gap,
                             const std::vector<Matrix>& samples) {
  double best = fn.dirichlet(gap.eigvec) / fn.df_variance(gap.eigvec);
  for (const auto& x : samples) {
    double var = fn.df_variance(x);
    if (var < 1e-10) continue;
    best = std::min(best, fn.dirichlet(x) / var);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Nelder-Mead (derivative-free local search on R^n)

namespace detail {

inline RealVector nelder_mead(const std::function<double(const RealVector&)>& f, RealVector x0,
                              int max_iters, double step = 0.1) {
  const Eigen::Index n = x0.size();
  std::vector<RealVector> xs;
  std::vector<double> fs;
  xs.push_back(x0);
  for (Eigen::Index i = 0; i < n; ++i) xs.push_back(x0 + step * RealVector::Unit(n, i));
  for (auto& x : xs) fs.push_back(f(x));

  auto order = [&] {
    for (std::size_t i = 1; i < xs.size(); ++i)
      for (std::size_t j = i; j > 0 && fs[j] < fs[j - 1]; --j) {
        std::swap(fs[j], fs[j - 1]);
        std::swap(xs[j], xs[j - 1]);
      }
  };
  order();
  for (int it = 0; it < max_iters; ++it) {
    RealVector centroid = RealVector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += xs[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(n);
    const RealVector& worst = xs.back();
    RealVector refl = centroid + (centroid - worst);
    double frefl = f(refl);
    if (frefl < fs.front()) {
      RealVector expa = centroid + 2.0 * (centroid - worst);
      double fexpa = f(expa);
      xs.back() = fexpa < frefl ? expa : refl;
      fs.back() = std::min(fexpa, frefl);
    } else if (frefl < fs[fs.size() - 2]) {
      xs.back() = refl;
      fs.back() = frefl;
    } else {
      RealVector contr = centroid + 0.5 * (worst - centroid);
      double fcontr = f(contr);
      if (fcontr < fs.back()) {
        xs.back() = contr;
        fs.back() = fcontr;
      } else {
        for (std::size_t i = 1; i < xs.size(); ++i) {
          xs[i] = xs.front() + 0.5 * (xs[i] - xs.front());
          fs[i] = f(xs[i]);
        }
      }
    }
    order();
    if (std::abs(fs.back() - fs.front()) <= 1e-12 * std::max(1.0, std::abs(fs.front()))) break;
  }
  return xs.front();
}

// Chart between real parameter vectors and Hermitian matrices.
inline Matrix params_to_hermitian(const RealVector& p, Eigen::Index d) {
  Matrix a = Matrix::Zero(d, d);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < d; ++i) a(i, i) = p(idx++);
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      a(i, j) = Complex(p(idx), -p(idx + 1)) * inv_rt2;
      a(j, i) = Complex(p(idx), p(idx + 1)) * inv_rt2;
      idx += 2;
    }
  return a;
}

inline RealVector hermitian_to_params(const Matrix& a) {
  const Eigen::Index d = a.rows();
  RealVector p(d * d);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < d; ++i) p(idx++) = a(i, i).real();
  const double rt2 = std::sqrt(2.0);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      p(idx++) = a(i, j).real() * rt2;
      p(idx++) = -a(i, j).imag() * rt2;
    }
  return p;
}

// exp chart keeps iterates faithful by construction.
inline Matrix params_to_state(const RealVector& p, Eigen::Index d) {
  Matrix expa = matfunc(params_to_hermitian(p, d), sf::exp());
  return expa / expa.trace().real();
}

// Thread-safe collector of evaluated ratios.
struct RatioTracker {
  std::mutex mu;
  double best = std::numeric_limits<double>::infinity();
  Matrix witness;
  double worst = -std::numeric_limits<double>::infinity();
  long evaluations = 0;

  void record(double ratio, const Matrix& state) {
    std::lock_guard<std::mutex> lock(mu);
    ++evaluations;
    worst = std::max(worst, ratio);
    if (ratio < best) {
      best = ratio;
      witness = state;
    }
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// DF modified log-Sobolev constant (upper estimate)

struct Budget {
  int starts = 32;
  int iterations = 500;
  unsigned seed = 42;
};

struct MlsiEstimate {
  double alpha_upper = 0.0;  // best ratio found: upper bound on the infimum
  Matrix witness;
  std::vector<double> perturbative_ratios;
  struct Trace {
    int start = 0;
    double best = 0.0;
  };
  std::vector<Trace> optimizer_trace;
  long evaluations = 0;
};

namespace detail {

/// Smallest generalized eigenvector of the second-order forms from the
/// expansion around sigma: E_L(Y, Theta(g(Y))) against <Y, Theta(g(Y))>,
/// restricted to Hermitian Y with E_N(Y) = 0.
inline Matrix hessian_direction(const Functionals& fn, const DensityMatrix& sigma) {
  const Eigen::Index d = fn.ctx().gen.dim;
  std::vector<Matrix> basis;
  {
    OperatorSpan span(d);
    auto push = [&](Matrix m) {
      m = hermitize(m - fn.cond().heisenberg.apply(m));
      if (span.insert(m)) basis.push_back(m / frobenius(m));
    };
    for (Eigen::Index i = 0; i < d; ++i) push(matrix_unit(d, i, i));
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i + 1; j < d; ++j) {
        push(matrix_unit(d, i, j) + matrix_unit(d, j, i));
        push(kI * (matrix_unit(d, i, j) - matrix_unit(d, j, i)));
      }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(basis.size());
  if (m == 0) throw StructuralError("hessian_direction: complement of N(P) is empty");
  RealMatrix amat(m, m), bmat(m, m);
  std::vector<Matrix> theta(basis.size());
  for (Eigen::Index b = 0; b < m; ++b)
    theta[static_cast<std::size_t>(b)] = hermitize(fn.theta_weighted(sigma, basis[static_cast<std::size_t>(b)]));
  WeightedInner kms{fn.ctx().sigma_tr, InnerKind::KMS};
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      amat(a, b) = fn.dirichlet(basis[static_cast<std::size_t>(a)], theta[static_cast<std::size_t>(b)]);
      bmat(a, b) = weighted_inner(kms, basis[static_cast<std::size_t>(a)], theta[static_cast<std::size_t>(b)]).real();
    }
  RealMatrix asym = 0.5 * (amat + amat.transpose()), bsym = 0.5 * (bmat + bmat.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<RealMatrix> ges(asym, bsym);
  RealVector coeff = ges.eigenvectors().col(0);
  Matrix y = Matrix::Zero(d, d);
  for (Eigen::Index a = 0; a < m; ++a) y += coeff(a) * basis[static_cast<std::size_t>(a)];
  return y / frobenius(y);
}

}  // namespace detail

/// Minimizes EP(rho) / (2 D_N(rho)) over faithful states via multi-start
/// Nelder-Mead on the exp chart, seeded by Ginibre states and by second-order
/// directions around invariant states. Returns the best ratio found (an upper
/// bound on alpha_N), never a certified constant.
inline MlsiEstimate estimate_alpha(const Functionals& fn, const Budget& budget = {},
                                   const std::vector<Matrix>& extra_seeds = {}) {
  const Eigen::Index d = fn.ctx().gen.dim;
  detail::RatioTracker tracker;
  auto ratio_of = [&fn, &tracker](const Matrix& rho) {
    double dn = fn.df_entropy(rho);
    if (dn < 1e-10) return std::numeric_limits<double>::infinity();  // 0/0 region near N_*
    double r = fn.entropy_production(rho) / (2.0 * dn);
    tracker.record(r, rho);
    return r;
  };

  MlsiEstimate out;

  // Perturbative ratios along +-eps ladders around invariant states.
  std::vector<DensityMatrix> centers{fn.ctx().sigma_tr};
  if (frobenius(fn.ctx().sigma_inv.mat - fn.ctx().sigma_tr.mat) > 1e-8)
    centers.push_back(fn.ctx().sigma_inv);
  Matrix sq = mat_sqrt(fn.ctx().sigma_tr.mat);
  std::vector<Matrix> seeds = extra_seeds;
  for (const auto& sigma : centers) {
    Matrix y = detail::hessian_direction(fn, sigma);
    Matrix g = sq * y * sq;
    for (double eps : {0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 5e-4}) {
      for (double sign : {1.0, -1.0}) {
        Matrix rho = hermitize(sigma.mat + sign * eps * g);
        Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
        if (es.eigenvalues().minCoeff() <= policy().faithfulness) continue;
        double r = ratio_of(rho);
        if (std::isfinite(r)) out.perturbative_ratios.push_back(r);
        if (eps >= 0.01) seeds.push_back(rho);
      }
    }
  }

  // Ginibre starts complete the budget.
  Rng rng(budget.seed);
  while (static_cast<int>(seeds.size()) < budget.starts) seeds.push_back(random_state(d, rng));
  if (static_cast<int>(seeds.size()) > budget.starts) seeds.resize(budget.starts);

  std::vector<double> best_per_start(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t s) {
    auto objective = [&](const RealVector& p) { return ratio_of(detail::params_to_state(p, d)); };
    RealVector x0 = detail::hermitian_to_params(mat_log(hermitize(seeds[s])));
    RealVector xbest = detail::nelder_mead(objective, x0, budget.iterations);
    best_per_start[s] = objective(xbest);
  });
  for (std::size_t s = 0; s < seeds.size(); ++s)
    out.optimizer_trace.push_back({static_cast<int>(s), best_per_start[s]});

  if (!std::isfinite(tracker.best))
    throw StructuralError("estimate_alpha: no admissible ratio evaluated");
  out.alpha_upper = tracker.best;
  out.witness = tracker.witness;
  out.evaluations = tracker.evaluations;
  return out;
}

// ---------------------------------------------------------------------------
// Information constant (bipartite factor models)

struct BetaEstimate {
  double beta_upper = 0.0;
  Matrix witness;
  long evaluations = 0;
};

/// Minimizes IP(rho) / (2 I_rho(A:B)) over correlated faithful states.
/// Product states (mutual information below 1e-8) are excluded.
inline BetaEstimate estimate_beta(const Functionals& fn, const Budget& budget = {}) {
  if (!fn.bipartite()) throw RejectedInput("estimate_beta: bipartite model required");
  const Eigen::Index d = fn.ctx().gen.dim;
  detail::RatioTracker tracker;
  auto ratio_of = [&fn, &tracker](const Matrix& rho) {
    double mi;
    try {
      mi = fn.mutual_information(rho);
    } catch (const StructuralError&) {
      return std::numeric_limits<double>::infinity();
    }
    if (mi < 1e-8) return std::numeric_limits<double>::infinity();  // product-state guard
    double r = fn.information_production(rho) / (2.0 * mi);
    tracker.record(r, rho);
    return r;
  };

  Rng rng(budget.seed + 1);
  std::vector<Matrix> seeds;
  for (int s = 0; s < budget.starts; ++s) seeds.push_back(random_state(d, rng));

  std::vector<double> best_per_start(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t s) {
    auto objective = [&](const RealVector& p) { return ratio_of(detail::params_to_state(p, d)); };
    RealVector x0 = detail::hermitian_to_params(mat_log(hermitize(seeds[s])));
    RealVector xbest = detail::nelder_mead(objective, x0, budget.iterations);
    best_per_start[s] = objective(xbest);
  });

  if (!std::isfinite(tracker.best))
    throw StructuralError("estimate_beta: no correlated ratio evaluated");
  BetaEstimate out;
  out.beta_upper = tracker.best;
  out.witness = tracker.witness;
  out.evaluations = tracker.evaluations;
  return out;
}

}  // namespace qdeco
