#pragma once

// Trajectory simulation and decoherence-time analysis: decay curves of the
// Lyapunov functionals, the two bound curves of the decay theorems, the
// worst-case decoherence time, and the closed-form scaling path for the
// decoherence semigroup.

#include "qdeco/constants.hpp"
#include "qdeco/functionals.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace qdeco {

inline std::vector<double> log_spaced_grid(double t_min, double t_max, int points) {
  std::vector<double> grid;
  if (points <= 1) return {t_max};
  double l0 = std::log(t_min), l1 = std::log(t_max);
  for (int i = 0; i < points; ++i)
    grid.push_back(std::exp(l0 + (l1 - l0) * i / static_cast<double>(points - 1)));
  return grid;
}

// ---------------------------------------------------------------------------
// Decay curves

struct DecayCurve {
  std::vector<double> times;
  std::vector<double> trace_dist;   // ||P_*t(rho - E_N*(rho))||_Tr
  std::vector<double> df_variance;  // Var_N of the relative density (chi^2 proxy)
  std::vector<double> df_entropy;
  std::vector<double> mutual_info;  // filled for bipartite models
  bool has_mutual_info = false;
};

inline DecayCurve trajectory(const Functionals& fn, const Matrix& rho0,
                             const std::vector<double>& t_grid) {
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (t_grid[i] < t_grid[i - 1] || t_grid[0] < 0.0)
      throw RejectedInput("trajectory: time grid must be ascending and nonnegative");
  DecayCurve curve;
  curve.times = t_grid;
  curve.has_mutual_info = fn.bipartite().has_value();
  Matrix isq = mat_pow(fn.ctx().sigma_tr.mat, -0.5);
  curve.trace_dist.resize(t_grid.size());
  curve.df_variance.resize(t_grid.size());
  curve.df_entropy.resize(t_grid.size());
  if (curve.has_mutual_info) curve.mutual_info.resize(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    Matrix rt = t_grid[i] == 0.0
                    ? rho0
                    : hermitize(expm(fn.ctx().schrodinger, t_grid[i]).apply(rho0));
    curve.trace_dist[i] = trace_norm(rt - fn.rho_df(rt));
    curve.df_variance[i] = fn.df_variance(hermitize(isq * rt * isq));
    curve.df_entropy[i] = fn.df_entropy(rt);
    if (curve.has_mutual_info) curve.mutual_info[i] = fn.mutual_information(rt);
  });
  return curve;
}

/// PI and MLSI bound curves: sqrt(1/s_min) e^{-lambda t}, sqrt(2 log(1/s_min)) e^{-alpha t}.
struct BoundCurves {
  std::vector<double> pi;
  std::vector<double> mlsi;
};

inline BoundCurves bound_curves(double sigma_min, double lambda, double alpha,
                                const std::vector<double>& t_grid) {
  BoundCurves out;
  double c_pi = std::sqrt(1.0 / sigma_min);
  double c_ls = std::sqrt(2.0 * std::log(1.0 / sigma_min));
  for (double t : t_grid) {
    out.pi.push_back(c_pi * std::exp(-lambda * t));
    out.mlsi.push_back(c_ls * std::exp(-alpha * t));
  }
  return out;
}

/// Time at which the PI and MLSI bound curves cross (negative: no crossing
/// at positive times).
inline double bound_crossing_time(double sigma_min, double lambda, double alpha) {
  if (lambda == alpha) return -1.0;
  double c_pi = std::sqrt(1.0 / sigma_min);
  double c_ls = std::sqrt(2.0 * std::log(1.0 / sigma_min));
  return std::log(c_pi / c_ls) / (lambda - alpha);
}

// ---------------------------------------------------------------------------
// Worst-case decoherence time

struct DecoTimeResult {
  double epsilon = 0.0;
  double tau_empirical = 0.0;
  double tau_pi_bound = 0.0;
  double tau_mlsi_bound = 0.0;
  double sigma_min = 0.0;
};

struct DecoTimeSearch {
  int starts = 12;
  int iterations = 200;
  unsigned seed = 42;
};

namespace detail {

inline Matrix params_to_pure(const RealVector& p, Eigen::Index d) {
  Vector psi(d);
  for (Eigen::Index i = 0; i < d; ++i) psi(i) = Complex(p(2 * i), p(2 * i + 1));
  double n = psi.norm();
  if (n < 1e-8) return Matrix::Zero(d, d);
  psi /= n;
  return psi * psi.adjoint();
}

// Multi-start estimate of max_rho ||P(rho - E_N*(rho))||_Tr over pure states.
// `pool` carries maximizers found at other times and is updated in place.
inline double worst_case_distance(const Functionals& fn, const Superoperator& pt,
                                  std::vector<Matrix>& pool, const DecoTimeSearch& search) {
  const Eigen::Index d = fn.ctx().gen.dim;
  auto distance = [&](const Matrix& rho) {
    return trace_norm(pt.apply(rho - fn.rho_df(rho)));
  };
  auto objective = [&](const RealVector& p) {
    Matrix rho = params_to_pure(p, d);
    if (rho.size() == 0 || std::abs(rho.trace().real() - 1.0) > 0.5) return 0.0;
    return -distance(rho);
  };
  Rng rng(search.seed);
  std::vector<Matrix> starts = pool;
  while (static_cast<int>(starts.size()) < search.starts)
    starts.push_back(random_pure_state(d, rng));
  double best = 0.0;
  Matrix best_state;
  for (const auto& s : starts) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    Vector psi = es.eigenvectors().col(d - 1);
    RealVector p(2 * d);
    for (Eigen::Index i = 0; i < d; ++i) {
      p(2 * i) = psi(i).real();
      p(2 * i + 1) = psi(i).imag();
    }
    RealVector popt = nelder_mead(objective, p, search.iterations, 0.2);
    Matrix rho = params_to_pure(popt, d);
    if (rho.size() == 0) continue;
    double val = distance(rho);
    if (val > best) {
      best = val;
      best_state = rho;
    }
  }
  if (best_state.size() > 0) {
    pool.push_back(best_state);
    if (pool.size() > 8) pool.erase(pool.begin());
  }
  return best;
}

}  // namespace detail

inline double invert_bound(double prefactor, double rate, double eps) {
  if (eps >= prefactor) return 0.0;
  return std::log(prefactor / eps) / rate;
}

/// tau_deco(eps) = min{t : max_rho ||P_*t(rho - E_N*(rho))||_Tr <= eps} by
/// bisection, with the inner maximum estimated over pure states (the distance
/// is convex in rho, so pure states suffice). Bound times come from inverting
/// the PI/MLSI bound curves with the supplied constants.
inline DecoTimeResult decoherence_time(const Functionals& fn, double lambda, double alpha,
                                       double eps, const DecoTimeSearch& search = {}) {
  if (eps <= 0.0 || eps >= 1.0) throw RejectedInput("decoherence_time: eps must be in (0,1)");
  DecoTimeResult out;
  out.epsilon = eps;
  out.sigma_min =
      Eigen::SelfAdjointEigenSolver<Matrix>(fn.ctx().sigma_tr.mat).eigenvalues().minCoeff();
  out.tau_pi_bound = invert_bound(std::sqrt(1.0 / out.sigma_min), lambda, eps);
  out.tau_mlsi_bound =
      invert_bound(std::sqrt(2.0 * std::log(1.0 / out.sigma_min)), alpha, eps);

  std::vector<Matrix> pool;
  auto g = [&](double t) {
    return detail::worst_case_distance(fn, expm(fn.ctx().schrodinger, t), pool, search);
  };
  double g0 = g(0.0);
  if (g0 <= eps) {
    out.tau_empirical = 0.0;
    return out;
  }
  // Bracket [lo, hi] with g(hi) <= eps; the PI bound gives a safe first guess.
  double lo = 0.0, hi = std::max(out.tau_pi_bound, 1.0 / lambda);
  int guard = 0;
  for (; guard < 60 && g(hi) > eps; ++guard) hi *= 1.6;
  if (guard == 60)
    throw StructuralError("decoherence_time: worst-case distance never dropped below eps "
                          "(bracket widening exhausted)");
  const double tol = 1e-3 / lambda;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) > eps)
      lo = mid;
    else
      hi = mid;
  }
  out.tau_empirical = 0.5 * (lo + hi);
  return out;
}

/// Multi-start worst-case distance estimates along an ascending grid;
/// maximizers found at earlier times are carried forward as starts.
inline std::vector<double> worst_distance_curve(const Functionals& fn,
                                                const std::vector<double>& t_grid,
                                                const DecoTimeSearch& search = {}) {
  std::vector<Matrix> pool;
  std::vector<double> out;
  for (double t : t_grid)
    out.push_back(detail::worst_case_distance(fn, expm(fn.ctx().schrodinger, t), pool, search));
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form scaling path for the decoherence semigroup

struct DecoScalingRow {
  Eigen::Index d = 0;
  double g0 = 0.0;  // worst-case distance at t = 0
  double tau_empirical = 0.0;
  double tau_pi_bound = 0.0;
  double tau_mlsi_bound = 0.0;  // with alpha = gamma/2
};

/// For the deco semigroup the worst-case distance factorizes,
/// g(t) = e^{-gamma t} g(0), so the scaling table needs no superoperators.
inline DecoScalingRow deco_scaling_row(Eigen::Index d, double gamma, double eps,
                                       const DecoTimeSearch& search = {}) {
  auto distance = [&](const Matrix& rho) {
    Matrix off = rho;
    off.diagonal().setZero();
    return trace_norm(off);
  };
  auto objective = [&](const RealVector& p) {
    Matrix rho = detail::params_to_pure(p, d);
    if (rho.size() == 0) return 0.0;
    return -distance(rho);
  };
  Rng rng(search.seed);
  double g0 = 0.0;
  for (int s = 0; s < search.starts; ++s) {
    Matrix start = random_pure_state(d, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(start);
    Vector psi = es.eigenvectors().col(d - 1);
    RealVector p(2 * d);
    for (Eigen::Index i = 0; i < d; ++i) {
      p(2 * i) = psi(i).real();
      p(2 * i + 1) = psi(i).imag();
    }
    RealVector popt = detail::nelder_mead(objective, p, search.iterations, 0.2);
    Matrix rho = detail::params_to_pure(popt, d);
    if (rho.size() > 0) g0 = std::max(g0, distance(rho));
  }
  // The maximally coherent state gives 2(d-1)/d; keep the better of the two.
  g0 = std::max(g0, 2.0 * (static_cast<double>(d) - 1.0) / static_cast<double>(d));

  DecoScalingRow row;
  row.d = d;
  row.g0 = g0;
  row.tau_empirical = eps >= g0 ? 0.0 : std::log(g0 / eps) / gamma;
  row.tau_pi_bound = invert_bound(std::sqrt(static_cast<double>(d)), gamma, eps);
  row.tau_mlsi_bound =
      invert_bound(std::sqrt(2.0 * std::log(static_cast<double>(d))), 0.5 * gamma, eps);
  return row;
}

// ---------------------------------------------------------------------------
// Decay-theorem verification

struct DecayTheoremReport {
  bool variance_ok = true;
  double variance_worst_excess = 0.0;  // max of Var_N(P_t X) - e^{-2 lambda t} Var_N(X) (1+tol)
  bool entropy_ok = true;
  double entropy_worst_excess = 0.0;   // max of d/dt log D_N + 2 min-ratio - tol
  int samples_checked = 0;
};

/// Checks Var_N(P_t X) <= e^{-2 lambda t} Var_N(X) (1 + 1e-6) per sample and
/// grid point, and the entropy decay against each trajectory's own worst
/// EP/(2 D_N) ratio.
inline DecayTheoremReport verify_decay_theorems(const Functionals& fn, double lambda,
                                                const std::vector<Matrix>& observables,
                                                const std::vector<Matrix>& states,
                                                const std::vector<double>& t_grid) {
  DecayTheoremReport rep;
  std::vector<Superoperator> ph, ps;
  for (double t : t_grid) {
    ph.push_back(expm(fn.ctx().heisenberg, t));
    ps.push_back(expm(fn.ctx().schrodinger, t));
  }
  for (const auto& x : observables) {
    double v0 = fn.df_variance(x);
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      double vt = fn.df_variance(hermitize(ph[i].apply(x)));
      double bound = std::exp(-2.0 * lambda * t_grid[i]) * v0 * (1.0 + 1e-6);
      double excess = vt - bound - 1e-12 * std::max(1.0, v0);
      rep.variance_worst_excess = std::max(rep.variance_worst_excess, excess);
      if (excess > 0.0) rep.variance_ok = false;
    }
    ++rep.samples_checked;
  }
  for (const auto& rho : states) {
    std::vector<double> dn(t_grid.size());
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      Matrix rt = hermitize(ps[i].apply(rho));
      dn[i] = fn.df_entropy(rt);
      if (dn[i] > 1e-11) min_ratio = std::min(min_ratio, fn.entropy_production(rt) / (2.0 * dn[i]));
    }
    for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
      if (dn[i] <= 1e-11 || dn[i + 1] <= 1e-11) continue;
      double rate = (std::log(dn[i + 1]) - std::log(dn[i])) / (t_grid[i + 1] - t_grid[i]);
      double excess = rate - (-2.0 * min_ratio + 1e-6);
      rep.entropy_worst_excess = std::max(rep.entropy_worst_excess, excess);
      if (excess > 0.0) rep.entropy_ok = false;
    }
    ++rep.samples_checked;
  }
  return rep;
}

}  // namespace qdeco
