// Command-line front end: model ingestion, analysis pipeline orchestration,
// report and curve emission.
//
//   qdeco analyze  model.json [--out report.json]
//   qdeco simulate model.json [--rho-seed N | --rho state.json] [--out curves.csv]
//   qdeco decotime model.json --epsilon 0.01 [--dims 2,4,8,...] [--out table.csv]
//   qdeco check    model.json --suite {lemmas,regularity,dbc,all}
//
// Exit codes: 0 success, 1 I/O or parse failure, 2 structural/mathematical
// failure, 3 tolerance violation in a --suite run.

#include "qdeco/qdeco.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace qdeco;

struct CommonOpts {
  std::string model_path;
  std::string out_path;
  unsigned seed = 42;
  int starts = 32;
  int iterations = 500;
};

struct LoadedModel {
  ParsedModel parsed;
  AnalyzedQms sys;
  Functionals fn;
};

LoadedModel load_and_analyze(const CommonOpts& opts) {
  ParsedModel parsed = parse_model(load_json_file(opts.model_path));
  AnalyzedQms sys = analyze_qms(parsed.built.gen);
  Functionals fn(sys, parsed.built.bipartite);
  return {std::move(parsed), std::move(sys), std::move(fn)};
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

std::vector<Matrix> sample_states(Eigen::Index d, int n, Rng& rng) {
  std::vector<Matrix> out;
  for (int k = 0; k < n; ++k) out.push_back(random_state(d, rng));
  return out;
}

// ---------------------------------------------------------------------------

int cmd_analyze(const CommonOpts& opts, int samples) {
  LoadedModel m = load_and_analyze(opts);
  const Functionals& fn = m.fn;
  Rng rng(opts.seed);

  GapResult gap = spectral_gap(fn);
  Budget budget{opts.starts, opts.iterations, opts.seed};
  MlsiEstimate alpha = estimate_alpha(fn, budget);

  Json report;
  report["schema"] = 1;
  Json model;
  model["kind"] = m.parsed.kind;
  model["dim"] = static_cast<long>(m.parsed.built.gen.dim);
  model["seed"] = static_cast<long>(opts.seed);
  report["model"] = std::move(model);
  report["structure"] = structure_json(m.sys.structure);

  double sigma_min = Eigen::SelfAdjointEigenSolver<Matrix>(fn.ctx().sigma_tr.mat)
                         .eigenvalues()
                         .minCoeff();
  Json sigma;
  sigma["spectrum"] = spectrum_json(fn.ctx().sigma_tr.mat);
  sigma["sigma_min"] = sigma_min;
  report["sigma_tr"] = std::move(sigma);

  Json flags;
  flags["reversible"] = fn.ctx().reversible;
  flags["dbc"] = fn.ctx().dbc;
  report["flags"] = std::move(flags);

  Json constants;
  constants["lambda"] = gap.lambda;
  constants["alpha_upper"] = alpha.alpha_upper;
  if (m.parsed.certified_alpha)
    constants["alpha_certified"] = *m.parsed.certified_alpha;
  else
    constants["alpha_certified"] = nullptr;
  Json optimizer;
  optimizer["seed"] = static_cast<long>(opts.seed);
  optimizer["starts"] = opts.starts;
  optimizer["iterations"] = opts.iterations;
  optimizer["evaluations"] = alpha.evaluations;
  optimizer["best_ratio"] = alpha.alpha_upper;
  optimizer["witness_spectrum"] = spectrum_json(alpha.witness);
  Json pert = Json::array();
  for (double r : alpha.perturbative_ratios) pert.push_back(r);
  optimizer["perturbative_ratios"] = std::move(pert);
  constants["optimizer"] = std::move(optimizer);
  std::optional<double> information_floor;  // min(beta_est, alpha1_inner_est)
  if (m.parsed.built.bipartite) {
    BetaEstimate beta = estimate_beta(fn, budget);
    constants["beta_upper"] = beta.beta_upper;
    Functionals inner_fn = make_functionals(analyze_qms(m.parsed.built.bipartite->inner));
    MlsiEstimate inner_alpha = estimate_alpha(inner_fn, budget);
    constants["alpha1_inner_upper"] = inner_alpha.alpha_upper;
    information_floor = std::min(beta.beta_upper, inner_alpha.alpha_upper);
  } else {
    constants["beta_upper"] = nullptr;
  }
  report["constants"] = std::move(constants);

  auto states = sample_states(fn.ctx().gen.dim, samples, rng);
  report["regularity_l1"] = regularity_json(fn.check_l1_regularity(states));
  std::vector<Matrix> observables;
  for (int k = 0; k < samples; ++k)
    observables.push_back(random_hermitian_spectrum(fn.ctx().gen.dim, 0.1, 2.0, rng));
  report["regularity_lp"] =
      lp_regularity_json(fn.check_strong_lp_regularity(observables, {1.0, 1.5, 2.0, 3.0}));
  report["regularity_applicable"] = fn.ctx().dbc;

  double alpha_bound = m.parsed.certified_alpha.value_or(alpha.alpha_upper);
  Json taus = Json::array();
  DecoTimeSearch search;
  search.seed = opts.seed;
  for (double eps : {0.1, 0.01})
    taus.push_back(decotime_json(decoherence_time(fn, gap.lambda, alpha_bound, eps, search)));
  report["decoherence_times"] = std::move(taus);

  Json consistency;
  consistency["alpha_le_lambda"] =
      !fn.ctx().reversible || alpha.alpha_upper <= gap.lambda + 1e-6;
  if (information_floor) {
    // Reported comparison only: the true constants satisfy
    // alpha_N >= min(beta_N, alpha_1), but the estimates are upper bounds.
    consistency["information_floor"] = *information_floor;
    consistency["information_floor_le_alpha"] = *information_floor <= alpha.alpha_upper + 1e-6;
  }
  report["consistency"] = std::move(consistency);

  emit(opts.out_path, dump_json_17(report));
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOpts& opts, const std::string& rho_path, int rho_seed, double tmax,
                 int points, double alpha_override) {
  LoadedModel m = load_and_analyze(opts);
  const Functionals& fn = m.fn;

  Matrix rho0;
  if (!rho_path.empty()) {
    rho0 = matrix_from_json(load_json_file(rho_path));
    rho0 = make_density(rho0).mat;
  } else {
    Rng rng(rho_seed >= 0 ? static_cast<unsigned>(rho_seed) : opts.seed);
    rho0 = random_state(fn.ctx().gen.dim, rng);
  }

  GapResult gap = spectral_gap(fn);
  double alpha = alpha_override > 0.0
                     ? alpha_override
                     : m.parsed.certified_alpha.value_or(
                           estimate_alpha(fn, Budget{opts.starts, opts.iterations, opts.seed})
                               .alpha_upper);
  double sigma_min = Eigen::SelfAdjointEigenSolver<Matrix>(fn.ctx().sigma_tr.mat)
                         .eigenvalues()
                         .minCoeff();

  auto grid = log_spaced_grid(1e-3 / gap.lambda, tmax > 0 ? tmax : 50.0 / gap.lambda, points);
  DecayCurve curve = trajectory(fn, rho0, grid);
  BoundCurves bounds = bound_curves(sigma_min, gap.lambda, alpha, grid);
  emit(opts.out_path, curve_csv(curve, bounds));
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_decotime(const CommonOpts& opts, double eps, const std::vector<Eigen::Index>& dims) {
  if (eps <= 0.0 || eps >= 1.0)
    throw RejectedInput("decotime: --epsilon must lie in (0,1)");
  Json doc = load_json_file(opts.model_path);
  ParsedModel parsed = parse_model(doc);
  DecoTimeSearch search;
  search.seed = opts.seed;

  if (!dims.empty()) {
    if (parsed.kind != "deco")
      throw RejectedInput("--dims scaling table is defined for the deco builder");
    std::vector<DecoScalingRow> rows;
    for (Eigen::Index d : dims) rows.push_back(deco_scaling_row(d, parsed.gamma, eps, search));
    std::string csv = decotime_csv(rows);
    std::printf("%6s %14s %14s %14s\n", "d", "tau_emp", "tau_PI", "tau_MLSI");
    for (const auto& r : rows)
      std::printf("%6ld %14.6f %14.6f %14.6f\n", static_cast<long>(r.d), r.tau_empirical,
                  r.tau_pi_bound, r.tau_mlsi_bound);
    if (!opts.out_path.empty()) write_text_file(opts.out_path, csv);
    return 0;
  }

  AnalyzedQms sys = analyze_qms(parsed.built.gen);
  Functionals fn(sys, parsed.built.bipartite);
  GapResult gap = spectral_gap(fn);
  double alpha = parsed.certified_alpha.value_or(
      estimate_alpha(fn, Budget{opts.starts, opts.iterations, opts.seed}).alpha_upper);
  DecoTimeResult r = decoherence_time(fn, gap.lambda, alpha, eps, search);
  std::printf("epsilon %g: tau_emp %.6f  tau_PI %.6f  tau_MLSI %.6f  sigma_min %.6g\n",
              r.epsilon, r.tau_empirical, r.tau_pi_bound, r.tau_mlsi_bound, r.sigma_min);
  if (!opts.out_path.empty()) emit(opts.out_path, dump_json_17(decotime_json(r)));
  return 0;
}

// ---------------------------------------------------------------------------

struct CheckOutcome {
  Json results = Json::array();
  bool failed = false;

  void add(const std::string& name, bool ok, double value, double tolerance) {
    Json r;
    r["name"] = name;
    r["status"] = ok ? "pass" : "fail";
    r["value"] = value;
    r["tolerance"] = tolerance;
    results.push_back(std::move(r));
    if (!ok) failed = true;
  }
  void skip(const std::string& name, const std::string& why) {
    Json r;
    r["name"] = name;
    r["status"] = "skipped";
    r["reason"] = why;
    results.push_back(std::move(r));
  }
};

void check_lemmas(const LoadedModel& m, Rng& rng, CheckOutcome& out) {
  const Functionals& fn = m.fn;
  const Eigen::Index d = fn.ctx().gen.dim;
  const Matrix& st = fn.ctx().sigma_tr.mat;
  WeightedInner kms{fn.ctx().sigma_tr, InnerKind::KMS};

  double tracial = 0.0;
  for (const auto& b : m.sys.algebra)
    for (int k = 0; k < 5; ++k) {
      Matrix y = random_ginibre(d, rng);
      tracial = std::max(tracial, std::abs(((st * b * y).trace() - (st * y * b).trace())));
    }
  out.add("lemma_sigma_tr_tracial_on_algebra", tracial <= 1e-8, tracial, 1e-8);

  Matrix r = mat_sqrt(st);
  double intertwine = 0.0, projection = 0.0;
  for (int k = 0; k < 10; ++k) {
    Matrix x = random_ginibre(d, rng), y = random_ginibre(d, rng);
    Matrix ex = m.sys.cond.heisenberg.apply(x), ey = m.sys.cond.heisenberg.apply(y);
    intertwine = std::max(intertwine,
                          frobenius(r * ex * r - m.sys.cond.schrodinger.apply(r * x * r)));
    Complex a1 = weighted_inner(kms, ex, y), a2 = weighted_inner(kms, ex, ey),
            a3 = weighted_inner(kms, x, ey);
    projection = std::max({projection, std::abs(a1 - a2), std::abs(a2 - a3)});
  }
  out.add("lemma_conditional_intertwining", intertwine <= 1e-8, intertwine, 1e-8);
  out.add("lemma_conditional_projection", projection <= 1e-8, projection, 1e-8);

  double var_split = 0.0, var_tracial = 0.0;
  for (int k = 0; k < 10; ++k) {
    Matrix x = random_hermitian(d, rng);
    Matrix ex = hermitize(m.sys.cond.heisenberg.apply(x));
    var_split = std::max(var_split, std::abs(fn.df_variance(x) - (fn.variance_sigma(x) -
                                                                  fn.variance_sigma(ex))));
    double lhs = fn.variance_sigma(ex);
    double rhs = (st * ex * ex).trace().real() - std::pow((st * x).trace().real(), 2);
    var_tracial = std::max(var_tracial, std::abs(lhs - rhs));
  }
  out.add("lemma_df_variance_split", var_split <= 1e-8, var_split, 1e-8);
  out.add("lemma_df_variance_tracial_form", var_tracial <= 1e-8, var_tracial, 1e-8);

  double ent_split = 0.0;
  for (int k = 0; k < 10; ++k) {
    Matrix rho = random_state(d, rng);
    double lhs = fn.df_entropy(rho);
    double rhs = relative_entropy(rho, st) - relative_entropy(fn.rho_df(rho), st);
    ent_split = std::max(ent_split, std::abs(lhs - rhs));
  }
  out.add("lemma_df_entropy_split", ent_split <= 1e-8, ent_split, 1e-8);

  double chain = 0.0;
  for (const auto& f : {sf::square(), sf::cube(), sf::sqrt(), sf::log()})
    for (int k = 0; k < 5; ++k) {
      Matrix x = random_hermitian_spectrum(d, 0.1, 3.0, rng);
      Matrix y = random_hermitian_spectrum(d, 0.1, 3.0, rng);
      Matrix v = random_ginibre(d, rng);
      Matrix lhs = v * matfunc(y, f) - matfunc(x, f) * v;
      Matrix rhs = divided_difference_rep(x, y, f, v * y - x * v);
      chain = std::max(chain, frobenius(lhs - rhs));
    }
  out.add("lemma_chain_rule", chain <= 1e-8, chain, 1e-8);

  double theta_tr = 0.0;
  for (int k = 0; k < 5; ++k) {
    Matrix g = random_hermitian(d, rng);
    theta_tr = std::max(theta_tr, std::abs((st * theta_map(fn.ctx().sigma_tr, g)).trace().real() -
                                           g.trace().real()));
  }
  out.add("lemma_theta_trace", theta_tr <= 1e-8, theta_tr, 1e-8);
}

void check_regularity(const LoadedModel& m, Rng& rng, CheckOutcome& out) {
  const Functionals& fn = m.fn;
  const Eigen::Index d = fn.ctx().gen.dim;
  if (!fn.ctx().dbc) {
    out.skip("regularity_l1", "model is not sigma_tr-DBC; Theorem guarantees do not apply");
    out.skip("regularity_strong_lp", "model is not sigma_tr-DBC; weak margins reported only");
    Json weak = Json::array();
    std::vector<Matrix> xs;
    for (int k = 0; k < 5; ++k) xs.push_back(random_hermitian_spectrum(d, 0.1, 2.0, rng));
    LpRegularityReport rep = fn.check_strong_lp_regularity(xs, {1.5, 3.0});
    for (const auto& row : rep.rows) weak.push_back(row.margin_weak);
    Json r;
    r["name"] = "regularity_weak_margins";
    r["status"] = "reported";
    r["margins"] = std::move(weak);
    out.results.push_back(std::move(r));
    return;
  }
  auto states = sample_states(d, 25, rng);
  RegularityReport l1 = fn.check_l1_regularity(states);
  double worst4 = 0.0;
  for (double v : l1.margins_dbc) worst4 = std::min(worst4, v);
  out.add("regularity_l1_factor2", l1.min_margin >= -1e-8, l1.min_margin, -1e-8);
  out.add("regularity_l1_factor4", worst4 >= -1e-8, worst4, -1e-8);
  std::vector<Matrix> xs;
  for (int k = 0; k < 15; ++k) xs.push_back(random_hermitian_spectrum(d, 0.1, 2.0, rng));
  LpRegularityReport lp = fn.check_strong_lp_regularity(xs, {1.0, 1.5, 2.0, 3.0});
  out.add("regularity_strong_lp", lp.violations_strong == 0, lp.min_strong, -1e-8);
}

void check_dbc_suite(const LoadedModel& m, CheckOutcome& out) {
  const Functionals& fn = m.fn;
  const Eigen::Index d = fn.ctx().gen.dim;
  if (!fn.ctx().dbc) {
    out.skip("dbc_derivation", "model is not sigma_tr-DBC");
    return;
  }
  auto jumps = dbc_jump_decomposition(fn.ctx());
  double modular = 0.0;
  for (const auto& mj : jumps)
    modular = std::max(modular,
                       frobenius(fn.ctx().sigma_tr.mat * mj.v -
                                 std::exp(mj.omega) * mj.v * fn.ctx().sigma_tr.mat));
  out.add("dbc_modular_relation", modular <= 1e-8, modular, 1e-8);

  WeightedInner kms{fn.ctx().sigma_tr, InnerKind::KMS};
  double residual = 0.0;
  for (Eigen::Index a = 0; a < d * d; ++a)
    for (Eigen::Index b = 0; b < d * d; ++b) {
      Matrix x = matrix_unit(d, a / d, a % d), y = matrix_unit(d, b / d, b % d);
      Complex dirichlet = -weighted_inner(kms, x, apply_generator(fn.ctx().gen, y));
      Complex sum = 0.0;
      for (const auto& mj : jumps)
        sum += weighted_inner(kms, mj.v * x - x * mj.v, mj.v * y - y * mj.v);
      residual = std::max(residual, std::abs(dirichlet - sum));
    }
  out.add("dbc_dirichlet_identity", residual <= 1e-7, residual, 1e-7);

  Superoperator rebuilt = rebuild_from_modular_jumps(jumps, d);
  double recon = frobenius(rebuilt.mat - fn.ctx().heisenberg.mat) /
                 std::max(1.0, frobenius(fn.ctx().heisenberg.mat));
  out.add("dbc_reconstruction", recon <= 1e-7, recon, 1e-7);
}

int cmd_check(const CommonOpts& opts, const std::string& suite) {
  LoadedModel m = load_and_analyze(opts);
  Rng rng(opts.seed);
  CheckOutcome out;
  Json report;
  report["schema"] = 1;
  report["suite"] = suite;
  report["reversible"] = m.fn.ctx().reversible;
  report["dbc"] = m.fn.ctx().dbc;
  if (suite == "lemmas" || suite == "all") check_lemmas(m, rng, out);
  if (suite == "regularity" || suite == "all") check_regularity(m, rng, out);
  if (suite == "dbc" || suite == "all") check_dbc_suite(m, out);
  report["results"] = std::move(out.results);
  emit(opts.out_path, dump_json_17(report));
  return out.failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoherence-free structure and functional-inequality analysis "
               "of quantum Markov semigroups"};
  app.require_subcommand(1);

  CommonOpts opts;
  int samples = 50;
  std::string rho_path;
  int rho_seed = -1;
  double tmax = 0.0;
  int points = 64;
  double alpha_override = 0.0;
  double eps = 0.01;
  std::vector<Eigen::Index> dims;
  std::string suite = "all";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("model", opts.model_path, "model JSON file")->required();
    sub->add_option("--seed", opts.seed, "random seed (default 42)");
    sub->add_option("--starts", opts.starts, "optimizer multi-starts");
    sub->add_option("--iters", opts.iterations, "optimizer iterations per start");
    sub->add_option("--out", opts.out_path, "output file (default stdout)");
  };

  CLI::App* analyze = app.add_subcommand("analyze", "full structure/constants report");
  add_common(analyze);
  analyze->add_option("--samples", samples, "regularity sample count");

  CLI::App* simulate = app.add_subcommand("simulate", "decay curves as CSV");
  add_common(simulate);
  simulate->add_option("--rho", rho_path, "initial state JSON matrix");
  simulate->add_option("--rho-seed", rho_seed, "seed for a random initial state");
  simulate->add_option("--tmax", tmax, "final time (default 50/lambda)");
  simulate->add_option("--points", points, "grid points");
  simulate->add_option("--alpha", alpha_override, "MLSI constant for the bound column");

  CLI::App* decotime = app.add_subcommand("decotime", "decoherence-time table");
  add_common(decotime);
  decotime->add_option("--epsilon", eps, "target trace-norm accuracy in (0,1)");
  decotime->add_option("--dims", dims, "dimension list for the deco scaling table")
      ->delimiter(',');

  CLI::App* check = app.add_subcommand("check", "verify lemma/theorem identities");
  add_common(check);
  check->add_option("--suite", suite, "lemmas | regularity | dbc | all")
      ->check(CLI::IsMember({"lemmas", "regularity", "dbc", "all"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return cmd_analyze(opts, samples);
    if (simulate->parsed())
      return cmd_simulate(opts, rho_path, rho_seed, tmax, points, alpha_override);
    if (decotime->parsed()) return cmd_decotime(opts, eps, dims);
    if (check->parsed()) return cmd_check(opts, suite);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const RejectedInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const StructuralError& e) {
    std::cerr << "structural failure: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "domain failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
