/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#ifndef ATE_CLI_HPP
#define ATE_CLI_HPP

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ate/bounds.hpp"
#include "ate/data.hpp"
#include "ate/estimators.hpp"
#include "ate/inference.hpp"
#include "ate/matching.hpp"
#include "ate/regress.hpp"
#include "ate/simlab.hpp"

namespace ate::cli {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

/// Validation failure tied to a command-line flag.
class FlagError : public Error {
 public:
  FlagError(std::string flag, const std::string& what) : Error(what), flag_(std::move(flag)) {}
  const std::string& flag() const { return flag_; }

 private:
  std::string flag_;
};

struct RegressorFlags {
  std::string kind = "knn";
  std::optional<std::size_t> k;
  std::size_t degree = 1;
  double ridge = 1e-10;
  std::string dgp;

  void attach(CLI::App* app, bool with_dgp = true) {
    app->add_option("--regressor", kind, "outcome regressor")
        ->check(CLI::IsMember({"knn", "poly", "oracle"}))
        ->capture_default_str();
    app->add_option("--knn-k", k, "knn window (default ceil(n_w^{4/(4+m)}))");
    app->add_option("--degree", degree, "polynomial total degree")->capture_default_str();
    app->add_option("--ridge", ridge, "polynomial ridge damping")->capture_default_str();
    if (with_dgp) app->add_option("--dgp", dgp, "built-in DGP supplying the oracle surfaces");
  }

  RegressorSettings settings() const {
    RegressorSettings s;
    s.k = k;
    s.degree = degree;
    s.ridge = ridge;
    if (kind == "knn") {
      s.kind = RegressorKind::kKnn;
    } else if (kind == "poly") {
      s.kind = RegressorKind::kPolynomial;
    } else {
      if (dgp.empty()) throw FlagError("--dgp", "--regressor oracle requires --dgp naming a built-in DGP");
      const DGP g = builtin_dgp(dgp);
      s.kind = RegressorKind::kOracle;
      s.oracle_mu0 = g.mu0;
      s.oracle_mu1 = g.mu1;
    }
    return s;
  }

  Json echo() const {
    Json j;
    j["regressor"] = kind;
    j["knn_k"] = k ? Json(*k) : Json(nullptr);
    j["degree"] = degree;
    j["ridge"] = ridge;
    j["dgp"] = dgp.empty() ? Json(nullptr) : Json(dgp);
    return j;
  }
};

inline Json to_json(const VarianceReport& v) {
  Json j;
  j["sigma2_hat"] = v.sigma2_hat;
  j["k1"] = v.k1;
  j["k2"] = v.k2;
  j["k3"] = v.k3;
  return j;
}

inline Json to_json(const EstimateReport& r) {
  Json j;
  j["method"] = to_string(r.method);
  j["M"] = r.M;
  j["tau_hat"] = r.tau_hat;
  j["tau_hat_bc"] = r.tau_hat_bc;
  j["tau_reg"] = r.tau_reg;
  j["e_n"] = r.e_n ? Json(*r.e_n) : Json(nullptr);
  j["b_m"] = r.b_m ? Json(*r.b_m) : Json(nullptr);
  j["b_hat_m"] = r.b_hat_m;
  j["extrapolated_predictions"] = r.extrapolated;
  j["residuals"] = r.residuals;
  return j;
}

inline Json to_json(const BoundReport& r) {
  Json j;
  j["mode"] = r.mode;
  j["label"] = "rate value (unnamed universal constants set to 1)";
  j["delta"] = {{"delta_h1", r.delta.h1}, {"delta_h2", r.delta.h2}, {"delta_h3", r.delta.h3}};
  Json terms = Json::object();
  for (const auto& [k, v] : r.b_terms) terms[k] = v;
  j["b_terms"] = terms;
  j["total"] = r.total;
  j["components"] = r.components;
  j["regime_flags"] = r.regime_flags;
  j["notes"] = r.notes;
  if (!r.extras.empty()) j["extras"] = r.extras;
  return j;
}

inline Json to_json(const MCReport& r) {
  Json j;
  j["experiment"] = r.experiment;
  j["dgp"] = r.dgp;
  j["seed"] = r.seed;
  j["grid"] = r.grid;
  j["values"] = r.values;
  j["mc_se"] = r.mc_se;
  if (!r.series.empty()) j["series"] = r.series;
  return j;
}

struct Context {
  std::vector<std::string> argv;
  std::string output;
};

inline void emit(const Context& ctx, Json config, Json result) {
  Json doc;
  doc["config"] = std::move(config);
  doc["argv"] = ctx.argv;
  doc["result"] = std::move(result);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  doc["meta"] = {{"timestamp", stamp}, {"version", kVersion}};
  const std::string text = doc.dump(2) + "\n";
  if (ctx.output.empty() || ctx.output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(ctx.output);
  if (!out) throw FlagError("--output", "cannot open output file '" + ctx.output + "'");
  out << text;
}

inline Dataset load_input(const std::string& path) {
  try {
    return load_csv(path);
  } catch (const Error& e) {
    throw FlagError("--input", e.what());
  }
}

/// Terms and report for the chosen method; the rank path fits and matches
/// on empirical-CDF coordinates.
struct Fitted {
  EstimateReport report;
  CorrectionTerms terms;
  MatchResult matches;
};

inline Fitted fit_method(const Dataset& ds, std::size_t M, const std::string& method, const RegressorSettings& rs) {
  Fitted f;
  if (method == "rank") {
    const RegressorPair rp = fit_rank_regressor(ds, rs);
    TransformedEstimate te = estimate_tau_rank_full(ds, M, rp);
    f.report = std::move(te.report);
    f.terms = std::move(te.terms);
    f.matches = std::move(te.matches);
  } else {
    const RegressorPair rp = fit(ds, rs);
    f.matches = match_mnn(ds, M);
    f.terms = correction_terms(ds, f.matches, rp);
    const RegressorPair* truth = rs.kind == RegressorKind::kOracle ? &rp : nullptr;
    f.report = estimate_tau_bc(ds, f.matches, rp, truth);
  }
  return f;
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Nearest-neighbour matching estimators of the average treatment effect"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Context ctx;
  for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);

  // estimate
  std::string input, method = "covariate";
  std::size_t matches = 0;
  RegressorFlags reg;
  auto* est = app.add_subcommand("estimate", "point estimates and variance components");
  est->add_option("--input", input, "CSV with columns x1..xm,d,y")->required();
  est->add_option("--matches", matches, "number of matches M")->required()->check(CLI::PositiveNumber);
  est->add_option("--method", method)->check(CLI::IsMember({"covariate", "rank"}))->capture_default_str();
  est->add_option("--output", ctx.output, "report path (stdout when omitted)");
  reg.attach(est);

  // bootstrap
  std::size_t replicates = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  bool keep_replicates = false;
  auto* boot = app.add_subcommand("bootstrap", "multiplier bootstrap confidence intervals");
  boot->add_option("--input", input)->required();
  boot->add_option("--matches", matches)->required()->check(CLI::PositiveNumber);
  boot->add_option("--method", method)->check(CLI::IsMember({"covariate", "rank"}))->capture_default_str();
  boot->add_option("--replicates", replicates)->capture_default_str()->check(CLI::PositiveNumber);
  boot->add_option("--alpha", alpha)->capture_default_str();
  boot->add_option("--seed", seed)->capture_default_str();
  boot->add_flag("--keep-replicates", keep_replicates, "include every replicate in the report");
  boot->add_option("--output", ctx.output);
  RegressorFlags boot_reg;
  boot_reg.attach(boot);

  // bounds
  BoundInputs bi;
  std::string mode = "covariate";
  double n_units = 0.0, match_count = 0.0;
  auto* bnd = app.add_subcommand("bounds", "evaluate approximation-bound rate values");
  bnd->add_option("--n", n_units, "sample size")->required();
  bnd->add_option("--matches", match_count, "number of matches M")->required();
  bnd->add_option("--eta", bi.eta, "overlap parameter in (0, 1/2]")->required();
  bnd->add_option("--p", bi.p, "moment surplus in (0, 1]")->capture_default_str();
  bnd->add_option("--dim", bi.m, "covariate dimension m")->required();
  bnd->add_option("--dim-prime", bi.m_prime, "transformed dimension m' (default m)");
  bnd->add_option("--mode", mode)
      ->check(CLI::IsMember({"covariate", "covariate-simplified", "rank", "cdf", "bootstrap", "bootstrap-rank"}))
      ->capture_default_str();
  bnd->add_option("--r0", bi.r0)->capture_default_str();
  bnd->add_option("--gamma", bi.gamma, "regularity exponents gamma_1, gamma_2, ... (default 0.5 each)");
  bnd->add_option("--phi-err-modulus", bi.phi_err_modulus)->capture_default_str();
  bnd->add_option("--phi-err-sup", bi.phi_err_sup)->capture_default_str();
  bnd->add_option("--m-lower", bi.M_l, "residual-moment lower bound")->capture_default_str();
  bnd->add_option("--m-upper", bi.M_u_p, "residual-moment upper bound")->capture_default_str();
  bnd->add_option("--e1", bi.E1)->capture_default_str();
  bnd->add_option("--e2", bi.E2)->capture_default_str();
  bnd->add_option("--output", ctx.output);

  // simulate
  std::string experiment, dgp_name;
  std::size_t sim_n = 2000, reps = 2000;
  std::optional<std::size_t> sim_matches;
  std::vector<double> r_grid;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo experiments on built-in DGPs");
  sim->add_option("--experiment", experiment)
      ->required()
      ->check(CLI::IsMember({"kolmogorov", "coverage", "variance", "radius-tail", "density-ratio"}));
  sim->add_option("--dgp", dgp_name)->required()->check(CLI::IsMember(builtin_dgp_names()));
  sim->add_option("--n", sim_n)->capture_default_str();
  sim->add_option("--matches", sim_matches, "M (default depends on the experiment)");
  sim->add_option("--reps", reps)->capture_default_str();
  sim->add_option("--seed", seed)->capture_default_str();
  sim->add_option("--replicates", replicates)->capture_default_str();
  sim->add_option("--alpha", alpha)->capture_default_str();
  sim->add_option("--r-grid", r_grid, "radius grid for radius-tail");
  sim->add_option("--output", ctx.output);
  RegressorFlags sim_reg;
  sim_reg.attach(sim, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    Json err = {{"error", {{"type", "usage"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }

  try {
    if (est->parsed()) {
      const Dataset ds = load_input(input);
      const Fitted f = fit_method(ds, matches, method, reg.settings());
      const VarianceReport v = variance_from_terms(f.terms);
      Json cfg = {{"subcommand", "estimate"}, {"input", input}, {"matches", matches}, {"method", method}};
      cfg.update(reg.echo());
      Json res = to_json(f.report);
      res["n"] = ds.n();
      res["n0"] = ds.n0();
      res["n1"] = ds.n1();
      res["m"] = ds.m();
      res["variance"] = to_json(v);
      res["conditional_sd"] = std::sqrt(v.sigma2_hat) / std::sqrt(static_cast<double>(ds.n()));
      res["k_count"] = f.matches.k_count;
      res["eta_hat"] = estimate_overlap(ds);
      emit(ctx, cfg, res);
    } else if (boot->parsed()) {
      const Dataset ds = load_input(input);
      if (!(alpha > 0.0 && alpha < 1.0)) throw FlagError("--alpha", "alpha must lie in (0, 1)");
      const Fitted f = fit_method(ds, matches, method, boot_reg.settings());
      const BootstrapDistribution bd = bootstrap_from_terms(f.terms, replicates, seed);
      BootstrapCI ci;
      try {
        ci = bootstrap_ci(bd, bd.tau_hat_bc, alpha);
      } catch (const Error& e) {
        throw FlagError("--replicates", e.what());
      }
      Json cfg = {{"subcommand", "bootstrap"}, {"input", input},       {"matches", matches},
                  {"method", method},          {"replicates", replicates}, {"alpha", alpha},
                  {"seed", seed},              {"keep_replicates", keep_replicates}};
      cfg.update(boot_reg.echo());
      std::vector<double> sq(bd.replicates.size());
      const double mean = pairwise_mean(bd.replicates);
      for (std::size_t b = 0; b < sq.size(); ++b) sq[b] = (bd.replicates[b] - mean) * (bd.replicates[b] - mean);
      Json res;
      res["tau_hat"] = f.report.tau_hat;
      res["tau_hat_bc"] = bd.tau_hat_bc;
      res["conditional_sd"] = bd.conditional_sd;
      res["variance"] = to_json(variance_from_terms(f.terms));
      res["ci_analytic"] = {ci.analytic.lower, ci.analytic.upper};
      res["ci_percentile"] = {ci.percentile.lower, ci.percentile.upper};
      res["replicate_mean"] = mean;
      res["replicate_sd"] = sq.size() > 1 ? std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size() - 1)) : 0.0;
      if (keep_replicates) res["replicates"] = bd.replicates;
      emit(ctx, cfg, res);
    } else if (bnd->parsed()) {
      bi.n = n_units;
      bi.M = match_count;
      try {
        validate(bi);
      } catch (const Error& e) {
        const std::string msg = e.what();
        std::string flag = "--mode";
        for (const auto& [needle, f] : {std::pair{"n must", "--n"}, {"M must", "--matches"}, {"eta must", "--eta"},
                                       {"p must", "--p"}, {"dim must", "--dim"}, {"r0 must", "--r0"},
                                       {"gamma", "--gamma"}}) {
          if (msg.find(needle) != std::string::npos) {
            flag = f;
            break;
          }
        }
        throw FlagError(flag, msg);
      }
      BoundReport r;
      if (mode == "covariate") r = eval_covariate_bound(bi);
      else if (mode == "covariate-simplified") r = eval_covariate_bound_simplified(bi);
      else if (mode == "rank") r = eval_rank_bound(bi);
      else if (mode == "cdf") r = eval_cdf_rank_bound(bi);
      else if (mode == "bootstrap") r = eval_bootstrap_bound(bi, BootstrapTarget::kCovariate);
      else r = eval_bootstrap_bound(bi, BootstrapTarget::kRank);
      Json cfg = {{"subcommand", "bounds"}, {"n", bi.n},     {"matches", bi.M},  {"eta", bi.eta},
                  {"p", bi.p},              {"dim", bi.m},   {"dim_prime", bi.dim_prime()},
                  {"mode", mode},           {"r0", bi.r0},   {"gamma", bi.gamma},
                  {"phi_err_modulus", bi.phi_err_modulus},   {"phi_err_sup", bi.phi_err_sup},
                  {"m_lower", bi.M_l},      {"m_upper", bi.M_u_p}, {"e1", bi.E1}, {"e2", bi.E2}};
      Json res = to_json(r);
      res["alpha"] = bi.alpha();
      res["zeta"] = bi.zeta();
      emit(ctx, cfg, res);
    } else if (sim->parsed()) {
      const DGP dgp = builtin_dgp(dgp_name);
      sim_reg.dgp = dgp_name;
      const double nd = static_cast<double>(sim_n);
      std::size_t M = 0;
      if (sim_matches) {
        M = *sim_matches;
      } else if (experiment == "coverage") {
        M = rule_matches(nd, 0.3);
      } else if (experiment == "radius-tail") {
        M = 5;
      } else if (experiment == "density-ratio") {
        M = rule_matches(nd, 1.0 / 3.0);
      } else {
        M = rule_matches(nd, 0.25);
      }
      MCReport r;
      if (experiment == "kolmogorov") {
        r = mc_kolmogorov(dgp, sim_n, M, reps, seed, sim_reg.settings());
      } else if (experiment == "coverage") {
        r = mc_coverage(dgp, sim_n, M, replicates, alpha, reps, seed, sim_reg.settings());
      } else if (experiment == "variance") {
        r = mc_variance(dgp, sim_n, M, reps, seed);
      } else if (experiment == "radius-tail") {
        r = mc_radius_tail(dgp, sim_n, M, reps, r_grid, seed);
      } else {
        r = density_ratio_check(dgp, sim_n, M, seed);
      }
      Json cfg = {{"subcommand", "simulate"}, {"experiment", experiment}, {"dgp", dgp_name},
                  {"n", sim_n},               {"matches", M},             {"reps", reps},
                  {"seed", seed},             {"replicates", replicates}, {"alpha", alpha},
                  {"r_grid", r_grid}};
      cfg.update(sim_reg.echo());
      emit(ctx, cfg, to_json(r));
    }
  } catch (const FlagError& e) {
    Json err = {{"error", {{"type", "validation"}, {"flag", e.flag()}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const Error& e) {
    Json err = {{"error", {{"type", "validation"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace ate::cli

#endif  // ATE_CLI_HPP
