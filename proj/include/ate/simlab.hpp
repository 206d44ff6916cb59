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
#ifndef ATE_SIMLAB_HPP
#define ATE_SIMLAB_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ate/bounds.hpp"
#include "ate/common.hpp"
#include "ate/data.hpp"
#include "ate/estimators.hpp"
#include "ate/inference.hpp"
#include "ate/matching.hpp"
#include "ate/random.hpp"
#include "ate/regress.hpp"

namespace ate {

/// Data-generating process with X ~ Uniform[0,1]^m.
struct DGP {
  std::string name;
  std::size_t m = 1;
  SurfaceFn mu0;
  SurfaceFn mu1;
  SurfaceFn propensity;
  SurfaceFn noise_sd;
  double eta_star = 0.5;  // propensity lies in [eta_star, 1 - eta_star]
  double g_min = 1.0;     // covariate density floor
  std::optional<double> tau_analytic;

  /// E[f(X)] under the covariate law. Adaptive Gauss-Kronrod for m = 1,
  /// tensor Gauss-Legendre for m = 2.
  double expect(const std::function<double(std::span<const double>)>& f) const {
    if (m == 1) {
      auto g = [&](double x) {
        const double v[1] = {x};
        return f(v);
      };
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, 1.0, 15, 1e-12);
    }
    if (m == 2) {
      using Rule = boost::math::quadrature::gauss<double, 40>;
      const auto& nodes = Rule::abscissa();
      const auto& weights = Rule::weights();
      // The rule stores non-negative abscissae of [-1, 1]; expand to both signs.
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        pts.emplace_back(0.5 + 0.5 * nodes[i], 0.5 * weights[i]);
        if (nodes[i] != 0.0) pts.emplace_back(0.5 - 0.5 * nodes[i], 0.5 * weights[i]);
      }
      double s = 0.0;
      for (const auto& [x1, w1] : pts) {
        for (const auto& [x2, w2] : pts) {
          const double v[2] = {x1, x2};
          s += w1 * w2 * f(v);
        }
      }
      return s;
    }
    throw Error("quadrature is only available for m <= 2");
  }

  double tau() const {
    if (tau_analytic) return *tau_analytic;
    return expect([&](std::span<const double> x) { return mu1(x) - mu0(x); });
  }

  double tau_numeric() const {
    return expect([&](std::span<const double> x) { return mu1(x) - mu0(x); });
  }

  double contrast_variance() const {
    const double t = tau_numeric();
    return expect([&](std::span<const double> x) {
      const double v = mu1(x) - mu0(x) - t;
      return v * v;
    });
  }

  /// Var(mu1 - mu0) + E[s1^2/e + s0^2/(1-e)] (homoscedastic across arms).
  double sigma2() const {
    const double noise = expect([&](std::span<const double> x) {
      const double s = noise_sd(x);
      const double e = propensity(x);
      return s * s / e + s * s / (1.0 - e);
    });
    return contrast_variance() + noise;
  }

  /// Var(eps) + Var(mu1 - mu0).
  double variance_floor() const {
    const double noise = expect([&](std::span<const double> x) {
      const double s = noise_sd(x);
      return s * s;
    });
    return noise + contrast_variance();
  }

  RegressorPair oracle() const { return oracle_pair(mu0, mu1); }
};

inline std::vector<std::string> builtin_dgp_names() {
  return {"linear-1d", "homogeneous", "quadratic-2d", "noiseless-homogeneous"};
}

inline DGP builtin_dgp(const std::string& name) {
  auto constant = [](double c) { return [c](std::span<const double>) { return c; }; };
  DGP g;
  g.name = name;
  if (name == "linear-1d") {
    g.m = 1;
    g.mu0 = [](std::span<const double> x) { return x[0]; };
    g.mu1 = [](std::span<const double> x) { return 1.0 + 2.0 * x[0]; };
    g.propensity = [](std::span<const double> x) { return 0.3 + 0.4 * x[0]; };
    g.noise_sd = constant(0.5);
    g.eta_star = 0.3;
    g.tau_analytic = 1.5;
  } else if (name == "homogeneous" || name == "noiseless-homogeneous") {
    g.m = 1;
    g.mu0 = constant(0.0);
    g.mu1 = constant(1.0);
    g.propensity = constant(0.5);
    g.noise_sd = constant(name == "homogeneous" ? 1.0 : 0.0);
    g.eta_star = 0.5;
    g.tau_analytic = 1.0;
  } else if (name == "quadratic-2d") {
    g.m = 2;
    g.mu0 = [](std::span<const double> x) { return x[0] * x[0] + x[1]; };
    g.mu1 = [](std::span<const double> x) { return 1.0 + x[0] * x[0] + x[1] * x[1] + x[0] * x[1]; };
    g.propensity = [](std::span<const double> x) { return 0.3 + 0.2 * (x[0] + x[1]); };
    g.noise_sd = constant(0.5);
    g.eta_star = 0.3;
  } else {
    throw Error("unknown DGP '" + name + "'");
  }
  return g;
}

/// Draws n units. Unit i of replication `rep` uses its own counter stream, so
/// any unit can be regenerated independently.
inline Dataset generate(const DGP& dgp, std::size_t n, std::uint64_t seed, std::uint32_t rep = 0) {
  if (n < 2) throw Error("generate needs n >= 2");
  const std::size_t m = dgp.m;
  std::vector<double> x(n * m), y(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterStream s(seed, StreamDomain::kGenerate, rep, static_cast<std::uint32_t>(i));
    std::vector<double> u;
    while (u.size() < m + 1) {
      const auto pair = s.uniform_pair();
      u.push_back(pair[0]);
      u.push_back(pair[1]);
    }
    const std::span<const double> xi(x.data() + i * m, m);
    std::copy(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(m), x.begin() + static_cast<std::ptrdiff_t>(i * m));
    d[i] = u[m] < dgp.propensity(xi) ? 1 : 0;
    const double eps = dgp.noise_sd(xi) * s.normal();
    y[i] = (d[i] ? dgp.mu1(xi) : dgp.mu0(xi)) + eps;
  }
  return Dataset(m, std::move(x), std::move(d), std::move(y));
}

struct MCReport {
  std::string experiment;
  std::string dgp;
  std::uint64_t seed = 0;
  std::map<std::string, double> grid;   // parameters of the cell
  std::map<std::string, double> values;
  std::map<std::string, double> mc_se;
  std::map<std::string, std::vector<double>> series;  // curves (radius tail)
};

/// Binomial standard error with a half-count continuity adjustment, so it
/// stays positive at 0% and 100%.
inline double binomial_se(double hits, double reps) {
  const double p = (hits + 0.5) / (reps + 1.0);
  return std::sqrt(p * (1.0 - p) / reps);
}

/// Regressor used inside Monte Carlo replications; oracle settings are
/// resolved against the DGP's true surfaces.
inline RegressorPair fit_for(const DGP& dgp, const Dataset& ds, const RegressorSettings& settings) {
  if (settings.kind == RegressorKind::kOracle) return dgp.oracle();
  return fit(ds, settings);
}

inline std::size_t rule_matches(double n, double exponent) {
  return static_cast<std::size_t>(std::ceil(std::pow(n, exponent) - 1e-12));
}

/// Sampling law of sqrt(n)(tau_bc - tau) against N(0, sigma^2).
inline MCReport mc_kolmogorov(const DGP& dgp, std::size_t n, std::size_t M, std::size_t reps, std::uint64_t seed,
                              const RegressorSettings& settings = {}) {
  if (reps < 100) throw Error("mc_kolmogorov needs reps >= 100");
  const double sigma2 = dgp.sigma2();
  if (!std::isfinite(sigma2) || sigma2 <= 0.0) {
    throw Error("limiting variance of DGP '" + dgp.name + "' is " + format_double(sigma2) +
                "; Kolmogorov distance against N(0, sigma^2) is undefined");
  }
  const double tau = dgp.tau();
  const double rn = std::sqrt(static_cast<double>(n));
  std::vector<double> stat(reps);
  parallel_for(reps, [&](std::size_t r) {
    const Dataset ds = generate(dgp, n, seed, static_cast<std::uint32_t>(r));
    const MatchResult mr = match_mnn(ds, M);
    const RegressorPair rp = fit_for(dgp, ds, settings);
    stat[r] = rn * (tau_bc_from_terms(correction_terms(ds, mr, rp)) - tau);
  });
  const KolmogorovResult k = kolmogorov_test(stat, 0.0, std::sqrt(sigma2));
  MCReport rep;
  rep.experiment = "kolmogorov";
  rep.dgp = dgp.name;
  rep.seed = seed;
  rep.grid = {{"n", double(n)}, {"M", double(M)}, {"reps", double(reps)}};
  rep.values["d_k"] = k.distance;
  rep.values["sup_at"] = k.at;
  rep.values["sigma2"] = sigma2;
  rep.values["tau"] = tau;
  rep.values["mean_stat"] = pairwise_mean(stat);
  // Pointwise ECDF error at the supremum location.
  rep.mc_se["d_k"] = std::max(std::sqrt(k.model_cdf * (1.0 - k.model_cdf) / static_cast<double>(reps)),
                              1.0 / static_cast<double>(reps));
  return rep;
}

/// Fraction of replications whose bootstrap interval covers tau.
inline MCReport mc_coverage(const DGP& dgp, std::size_t n, std::size_t M, std::size_t B, double alpha,
                            std::size_t reps, std::uint64_t seed, const RegressorSettings& settings = {}) {
  if (reps < 200) throw Error("mc_coverage needs reps >= 200");
  const double tau = dgp.tau();
  std::vector<double> hit_analytic(reps), hit_percentile(reps), width(reps);
  parallel_for(reps, [&](std::size_t r) {
    const auto rr = static_cast<std::uint32_t>(r);
    const Dataset ds = generate(dgp, n, seed, rr);
    const MatchResult mr = match_mnn(ds, M);
    const RegressorPair rp = fit_for(dgp, ds, settings);
    const CorrectionTerms t = correction_terms(ds, mr, rp);
    const BootstrapDistribution bd = bootstrap_from_terms(t, B, seed, rr);
    const BootstrapCI ci = bootstrap_ci(bd, bd.tau_hat_bc, alpha);
    hit_analytic[r] = ci.analytic.contains(tau) ? 1.0 : 0.0;
    hit_percentile[r] = ci.percentile.contains(tau) ? 1.0 : 0.0;
    width[r] = ci.analytic.width();
  });
  const double ha = pairwise_sum(hit_analytic), hp = pairwise_sum(hit_percentile);
  const double R = static_cast<double>(reps);
  MCReport rep;
  rep.experiment = "coverage";
  rep.dgp = dgp.name;
  rep.seed = seed;
  rep.grid = {{"n", double(n)}, {"M", double(M)}, {"B", double(B)}, {"alpha", alpha}, {"reps", R}};
  rep.values["coverage"] = ha / R;
  rep.values["coverage_percentile"] = hp / R;
  rep.values["mean_width"] = pairwise_mean(width);
  rep.values["tau"] = tau;
  rep.mc_se["coverage"] = binomial_se(ha, R);
  rep.mc_se["coverage_percentile"] = binomial_se(hp, R);
  return rep;
}

/// n * Var(E_n) across replications against the variance floor and sigma^2.
inline MCReport mc_variance(const DGP& dgp, std::size_t n, std::size_t M, std::size_t reps, std::uint64_t seed) {
  if (reps < 2) throw Error("mc_variance needs reps >= 2");
  const RegressorPair truth = dgp.oracle();
  std::vector<double> en(reps);
  parallel_for(reps, [&](std::size_t r) {
    const Dataset ds = generate(dgp, n, seed, static_cast<std::uint32_t>(r));
    en[r] = decompose_en(ds, match_mnn(ds, M), truth).e_n;
  });
  const double R = static_cast<double>(reps);
  const double mean = pairwise_mean(en);
  std::vector<double> d2(reps), d4(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const double c = en[r] - mean;
    d2[r] = c * c;
    d4[r] = c * c * c * c;
  }
  const double m2 = pairwise_mean(d2);
  const double m4 = pairwise_mean(d4);
  const double var = m2 * R / (R - 1.0);
  const double nd = static_cast<double>(n);
  MCReport rep;
  rep.experiment = "variance";
  rep.dgp = dgp.name;
  rep.seed = seed;
  rep.grid = {{"n", nd}, {"M", double(M)}, {"reps", R}};
  rep.values["n_var_en"] = nd * var;
  rep.values["floor"] = dgp.variance_floor();
  rep.values["sigma2"] = dgp.sigma2();
  rep.values["mean_en"] = mean;
  rep.values["tau"] = dgp.tau();
  // Delta-method standard error of the sample variance.
  rep.mc_se["n_var_en"] = nd * std::sqrt(std::max(m4 - m2 * m2, 0.0) / R);
  rep.mc_se["mean_en"] = std::sqrt(var / R);
  return rep;
}

/// Radii where the tail envelope falls from e^2 to about 1e-6.
inline std::vector<double> default_radius_grid(const DGP& dgp, std::size_t n, std::size_t M, std::size_t points = 20) {
  const double divisor = std::max(2.0 * static_cast<double>(M), 8.0);
  const double rate = unit_ball_volume(static_cast<unsigned>(dgp.m)) * dgp.g_min * dgp.eta_star *
                      static_cast<double>(n) / divisor;
  const double r_max = std::pow((2.0 - std::log(1e-6)) / rate, 1.0 / static_cast<double>(dgp.m));
  std::vector<double> grid(points);
  for (std::size_t j = 0; j < points; ++j) grid[j] = r_max * static_cast<double>(j) / static_cast<double>(points - 1);
  return grid;
}

/// Pooled survival of stabilization radii against the tail envelope.
inline MCReport mc_radius_tail(const DGP& dgp, std::size_t n, std::size_t M, std::size_t reps,
                               std::vector<double> r_grid, std::uint64_t seed) {
  if (n < 9) throw Error("mc_radius_tail needs n >= 9");
  if (r_grid.empty()) r_grid = default_radius_grid(dgp, n, M);
  std::vector<std::vector<double>> per_rep(reps);
  parallel_for(reps, [&](std::size_t r) {
    const Dataset ds = generate(dgp, n, seed, static_cast<std::uint32_t>(r));
    per_rep[r] = empirical_radius_tail(ds, M, r_grid);
  });
  const std::size_t G = r_grid.size();
  const double R = static_cast<double>(reps);
  const double units = R * static_cast<double>(n);
  std::vector<double> survival(G, 0.0), envelope(G), se(G);
  std::size_t violations = 0;
  for (std::size_t j = 0; j < G; ++j) {
    std::vector<double> col(reps);
    for (std::size_t r = 0; r < reps; ++r) col[r] = per_rep[r][j];
    survival[j] = pairwise_mean(col);
    envelope[j] = radius_tail_envelope(r_grid[j], static_cast<unsigned>(dgp.m), dgp.g_min, dgp.eta_star,
                                       static_cast<double>(n), static_cast<double>(M));
    se[j] = binomial_se(survival[j] * units, units);
    if (survival[j] > envelope[j]) ++violations;
  }
  MCReport rep;
  rep.experiment = "radius-tail";
  rep.dgp = dgp.name;
  rep.seed = seed;
  rep.grid = {{"n", double(n)}, {"M", double(M)}, {"reps", R},
              {"divisor", std::max(2.0 * static_cast<double>(M), 8.0)}};
  rep.values["violations"] = static_cast<double>(violations);
  rep.mc_se["violations"] = 0.0;
  rep.series["r_grid"] = r_grid;
  rep.series["survival"] = survival;
  rep.series["envelope"] = envelope;
  rep.series["survival_se"] = se;
  return rep;
}

/// Mean density-ratio estimate over control units, with its standard error.
inline MCReport density_ratio_check(const DGP& dgp, std::size_t n, std::size_t M, std::uint64_t seed) {
  const Dataset ds = generate(dgp, n, seed, 0);
  const MatchResult mr = match_mnn(ds, M);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!ds.treated(i)) ratios.push_back(density_ratio(ds, mr, i));
  }
  const double mean = pairwise_mean(ratios);
  std::vector<double> dev(ratios.size());
  for (std::size_t j = 0; j < ratios.size(); ++j) dev[j] = (ratios[j] - mean) * (ratios[j] - mean);
  const double c = static_cast<double>(ratios.size());
  const double sd = std::sqrt(pairwise_sum(dev) / (c - 1.0));
  MCReport rep;
  rep.experiment = "density-ratio";
  rep.dgp = dgp.name;
  rep.seed = seed;
  rep.grid = {{"n", double(n)}, {"M", double(M)}};
  rep.values["mean_ratio"] = mean;
  rep.values["n0"] = c;
  rep.mc_se["mean_ratio"] = sd / std::sqrt(c);
  return rep;
}

}  // namespace ate

#endif  // ATE_SIMLAB_HPP
