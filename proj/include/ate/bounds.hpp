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
#ifndef ATE_BOUNDS_HPP
#define ATE_BOUNDS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ate/common.hpp"
#include "ate/data.hpp"
#include "ate/regress.hpp"

// Every unnamed universal constant is 1: the values below are rate values,
// not literal probability bounds.

namespace ate {

struct BoundInputs {
  double n = 0.0;
  double M = 0.0;
  double eta = 0.5;
  double p = 1.0;
  unsigned m = 1;
  unsigned m_prime = 0;  // 0 means "same as m"
  double r0 = 1.0;
  std::vector<double> gamma;  // gamma_l (or gamma_{phi,l}) for l = 1, 2, ...
  double phi_err_modulus = 0.0;  // expected modulus of continuity of phi_hat - phi
  double phi_err_sup = 0.0;      // E sup ||phi_hat - phi||^{2m}
  double M_l = 1.0;
  double M_u_p = 1.0;
  double E1 = 0.0;
  double E2 = 0.0;

  static constexpr double kDefaultGamma = 0.5;

  double alpha() const { return p / (16.0 + 2.0 * p); }
  double zeta() const { return p / (40.0 + 10.0 * p); }
  unsigned dim_prime() const { return m_prime == 0 ? m : m_prime; }
  double gamma_l(std::size_t l) const { return l - 1 < gamma.size() ? gamma[l - 1] : kDefaultGamma; }
};

inline void validate(const BoundInputs& bi) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(bi.n)) throw Error("bounds: n must be positive");
  if (!positive(bi.M)) throw Error("bounds: M must be positive");
  if (!positive(bi.eta) || bi.eta > 0.5) throw Error("bounds: eta must lie in (0, 1/2]");
  if (!positive(bi.p) || bi.p > 1.0) throw Error("bounds: p must lie in (0, 1]");
  if (bi.m == 0) throw Error("bounds: dim must be at least 1");
  if (!positive(bi.r0)) throw Error("bounds: r0 must be positive");
  for (double g : bi.gamma) {
    if (!std::isfinite(g) || g < 0.0) throw Error("bounds: gamma entries must be finite and non-negative");
  }
  for (double v : {bi.phi_err_modulus, bi.phi_err_sup, bi.M_l, bi.M_u_p, bi.E1, bi.E2}) {
    if (!std::isfinite(v) || v < 0.0) throw Error("bounds: error functionals and moments must be non-negative");
  }
}

struct DeltaTerms {
  double h1 = 0.0;
  double h2 = 0.0;
  double h3 = 0.0;
};

struct BoundReport {
  std::string mode;
  DeltaTerms delta;
  std::vector<std::pair<std::string, double>> b_terms;  // in summation order
  std::map<std::string, double> components;            // summands inside the B-terms
  double total = 0.0;
  std::map<std::string, bool> regime_flags;
  std::vector<std::string> notes;
  std::map<std::string, double> extras;  // e.g. L and the probability floor

  double term(const std::string& name) const {
    for (const auto& [k, v] : b_terms) {
      if (k == name) return v;
    }
    throw Error("no bound term named " + name);
  }
};

namespace detail {

// e^{-(1 - log 2) M} + e^{M - r0 n eta - M log M + M log(r0 n eta)}; the
// second exponent is evaluated as M (1 - t + log t), t = r0 n eta / M.
inline double delta_bracket(const BoundInputs& bi) {
  const double t = bi.r0 * bi.n * bi.eta / bi.M;
  return std::exp(-(1.0 - std::numbers::ln2) * bi.M) + std::exp(bi.M * (1.0 - t + std::log(t)));
}

inline void finish(BoundReport& r) {
  r.total = 0.0;
  for (const auto& [k, v] : r.b_terms) r.total += v;
}

inline void side_conditions(const BoundInputs& bi, BoundReport& r) {
  r.regime_flags["M_le_n_eta"] = bi.M <= bi.n * bi.eta;
  r.regime_flags["n_eta_sq_ge_1"] = bi.n * bi.eta * bi.eta >= 1.0;
  r.regime_flags["n_ge_9"] = bi.n >= 9.0;
}

inline double max_or_zero(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

}  // namespace detail

inline DeltaTerms eval_delta_terms(const BoundInputs& bi) {
  validate(bi);
  const double n = bi.n, M = bi.M, eta = bi.eta;
  const double br = detail::delta_bracket(bi);
  DeltaTerms d;
  d.h1 = 1.0 / (n * n * std::pow(eta, 4)) + std::pow(n / (M * eta), 2) * br * br;
  d.h2 = std::pow(M / (n * eta), 1.0 / bi.m) + 1.0 / (n * eta) + (n / M) * br;
  d.h3 = std::pow(n / (M * eta), 2) * std::exp(-(1.0 - std::numbers::ln2) * M);
  return d;
}

namespace detail {

// Shared by B1 and B4.
inline double gaussian_term(const BoundInputs& bi, BoundReport& r, const std::string& label) {
  const double n = bi.n, M = bi.M, eta = bi.eta, p = bi.p;
  const double ratio = M / (bi.zeta() * eta);
  const double f1 = std::pow(ratio, 20.0 / (8.0 + p));
  const double f2 = std::pow(M / eta, (16.0 + 3.0 * p) / (16.0 + 2.0 * p));
  const double f3 = std::pow(ratio, 40.0 / (8.0 + p));
  r.regime_flags[label + "_M_over_zeta_eta_gt_1"] = ratio > 1.0;
  r.regime_flags[label + "_M_over_eta_gt_1"] = M / eta > 1.0;
  const double first = std::max(f1, 1.0) * std::max(f2, 1.0) / (bi.alpha() * std::sqrt(n));
  const double second = std::max(f3, 1.0) / std::sqrt(n);
  r.components[label + ".first"] = first;
  r.components[label + ".second"] = second;
  return first + second;
}

// B3-type variance term with dimension dim.
inline double variance_term(const BoundInputs& bi, const DeltaTerms& d, unsigned dim, BoundReport& r,
                            const std::string& label) {
  const double n = bi.n, M = bi.M, eta = bi.eta;
  const double t1 = (1.0 / eta) * std::pow(M / (n * eta), 1.0 / (2.0 * dim));
  const double t2 = std::sqrt(d.h1);
  const double t3 = (std::sqrt(d.h2) + 1.0) / (eta * std::sqrt(M));
  const double t4 = std::sqrt(d.h3);
  const double t5 = 1.0 / (std::pow(eta, 3) * std::cbrt(n));
  r.components[label + ".locality"] = t1;
  r.components[label + ".delta_h1"] = t2;
  r.components[label + ".delta_h2"] = t3;
  r.components[label + ".delta_h3"] = t4;
  r.components[label + ".cube_root"] = t5;
  return t1 + t2 + t3 + t4 + t5;
}

inline double covariate_bias_inner(const BoundInputs& bi) {
  const double n = bi.n, M = bi.M, m = bi.m;
  const unsigned k = bi.m / 2 + 1;
  std::vector<double> cand;
  for (unsigned l = 1; l < k; ++l) {
    cand.push_back(std::pow(n, -bi.gamma_l(l) / 2.0 - l / (2.0 * m) + 0.25) * std::pow(M, l / (2.0 * m)));
  }
  return std::pow(M, k / (2.0 * m)) * std::pow(n, -(k / (2.0 * m)) + 0.25) + max_or_zero(cand);
}

}  // namespace detail

/// B1 + B2 + B3 for the covariate estimator.
inline BoundReport eval_covariate_bound(const BoundInputs& bi) {
  BoundReport r;
  r.mode = "covariate";
  r.delta = eval_delta_terms(bi);
  detail::side_conditions(bi, r);
  const unsigned k = bi.m / 2 + 1;
  const double b1 = detail::gaussian_term(bi, r, "B1");
  const double inner = detail::covariate_bias_inner(bi);
  r.components["B2.inner"] = inner;
  const double b2 = (std::pow(bi.eta, -(k / (2.0 * bi.m))) + std::sqrt(r.delta.h1)) * inner;
  const double b3 = detail::variance_term(bi, r.delta, bi.m, r, "B3");
  r.b_terms = {{"B1", b1}, {"B2", b2}, {"B3", b3}};
  detail::finish(r);
  return r;
}

/// B1' + B2' + B3' (eta bounded away from zero, delta terms negligible).
inline BoundReport eval_covariate_bound_simplified(const BoundInputs& bi) {
  validate(bi);
  BoundReport r;
  r.mode = "covariate-simplified";
  r.delta = eval_delta_terms(bi);
  detail::side_conditions(bi, r);
  r.regime_flags["eta_ge_0.05"] = bi.eta >= 0.05;
  if (bi.eta < 0.05) r.notes.push_back("eta < 0.05: simplified bound assumes eta bounded away from 0");
  const double n = bi.n, M = bi.M;
  const double b1 = std::pow(M, 40.0 / (8.0 + bi.p)) / std::sqrt(n);
  const double b2 = detail::covariate_bias_inner(bi);
  const double b3 = std::pow(M / n, 1.0 / (2.0 * bi.m)) + 1.0 / std::sqrt(M) + 1.0 / std::cbrt(n);
  r.b_terms = {{"B1'", b1}, {"B2'", b2}, {"B3'", b3}};
  detail::finish(r);
  return r;
}

/// B4 + B5 + B6 for the phi-transformed estimator.
inline BoundReport eval_rank_bound(const BoundInputs& bi) {
  BoundReport r;
  r.mode = "rank";
  r.delta = eval_delta_terms(bi);
  detail::side_conditions(bi, r);
  const double n = bi.n, M = bi.M, eta = bi.eta;
  const unsigned mp = bi.dim_prime();
  const double mpd = mp;
  const unsigned k = std::max(mp / 2, 1u) + 1;
  const double b4 = detail::gaussian_term(bi, r, "B4");

  std::vector<double> cand;
  for (unsigned l = 1; l < k; ++l) {
    cand.push_back(std::pow(n, -bi.gamma_l(l) / 2.0 + 0.25) *
                   (std::pow(M / n, l / (2.0 * mpd)) + std::pow(n, -(l / 4.0))));
  }
  const double lead = std::pow(M, k / (2.0 * mpd)) * std::pow(n, -(k / (2.0 * mpd)) + 0.25);
  const double reg = detail::max_or_zero(cand);
  const double tail = std::pow(n, -(k / 4.0) + 0.25);
  const double phi_mod = std::pow(n, 0.25) * std::sqrt(bi.phi_err_modulus);
  r.components["B5.lead"] = lead;
  r.components["B5.regression"] = reg;
  r.components["B5.tail"] = tail;
  r.components["B5.phi_modulus"] = phi_mod;
  const double inner = lead + reg + tail + phi_mod;
  r.components["B5.inner"] = inner;
  const double b5 = (std::pow(eta, -(k / (2.0 * mpd))) + std::sqrt(r.delta.h1)) * inner;

  double b6 = detail::variance_term(bi, r.delta, mp, r, "B6");
  const double phi_sup = std::pow(n / M, static_cast<double>(bi.m) / mpd) *
                         std::pow((n * n) / (M * M) * bi.phi_err_sup, 0.25);
  r.components["B6.phi_sup"] = phi_sup;
  b6 += phi_sup;
  r.b_terms = {{"B4", b4}, {"B5", b5}, {"B6", b6}};
  detail::finish(r);
  return r;
}

/// B4' + B5' + B6' for the empirical-CDF rank estimator.
inline BoundReport eval_cdf_rank_bound(const BoundInputs& bi) {
  validate(bi);
  BoundReport r;
  r.mode = "cdf";
  r.delta = eval_delta_terms(bi);
  detail::side_conditions(bi, r);
  r.regime_flags["eta_ge_0.05"] = bi.eta >= 0.05;
  if (bi.eta < 0.05) r.notes.push_back("eta < 0.05: simplified bound assumes eta bounded away from 0");
  const double n = bi.n, M = bi.M, m = bi.m;
  const unsigned k = std::max(bi.m / 2, 1u) + 1;
  const double b4 = std::pow(M, 40.0 / (8.0 + bi.p)) / std::sqrt(n);
  std::vector<double> cand;
  for (unsigned l = 1; l < k; ++l) {
    cand.push_back(std::pow(n, -bi.gamma_l(l) / 2.0 + 0.25) *
                   (std::pow(M / n, l / (2.0 * m)) + std::pow(n, -(l / 4.0))));
  }
  const double b5 =
      std::pow(M, k / (2.0 * m)) * std::pow(n, -(k / (2.0 * m)) + 0.25) + detail::max_or_zero(cand) + std::pow(n, -0.25);
  double branch;
  if (bi.m == 1) {
    branch = std::pow(M, -0.25);
  } else if (bi.m == 2) {
    branch = std::pow(1.0 / (M * n), 1.0 / 6.0);
  } else {
    branch = std::pow(M, -1.5) * std::pow(n, (3.0 - m) / 2.0);
  }
  r.components["B6'.transform"] = branch;
  const double b6 = std::pow(M / n, 1.0 / (2.0 * m)) + 1.0 / std::sqrt(M) + branch;
  r.b_terms = {{"B4'", b4}, {"B5'", b5}, {"B6'", b6}};
  detail::finish(r);
  return r;
}

enum class BootstrapTarget { kCovariate, kRank };

/// Bootstrap approximation bound. L is the conditional-variance floor; the
/// statement holds with probability at least 1 - min(16 B3, 1) (B6 for rank).
inline BoundReport eval_bootstrap_bound(const BoundInputs& bi, BootstrapTarget which) {
  const bool rank = which == BootstrapTarget::kRank;
  const BoundReport base = rank ? eval_rank_bound(bi) : eval_covariate_bound(bi);
  BoundReport r = base;
  r.mode = rank ? "bootstrap-rank" : "bootstrap";
  const double n = bi.n, eta = bi.eta;
  const double e = rank ? bi.E2 : bi.E1;
  const double L = std::max(
      bi.M_l - std::sqrt(bi.M_u_p) * std::pow(n, -1.0 / 3.0) -
          2.0 * e * (bi.M_u_p + std::pow(2.0 * bi.M_u_p, 0.25) * std::pow(n, -5.0 / 12.0)),
      0.0);
  const double gauss = base.b_terms[0].second;
  const double bias = base.b_terms[1].second;
  const double var = base.b_terms[2].second;
  const double remainder = e / eta + std::pow(eta, -2.0) * std::pow(n, -0.25);
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double scaled_var = L > 0.0 ? (1.0 + e * e) * var / L : inf;
  const double scaled_rem = L > 0.0 ? remainder / L : inf;
  r.extras["L"] = L;
  r.extras["probability_floor"] = 1.0 - std::min(16.0 * var, 1.0);
  r.regime_flags["variance_floor_positive"] = L > 0.0;
  if (L == 0.0) r.notes.push_back("vacuous bound (variance floor hit zero)");
  const std::string g = rank ? "B4" : "B1", b = rank ? "B5" : "B2", v = rank ? "B6" : "B3";
  r.b_terms = {{g, gauss}, {b, bias}, {"(1+E^2)" + v + "/L", scaled_var}, {"(E/eta+eta^-2 n^-1/4)/L", scaled_rem}};
  detail::finish(r);
  return r;
}

/// Integer M in [1, n] minimizing scale * M^{40/(8+p)} n^{-1/2} + M^{-1/2}
/// (smallest minimizer on ties).
inline std::size_t optimal_M_dim1(std::size_t n, double p, double scale = 1.0) {
  if (n < 9) throw Error("optimal M needs n >= 9");
  if (!(p > 0.0 && p <= 1.0)) throw Error("optimal M needs p in (0, 1]");
  const double e = 40.0 / (8.0 + p);
  const double rn = 1.0 / std::sqrt(static_cast<double>(n));
  std::size_t best = 1;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t M = 1; M <= n; ++M) {
    const double Md = static_cast<double>(M);
    const double v = scale * std::pow(Md, e) * rn + 1.0 / std::sqrt(Md);
    if (v < best_v) {
      best_v = v;
      best = M;
    }
  }
  return best;
}

/// Continuous balance point of the two terms above (unit scale).
inline double balance_point_dim1(double n, double p) {
  // M^{e} n^{-1/2} = M^{-1/2}  =>  M = n^{1/(2e+1)}
  const double e = 40.0 / (8.0 + p);
  return std::pow(n, 1.0 / (2.0 * e + 1.0));
}

/// Volume of the unit ball in R^m.
inline double unit_ball_volume(unsigned m) {
  const double md = m;
  return std::pow(std::numbers::pi, md / 2.0) / std::tgamma(md / 2.0 + 1.0);
}

/// Tail envelope for the stabilization radius:
/// e^2 exp(-V_m g_min eta n r^m / max(2M, 8)).
inline double radius_tail_envelope(double r, unsigned m, double g_min, double eta, double n, double M) {
  const double divisor = std::max(2.0 * M, 8.0);
  return std::exp(2.0 - unit_ball_volume(m) * g_min * eta * n * std::pow(r, m) / divisor);
}

/// Overlap estimate for data mode: clip(min_i min(e_hat, 1 - e_hat), 0.01, 0.5)
/// with e_hat a k-NN propensity fit on the full sample.
inline double estimate_overlap(const Dataset& ds) {
  const std::size_t k = std::min(ds.n(), RegressorPair::default_knn_k(ds.n(), ds.m()));
  std::vector<double> dd(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) dd[i] = ds.d()[i];
  const detail::KnnSurface surface(ds.m(), ds.x(), dd, k);
  double lo = 0.5;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double e = surface.predict(ds.row(i));
    lo = std::min(lo, std::min(e, 1.0 - e));
  }
  return std::clamp(lo, 0.01, 0.5);
}

}  // namespace ate

#endif  // ATE_BOUNDS_HPP
