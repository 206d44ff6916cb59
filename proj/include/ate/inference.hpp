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
#ifndef ATE_INFERENCE_HPP
#define ATE_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ate/common.hpp"
#include "ate/data.hpp"
#include "ate/estimators.hpp"
#include "ate/matching.hpp"
#include "ate/random.hpp"
#include "ate/regress.hpp"

namespace ate {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal quantile needs 0 < p < 1");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct VarianceReport {
  double sigma2_hat = 0.0;
  double k1 = 0.0;  // contrast spread
  double k2 = 0.0;  // treated weighted residuals
  double k3 = 0.0;  // control weighted residuals
  std::optional<double> n_var_en;  // simulation mode only
};

/// Conditional variance of the multiplier bootstrap, K1 + K2 + K3.
inline VarianceReport variance_from_terms(const CorrectionTerms& t) {
  const std::size_t n = t.n();
  const double mean = pairwise_mean(t.delta_mu);
  std::vector<double> c1(n), c2(n, 0.0), c3(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = t.delta_mu[i] - mean;
    c1[i] = dev * dev;
    const double wr = t.weight[i] * t.residual[i];
    (t.d[i] ? c2 : c3)[i] = wr * wr;
  }
  VarianceReport v;
  v.k1 = pairwise_mean(c1);
  v.k2 = pairwise_mean(c2);
  v.k3 = pairwise_mean(c3);
  v.sigma2_hat = v.k1 + v.k2 + v.k3;
  return v;
}

inline VarianceReport estimate_sigma2(const Dataset& ds, const MatchResult& mr, const RegressorPair& rp) {
  return variance_from_terms(correction_terms(ds, mr, rp));
}

/// Nearest-neighbour density-ratio estimate at unit i: (n0/n1) K/M for a
/// control unit, mirrored as (n1/n0) K/M for a treated unit.
inline double density_ratio(const Dataset& ds, const MatchResult& mr, std::size_t i) {
  check_match_result(ds, mr);
  if (i >= ds.n()) throw Error("unit index " + std::to_string(i) + " out of range");
  const double n1 = static_cast<double>(ds.n1());
  const double n0 = static_cast<double>(ds.n0());
  if (n1 == 0.0 || n0 == 0.0) throw Error("density ratio undefined: empty treatment arm");
  const double k_over_m = static_cast<double>(mr.k_count[i]) / static_cast<double>(mr.M);
  return ds.treated(i) ? (n1 / n0) * k_over_m : (n0 / n1) * k_over_m;
}

struct BootstrapDistribution {
  std::vector<double> replicates;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  std::uint32_t substream = 0;
  double conditional_sd = 0.0;
  double tau_hat_bc = 0.0;
};

/// Test hook: returns (V, W) for (replicate, unit) instead of random draws.
using MultiplierHook = std::function<std::pair<double, double>(std::size_t, std::size_t)>;

/// Multiplier bootstrap with K counts and surfaces frozen. Unit i's (V_i, W_i)
/// in replicate b come from its own stream keyed by (seed, b, substream, i), so
/// the output does not depend on the worker count.
inline BootstrapDistribution bootstrap_from_terms(const CorrectionTerms& t, std::size_t B, std::uint64_t seed,
                                                  std::uint32_t substream = 0, const MultiplierHook& hook = {}) {
  if (B == 0) throw Error("bootstrap needs at least one replicate");
  const std::size_t n = t.n();
  const double mean = pairwise_mean(t.delta_mu);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = t.delta_mu[i] - mean;
    b[i] = t.weight[i] * t.residual[i];
  }
  BootstrapDistribution bd;
  bd.B = B;
  bd.seed = seed;
  bd.substream = substream;
  bd.tau_hat_bc = tau_bc_from_terms(t);
  const VarianceReport v = variance_from_terms(t);
  bd.conditional_sd = std::sqrt(v.sigma2_hat) / std::sqrt(static_cast<double>(n));
  bd.replicates.resize(B);
  parallel_for(B, [&](std::size_t rep) {
    std::vector<double> terms(n);
    if (hook) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto [vi, wi] = hook(rep, i);
        terms[i] = a[i] * vi + b[i] * wi;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        UnitStream stream(seed, StreamDomain::kBootstrap, static_cast<std::uint32_t>(rep), substream,
                          static_cast<std::uint32_t>(i));
        const auto z = stream.normal_pair();
        terms[i] = a[i] * z[0] + b[i] * (1.0 + z[1]);
      }
    }
    bd.replicates[rep] = mean + pairwise_mean(terms);
  });
  return bd;
}

inline BootstrapDistribution multiplier_bootstrap(const Dataset& ds, const MatchResult& mr, const RegressorPair& rp,
                                                  std::size_t B, std::uint64_t seed, const MultiplierHook& hook = {}) {
  return bootstrap_from_terms(correction_terms(ds, mr, rp), B, seed, 0, hook);
}

/// Sample quantile, linear interpolation between order statistics (type 7).
inline double quantile_type7(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const { return lower <= v && v <= upper; }
  double width() const { return upper - lower; }
};

struct BootstrapCI {
  double alpha = 0.05;
  Interval percentile;  // from replicate quantiles of tau_boot - tau_bc
  Interval analytic;    // tau_bc -/+ z * conditional_sd (default)
};

/// Percentile interval uses the pivot tau_boot - tau_bc:
/// [tau_bc - q(1 - a/2), tau_bc - q(a/2)].
inline BootstrapCI bootstrap_ci(const BootstrapDistribution& bd, double tau_hat_bc, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (static_cast<double>(bd.replicates.size()) < 20.0 / alpha) {
    throw Error("too few bootstrap replicates: B=" + std::to_string(bd.replicates.size()) +
                " but alpha=" + format_double(alpha) + " needs B >= 20/alpha");
  }
  std::vector<double> centred(bd.replicates.size());
  for (std::size_t b = 0; b < centred.size(); ++b) centred[b] = bd.replicates[b] - tau_hat_bc;
  std::sort(centred.begin(), centred.end());
  BootstrapCI ci;
  ci.alpha = alpha;
  ci.percentile = {tau_hat_bc - quantile_type7(centred, 1.0 - alpha / 2.0),
                   tau_hat_bc - quantile_type7(centred, alpha / 2.0)};
  const double z = normal_quantile(1.0 - alpha / 2.0);
  ci.analytic = {tau_hat_bc - z * bd.conditional_sd, tau_hat_bc + z * bd.conditional_sd};
  return ci;
}

struct KolmogorovResult {
  double distance = 0.0;
  double at = 0.0;        // sample point where the supremum is attained
  double model_cdf = 0.0; // reference CDF there
};

/// Exact sup |F_n - Phi((. - mean)/sd)|, checking both sides of every jump.
inline KolmogorovResult kolmogorov_test(std::span<const double> sample, double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd)) throw Error("kolmogorov distance needs sd > 0");
  if (sample.empty()) throw Error("kolmogorov distance needs a non-empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  KolmogorovResult best;
  best.distance = -1.0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double f = normal_cdf((s[i] - mean) / sd);
    const double below = static_cast<double>(i) / n;
    const double at = static_cast<double>(j) / n;
    const double dist = std::max(std::abs(at - f), std::abs(below - f));
    if (dist > best.distance) best = {dist, s[i], f};
    i = j;
  }
  return best;
}

inline double kolmogorov_distance(std::span<const double> sample, double mean, double sd) {
  return kolmogorov_test(sample, mean, sd).distance;
}

}  // namespace ate

#endif  // ATE_INFERENCE_HPP
