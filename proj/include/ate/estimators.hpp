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
#ifndef ATE_ESTIMATORS_HPP
#define ATE_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ate/common.hpp"
#include "ate/data.hpp"
#include "ate/matching.hpp"
#include "ate/regress.hpp"

namespace ate {

enum class EstimatorMethod { kCovariate, kRank, kPhi };

inline std::string to_string(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::kCovariate: return "covariate";
    case EstimatorMethod::kRank: return "rank";
    case EstimatorMethod::kPhi: return "phi";
  }
  return "unknown";
}

/// Per-unit ingredients of the bias-corrected estimator. The point estimate,
/// the conditional variance and the multiplier bootstrap are all functions of
/// these vectors.
struct CorrectionTerms {
  std::size_t M = 0;
  std::vector<std::uint8_t> d;
  std::vector<double> mu_hat0;    // control surface at unit i (control-side space)
  std::vector<double> mu_hat1;    // treated surface at unit i (treated-side space)
  std::vector<double> delta_mu;   // mu_hat1 - mu_hat0
  std::vector<double> residual;   // Y_i - mu_hat_{D_i}
  std::vector<double> weight;     // (2 D_i - 1)(1 + K_i / M)
  std::size_t extrapolated = 0;   // predictions outside the arm's training box

  std::size_t n() const { return d.size(); }
};

struct EstimateReport {
  EstimatorMethod method = EstimatorMethod::kCovariate;
  std::size_t M = 0;
  double tau_hat = 0.0;     // raw matching estimate
  double tau_hat_bc = 0.0;  // bias-corrected estimate
  double tau_reg = 0.0;     // regression-only estimate
  std::optional<double> e_n;  // leading term (requires the true surfaces)
  std::optional<double> b_m;  // true-surface bias term
  double b_hat_m = 0.0;       // fitted-surface bias term
  std::vector<double> residuals;
  std::size_t extrapolated = 0;
};

inline double matching_weight(bool treated, std::size_t k_count, std::size_t M) {
  const double w = 1.0 + static_cast<double>(k_count) / static_cast<double>(M);
  return treated ? w : -w;
}

inline void check_match_result(const Dataset& ds, const MatchResult& mr) {
  if (mr.n != ds.n() || mr.k_count.size() != ds.n() || mr.nn_idx.size() != ds.n() * mr.M) {
    throw Error("match result does not belong to this dataset");
  }
}

/// Raw matching estimator in its matched-count weighted form.
inline double estimate_tau_raw(const Dataset& ds, const MatchResult& mr) {
  check_match_result(ds, mr);
  std::vector<double> terms(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    terms[i] = matching_weight(ds.treated(i), mr.k_count[i], mr.M) * ds.y()[i];
  }
  return pairwise_mean(terms);
}

/// Evaluates the fitted surfaces at every unit. Arm-w surfaces are evaluated
/// in `space_for_arm0` / `space_for_arm1` respectively (both row-major n x dim).
inline CorrectionTerms correction_terms(std::span<const double> space_for_arm0,
                                        std::span<const double> space_for_arm1, std::size_t dim,
                                        const Dataset& ds, const MatchResult& mr,
                                        const RegressorPair& rp) {
  check_match_result(ds, mr);
  const std::size_t n = ds.n();
  CorrectionTerms t;
  t.M = mr.M;
  t.d = ds.d();
  t.mu_hat0.resize(n);
  t.mu_hat1.resize(n);
  t.delta_mu.resize(n);
  t.residual.resize(n);
  t.weight.resize(n);
  std::vector<std::uint8_t> extrap(n, 0);
  parallel_for(n, [&](std::size_t i) {
    const auto x0 = space_for_arm0.subspan(i * dim, dim);
    const auto x1 = space_for_arm1.subspan(i * dim, dim);
    t.mu_hat0[i] = rp.predict(0, x0);
    t.mu_hat1[i] = rp.predict(1, x1);
    extrap[i] = (rp.extrapolates(0, x0) || rp.extrapolates(1, x1)) ? 1 : 0;
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(t.mu_hat0[i]) || !std::isfinite(t.mu_hat1[i])) {
      throw Error("regressor produced a non-finite prediction at unit " + std::to_string(i));
    }
    t.delta_mu[i] = t.mu_hat1[i] - t.mu_hat0[i];
    t.residual[i] = ds.y()[i] - (ds.treated(i) ? t.mu_hat1[i] : t.mu_hat0[i]);
    t.weight[i] = matching_weight(ds.treated(i), mr.k_count[i], mr.M);
    t.extrapolated += extrap[i];
  }
  return t;
}

inline CorrectionTerms correction_terms(const Dataset& ds, const MatchResult& mr, const RegressorPair& rp) {
  return correction_terms(ds.x(), ds.x(), ds.m(), ds, mr, rp);
}

/// Bias-corrected estimate from precomputed terms:
/// regression contrast plus the matched-count weighted residual sum.
inline double tau_bc_from_terms(const CorrectionTerms& t) {
  std::vector<double> weighted(t.n());
  for (std::size_t i = 0; i < t.n(); ++i) weighted[i] = t.weight[i] * t.residual[i];
  return pairwise_mean(t.delta_mu) + pairwise_mean(weighted);
}

/// Average over units of (2 D_i - 1) times the mean difference of the
/// opposite-arm surface between unit i and its matches.
inline double matching_bias(const Dataset& ds, const MatchResult& mr, std::span<const double> surf0,
                            std::span<const double> surf1) {
  std::vector<double> terms(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const bool t = ds.treated(i);
    const auto& other = t ? surf0 : surf1;
    double s = 0.0;
    for (std::size_t j : mr.neighbors(i)) s += other[i] - other[j];
    s /= static_cast<double>(mr.M);
    terms[i] = t ? s : -s;
  }
  return pairwise_mean(terms);
}

namespace detail {

inline EstimateReport report_from_terms(EstimatorMethod method, const Dataset& ds, const MatchResult& mr,
                                        const CorrectionTerms& t) {
  EstimateReport r;
  r.method = method;
  r.M = mr.M;
  r.tau_hat = estimate_tau_raw(ds, mr);
  r.tau_reg = pairwise_mean(t.delta_mu);
  r.tau_hat_bc = tau_bc_from_terms(t);
  r.b_hat_m = matching_bias(ds, mr, t.mu_hat0, t.mu_hat1);
  r.residuals = t.residual;
  r.extrapolated = t.extrapolated;
  return r;
}

}  // namespace detail

struct Decomposition {
  double e_n = 0.0;
  double b_m = 0.0;
};

/// Leading term and true-surface bias term. Simulation-only: requires the true
/// surfaces as an oracle pair.
inline Decomposition decompose_en(const Dataset& ds, const MatchResult& mr, const RegressorPair& true_mu) {
  if (true_mu.kind() != RegressorKind::kOracle) {
    throw Error("decomposition requires the true outcome surfaces (oracle regressor)");
  }
  check_match_result(ds, mr);
  const std::size_t n = ds.n();
  std::vector<double> mu0(n), mu1(n), contrast(n), noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    mu0[i] = true_mu.predict(0, ds.row(i));
    mu1[i] = true_mu.predict(1, ds.row(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    contrast[i] = mu1[i] - mu0[i];
    const double eps = ds.y()[i] - (ds.treated(i) ? mu1[i] : mu0[i]);
    noise[i] = matching_weight(ds.treated(i), mr.k_count[i], mr.M) * eps;
  }
  return {pairwise_mean(contrast) + pairwise_mean(noise), matching_bias(ds, mr, mu0, mu1)};
}

/// Covariate-matching bias-corrected estimator. When `true_mu` is given, the
/// leading term E_n and the true bias B_M are filled in as well.
inline EstimateReport estimate_tau_bc(const Dataset& ds, const MatchResult& mr, const RegressorPair& rp,
                                      const RegressorPair* true_mu = nullptr) {
  const CorrectionTerms t = correction_terms(ds, mr, rp);
  EstimateReport r = detail::report_from_terms(EstimatorMethod::kCovariate, ds, mr, t);
  if (true_mu) {
    const Decomposition dec = decompose_en(ds, mr, *true_mu);
    r.e_n = dec.e_n;
    r.b_m = dec.b_m;
  }
  return r;
}

/// Component-wise empirical CDF of the sample covariates.
class RankTransform {
 public:
  explicit RankTransform(const Dataset& ds) : n_(ds.n()), m_(ds.m()), sorted_(ds.m()) {
    for (std::size_t k = 0; k < m_; ++k) {
      auto& col = sorted_[k];
      col.reserve(n_);
      for (std::size_t i = 0; i < n_; ++i) col.push_back(ds.x(i, k));
      std::sort(col.begin(), col.end());
    }
    l_hat_.resize(n_ * m_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = 0; k < m_; ++k) l_hat_[i * m_ + k] = cdf(k, ds.x(i, k));
    }
  }

  /// F_{n,k}(value) = #{j : X_{j,k} <= value} / n.
  double cdf(std::size_t k, double value) const {
    const auto& col = sorted_[k];
    const auto count = static_cast<std::size_t>(std::upper_bound(col.begin(), col.end(), value) - col.begin());
    return static_cast<double>(count) / static_cast<double>(n_);
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(m_);
    for (std::size_t k = 0; k < m_; ++k) out[k] = cdf(k, x[k]);
    return out;
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  /// Row-major n x m matrix of F_n(X_i).
  const std::vector<double>& l_hat() const { return l_hat_; }
  double l_hat(std::size_t i, std::size_t k) const { return l_hat_[i * m_ + k]; }

 private:
  std::size_t n_, m_;
  std::vector<std::vector<double>> sorted_;
  std::vector<double> l_hat_;
};

inline RankTransform rank_transform(const Dataset& ds) { return RankTransform(ds); }

/// Fits the regression pair on empirical-CDF coordinates.
inline RegressorPair fit_rank_regressor(const Dataset& ds, const RegressorSettings& settings) {
  const RankTransform rt(ds);
  return RegressorPair::fit_in_spaces(rt.l_hat(), rt.l_hat(), ds.m(), ds.d(), ds.y(), settings);
}

struct TransformedEstimate {
  EstimateReport report;
  MatchResult matches;  // matches and K counts in the transformed space
  CorrectionTerms terms;
};

/// Rank-based estimator: matching and bias correction on F_n(X_i).
inline TransformedEstimate estimate_tau_rank_full(const Dataset& ds, std::size_t M, const RegressorPair& rp_rank,
                                                  MatchEngine engine = MatchEngine::kAutomatic) {
  const RankTransform rt(ds);
  TransformedEstimate out;
  out.matches = match_in_spaces(rt.l_hat(), rt.l_hat(), ds.m(), ds.d(), M, engine);
  out.terms = correction_terms(rt.l_hat(), rt.l_hat(), ds.m(), ds, out.matches, rp_rank);
  out.report = detail::report_from_terms(EstimatorMethod::kRank, ds, out.matches, out.terms);
  return out;
}

inline EstimateReport estimate_tau_rank(const Dataset& ds, std::size_t M, const RegressorPair& rp_rank) {
  return estimate_tau_rank_full(ds, M, rp_rank).report;
}

/// Coordinate map applied before matching. Possibly estimated from the
/// sample; `output_dim` is the transformed dimension.
struct CoordinateTransform {
  std::string name;
  std::size_t output_dim = 0;
  std::function<std::vector<double>(std::span<const double>)> map;

  static CoordinateTransform identity(std::size_t m) {
    return {"identity", m, [](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); }};
  }

  /// Marginal empirical CDFs of `ds`.
  static CoordinateTransform ecdf(const Dataset& ds) {
    auto rt = std::make_shared<const RankTransform>(ds);
    return {"ecdf", ds.m(), [rt](std::span<const double> x) { return rt->apply(x); }};
  }

  static CoordinateTransform scaled(double factor, std::size_t m) {
    return {"scaled", m, [factor](std::span<const double> x) {
              std::vector<double> out(x.begin(), x.end());
              for (double& v : out) v *= factor;
              return out;
            }};
  }
};

/// Applies a transform to every unit's covariates; row-major n x output_dim.
inline std::vector<double> transform_space(const Dataset& ds, const CoordinateTransform& phi) {
  if (!phi.map || phi.output_dim == 0) throw Error("transform '" + phi.name + "' is not defined");
  std::vector<double> out;
  out.reserve(ds.n() * phi.output_dim);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const std::vector<double> v = phi.map(ds.row(i));
    if (v.size() != phi.output_dim) {
      throw Error("transform '" + phi.name + "' returned wrong dimension for unit " + std::to_string(i));
    }
    for (double c : v) {
      if (!std::isfinite(c)) {
        throw Error("transform '" + phi.name + "' produced a non-finite value for unit " + std::to_string(i));
      }
    }
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline RegressorPair fit_phi_regressor(const Dataset& ds, const CoordinateTransform& phi0,
                                       const CoordinateTransform& phi1, const RegressorSettings& settings) {
  if (phi0.output_dim != phi1.output_dim) throw Error("transforms must share an output dimension");
  const auto s0 = transform_space(ds, phi0);
  const auto s1 = transform_space(ds, phi1);
  return RegressorPair::fit_in_spaces(s0, s1, phi0.output_dim, ds.d(), ds.y(), settings);
}

/// General transformed estimator. A treated unit is matched among controls
/// in phi0-space (and corrected with the control surface there); a control
/// unit is matched among treated units in phi1-space.
inline TransformedEstimate estimate_tau_phi_full(const Dataset& ds, std::size_t M, const CoordinateTransform& phi0,
                                                 const CoordinateTransform& phi1, const RegressorPair& rp_phi,
                                                 MatchEngine engine = MatchEngine::kAutomatic) {
  if (phi0.output_dim != phi1.output_dim) throw Error("transforms must share an output dimension");
  const auto s0 = transform_space(ds, phi0);
  const auto s1 = transform_space(ds, phi1);
  TransformedEstimate out;
  out.matches = match_in_spaces(s0, s1, phi0.output_dim, ds.d(), M, engine);
  out.terms = correction_terms(s0, s1, phi0.output_dim, ds, out.matches, rp_phi);
  out.report = detail::report_from_terms(EstimatorMethod::kPhi, ds, out.matches, out.terms);
  return out;
}

inline EstimateReport estimate_tau_phi(const Dataset& ds, std::size_t M, const CoordinateTransform& phi0,
                                       const CoordinateTransform& phi1, const RegressorPair& rp_phi) {
  return estimate_tau_phi_full(ds, M, phi0, phi1, rp_phi).report;
}

/// Matched counts computed with the true (population) transforms instead of
/// their estimates. Simulation-only.
inline std::vector<std::size_t> matched_counts_true_transform(const Dataset& ds, std::size_t M,
                                                              const CoordinateTransform& phi0_true,
                                                              const CoordinateTransform& phi1_true) {
  const auto s0 = transform_space(ds, phi0_true);
  const auto s1 = transform_space(ds, phi1_true);
  return match_in_spaces(s0, s1, phi0_true.output_dim, ds.d(), M).k_count;
}

}  // namespace ate

#endif  // ATE_ESTIMATORS_HPP
