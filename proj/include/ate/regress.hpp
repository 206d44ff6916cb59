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
#ifndef ATE_REGRESS_HPP
#define ATE_REGRESS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ate/common.hpp"
#include "ate/data.hpp"
#include "ate/kdtree.hpp"
#include "ate/matching.hpp"

namespace ate {

enum class RegressorKind { kKnn, kPolynomial, kOracle };

inline std::string to_string(RegressorKind k) {
  switch (k) {
    case RegressorKind::kKnn: return "knn";
    case RegressorKind::kPolynomial: return "poly";
    case RegressorKind::kOracle: return "oracle";
  }
  return "unknown";
}

using SurfaceFn = std::function<double(std::span<const double>)>;

struct RegressorSettings {
  RegressorKind kind = RegressorKind::kKnn;
  std::optional<std::size_t> k;  // knn window; default ceil(n_w^{4/(4+m)})
  std::size_t degree = 1;        // polynomial total degree
  double ridge = 1e-10;          // polynomial normal-equation damping
  SurfaceFn oracle_mu0;          // oracle surfaces
  SurfaceFn oracle_mu1;
};

class OutcomeSurface {
 public:
  virtual ~OutcomeSurface() = default;
  virtual double predict(std::span<const double> x) const = 0;
};

namespace detail {

class KnnSurface final : public OutcomeSurface {
 public:
  KnnSurface(std::size_t dim, std::vector<double> coords, std::vector<double> y, std::size_t k)
      : dim_(dim), coords_(std::move(coords)), y_(std::move(y)), k_(k) {
    std::vector<std::size_t> ids(y_.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    if (dim_ == 1) {
      order_ = ids;
      std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        return coords_[a] < coords_[b] || (coords_[a] == coords_[b] && a < b);
      });
      sorted_x_.reserve(order_.size());
      for (std::size_t i : order_) sorted_x_.push_back(coords_[i]);
    } else if (dim_ <= kKdTreeMaxDim) {
      tree_.emplace(coords_, dim_, ids);
    } else {
      ids_ = std::move(ids);
    }
  }

  double predict(std::span<const double> x) const override {
    if (dim_ == 1) return predict_1d(x[0]);
    const auto found = tree_ ? tree_->knn(x, k_) : brute_force_knn(coords_, dim_, ids_, x, k_);
    double s = 0.0;
    for (const auto& nb : found) s += y_[nb.index];
    return s / static_cast<double>(found.size());
  }

 private:
  // Sorted-order scan: the k nearest points on a line occupy a contiguous
  // window up to ties at the boundary distance, which are resolved by index.
  double predict_1d(double q) const {
    const std::size_t n = sorted_x_.size();
    const std::size_t k = std::min(k_, n);
    auto dist = [&](std::size_t pos) {
      const double t = sorted_x_[pos] - q;
      return t * t;
    };
    std::size_t hi = static_cast<std::size_t>(std::lower_bound(sorted_x_.begin(), sorted_x_.end(), q) - sorted_x_.begin());
    std::size_t lo = hi;  // window [lo, hi)
    double kth = 0.0;
    for (std::size_t taken = 0; taken < k; ++taken) {
      const bool take_left = hi == n || (lo > 0 && dist(lo - 1) <= dist(hi));
      kth = take_left ? dist(--lo) : dist(hi++);
    }
    while (lo > 0 && dist(lo - 1) <= kth) --lo;
    while (hi < n && dist(hi) <= kth) ++hi;
    double s = 0.0;
    std::size_t strict = 0;
    std::vector<std::size_t> ties;
    for (std::size_t pos = lo; pos < hi; ++pos) {
      if (dist(pos) < kth) {
        s += y_[order_[pos]];
        ++strict;
      } else {
        ties.push_back(order_[pos]);
      }
    }
    std::sort(ties.begin(), ties.end());
    for (std::size_t t = 0; strict + t < k; ++t) s += y_[ties[t]];
    return s / static_cast<double>(k);
  }

  std::size_t dim_;
  std::vector<double> coords_;
  std::vector<double> y_;
  std::size_t k_;
  std::optional<KdTree> tree_;
  std::vector<std::size_t> ids_;
  std::vector<std::size_t> order_;
  std::vector<double> sorted_x_;
};

/// Exponent vectors of all monomials of total degree <= degree, graded order.
inline std::vector<std::vector<unsigned>> monomial_exponents(std::size_t dim, std::size_t degree) {
  std::vector<std::vector<unsigned>> out;
  std::vector<unsigned> e(dim, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t remaining) {
    if (pos == dim - 1) {
      e[pos] = static_cast<unsigned>(remaining);
      out.push_back(e);
      return;
    }
    for (std::size_t v = remaining + 1; v-- > 0;) {
      e[pos] = static_cast<unsigned>(v);
      rec(pos + 1, remaining - v);
    }
  };
  for (std::size_t total = 0; total <= degree; ++total) rec(0, total);
  return out;
}

class PolynomialSurface final : public OutcomeSurface {
 public:
  PolynomialSurface(std::vector<std::vector<unsigned>> exps, Eigen::VectorXd coef)
      : exps_(std::move(exps)), coef_(std::move(coef)) {}

  static double term(const std::vector<unsigned>& e, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      for (unsigned p = 0; p < e[k]; ++p) v *= x[k];
    }
    return v;
  }

  double predict(std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t j = 0; j < exps_.size(); ++j) s += coef_[static_cast<Eigen::Index>(j)] * term(exps_[j], x);
    return s;
  }

 private:
  std::vector<std::vector<unsigned>> exps_;
  Eigen::VectorXd coef_;
};

class FunctionSurface final : public OutcomeSurface {
 public:
  explicit FunctionSurface(SurfaceFn fn) : fn_(std::move(fn)) {}
  double predict(std::span<const double> x) const override { return fn_(x); }

 private:
  SurfaceFn fn_;
};

}  // namespace detail

/// Fitted outcome-regression surfaces for the control (0) and treated (1)
/// arms. Each surface is trained only on its own arm.
class RegressorPair {
 public:
  RegressorPair() = default;

  RegressorKind kind() const { return kind_; }
  /// Effective window size for knn, per arm.
  const std::array<std::size_t, 2>& knn_k() const { return k_; }
  std::size_t degree() const { return degree_; }
  double ridge() const { return ridge_; }

  double predict(int omega, std::span<const double> x) const { return surface_[omega]->predict(x); }

  /// True when x lies outside the bounding box of the arm's training covariates.
  bool extrapolates(int omega, std::span<const double> x) const {
    const auto& lo = lo_[omega];
    const auto& hi = hi_[omega];
    if (lo.empty()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k] < lo[k] || x[k] > hi[k]) return true;
    }
    return false;
  }

  /// Fits both arms. `coords_for_control` / `coords_for_treated` are row-major
  /// n x dim coordinates of every unit in the space used by that arm's surface.
  static RegressorPair fit_in_spaces(std::span<const double> coords_for_control,
                                     std::span<const double> coords_for_treated, std::size_t dim,
                                     std::span<const std::uint8_t> d, std::span<const double> y,
                                     const RegressorSettings& settings) {
    RegressorPair rp;
    rp.kind_ = settings.kind;
    rp.degree_ = settings.degree;
    rp.ridge_ = settings.ridge;
    if (settings.kind == RegressorKind::kOracle) {
      if (!settings.oracle_mu0 || !settings.oracle_mu1) {
        throw Error("oracle regressor requires both true surfaces");
      }
      rp.surface_[0] = std::make_shared<detail::FunctionSurface>(settings.oracle_mu0);
      rp.surface_[1] = std::make_shared<detail::FunctionSurface>(settings.oracle_mu1);
      return rp;
    }
    for (int omega = 0; omega < 2; ++omega) {
      const auto coords = omega == 0 ? coords_for_control : coords_for_treated;
      std::vector<double> arm_x, arm_y;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] != omega) continue;
        arm_x.insert(arm_x.end(), coords.begin() + static_cast<std::ptrdiff_t>(i * dim),
                     coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        arm_y.push_back(y[i]);
      }
      const std::size_t n_arm = arm_y.size();
      if (n_arm == 0) throw Error("empty treatment arm " + std::to_string(omega) + ": cannot fit regressor");
      rp.lo_[omega].assign(dim, arm_x[0]);
      rp.hi_[omega].assign(dim, arm_x[0]);
      for (std::size_t i = 0; i < n_arm; ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
          rp.lo_[omega][k] = std::min(rp.lo_[omega][k], arm_x[i * dim + k]);
          rp.hi_[omega][k] = std::max(rp.hi_[omega][k], arm_x[i * dim + k]);
        }
      }
      if (settings.kind == RegressorKind::kKnn) {
        const std::size_t k = settings.k.value_or(default_knn_k(n_arm, dim));
        if (k == 0) throw Error("knn window must be positive");
        if (n_arm < std::max<std::size_t>(2, k)) {
          throw Error("insufficient units in arm " + std::to_string(omega) + " for knn with k=" +
                      std::to_string(k) + " (have " + std::to_string(n_arm) + ")");
        }
        rp.k_[omega] = k;
        rp.surface_[omega] = std::make_shared<detail::KnnSurface>(dim, std::move(arm_x), std::move(arm_y), k);
      } else {
        auto exps = detail::monomial_exponents(dim, settings.degree);
        const auto p = static_cast<Eigen::Index>(exps.size());
        if (n_arm < exps.size()) {
          throw Error("insufficient units for degree " + std::to_string(settings.degree) + " in arm " +
                      std::to_string(omega) + ": need " + std::to_string(exps.size()) + ", have " +
                      std::to_string(n_arm));
        }
        Eigen::MatrixXd design(static_cast<Eigen::Index>(n_arm), p);
        Eigen::VectorXd target(static_cast<Eigen::Index>(n_arm));
        for (std::size_t i = 0; i < n_arm; ++i) {
          const std::span<const double> xi(arm_x.data() + i * dim, dim);
          for (Eigen::Index j = 0; j < p; ++j) {
            design(static_cast<Eigen::Index>(i), j) = detail::PolynomialSurface::term(exps[static_cast<std::size_t>(j)], xi);
          }
          target[static_cast<Eigen::Index>(i)] = arm_y[i];
        }
        Eigen::MatrixXd normal = design.transpose() * design;
        normal.diagonal().array() += settings.ridge;
        Eigen::VectorXd coef = normal.ldlt().solve(design.transpose() * target);
        rp.surface_[omega] = std::make_shared<detail::PolynomialSurface>(std::move(exps), std::move(coef));
      }
    }
    return rp;
  }

  static std::size_t default_knn_k(std::size_t n_arm, std::size_t dim) {
    const double k = std::ceil(std::pow(static_cast<double>(n_arm), 4.0 / (4.0 + static_cast<double>(dim))));
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, std::max<std::size_t>(1, n_arm));
  }

 private:
  RegressorKind kind_ = RegressorKind::kOracle;
  std::array<std::shared_ptr<const OutcomeSurface>, 2> surface_;
  std::array<std::vector<double>, 2> lo_, hi_;
  std::array<std::size_t, 2> k_{0, 0};
  std::size_t degree_ = 0;
  double ridge_ = 0.0;
};

inline RegressorPair fit(const Dataset& ds, const RegressorSettings& settings) {
  return RegressorPair::fit_in_spaces(ds.x(), ds.x(), ds.m(), ds.d(), ds.y(), settings);
}

inline RegressorPair oracle_pair(SurfaceFn mu0, SurfaceFn mu1) {
  RegressorSettings s;
  s.kind = RegressorKind::kOracle;
  s.oracle_mu0 = std::move(mu0);
  s.oracle_mu1 = std::move(mu1);
  return RegressorPair::fit_in_spaces({}, {}, 0, {}, {}, s);
}

inline double predict(const RegressorPair& rp, int omega, std::span<const double> x) {
  return rp.predict(omega, x);
}

}  // namespace ate

#endif  // ATE_REGRESS_HPP
