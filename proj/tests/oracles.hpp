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
// Independent reference implementations used only by the tests. They follow
// the textbook definitions directly (full sorts, explicit imputation) and do
// not share code with the library beyond the Dataset container.
#ifndef ATE_TESTS_ORACLES_HPP
#define ATE_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <tuple>
#include <vector>

#include "ate/data.hpp"

namespace oracle {

struct Matches {
  std::vector<std::vector<std::size_t>> nn;
  std::vector<std::size_t> k;
};

/// Full sort of all opposite-group distances; ties by smaller index.
inline Matches match(const std::vector<double>& space_t, const std::vector<double>& space_c, std::size_t dim,
                     const std::vector<std::uint8_t>& d, std::size_t M) {
  const std::size_t n = d.size();
  Matches out;
  out.nn.resize(n);
  out.k.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = d[i] ? space_t : space_c;
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t j = 0; j < n; ++j) {
      if (d[j] == d[i]) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double t = s[i * dim + c] - s[j * dim + c];
        acc += t * t;
      }
      cand.emplace_back(acc, j);
    }
    std::sort(cand.begin(), cand.end());
    for (std::size_t r = 0; r < M; ++r) {
      out.nn[i].push_back(cand[r].second);
      ++out.k[cand[r].second];
    }
  }
  return out;
}

inline Matches match(const ate::Dataset& ds, std::size_t M) { return match(ds.x(), ds.x(), ds.m(), ds.d(), M); }

/// Raw estimator by explicit imputation of both potential outcomes.
inline double tau_imputation(const ate::Dataset& ds, std::size_t M) {
  const Matches mt = match(ds, M);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    double other = 0.0;
    for (std::size_t j : mt.nn[i]) other += ds.y()[j];
    other /= static_cast<double>(M);
    total += ds.treated(i) ? ds.y()[i] - other : other - ds.y()[i];
  }
  return total / static_cast<double>(ds.n());
}

using Surface = std::function<double(int omega, std::size_t unit_row, const std::vector<double>& space)>;

/// Bias-corrected estimator by imputation: the missing outcome of unit i is
/// the mean over matches j of Y_j + mu_w(L_{w,i}) - mu_w(L_{w,j}), where w is
/// the missing arm and L_w its coordinate space.
inline double tau_bc_imputation(const ate::Dataset& ds, const std::vector<double>& space0,
                                const std::vector<double>& space1, std::size_t dim, std::size_t M,
                                const std::function<double(int, const double*)>& mu) {
  const Matches mt = match(space0, space1, dim, ds.d(), M);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const int w = ds.treated(i) ? 0 : 1;
    const auto& sp = w == 0 ? space0 : space1;
    double imp = 0.0;
    for (std::size_t j : mt.nn[i]) imp += ds.y()[j] + mu(w, &sp[i * dim]) - mu(w, &sp[j * dim]);
    imp /= static_cast<double>(M);
    total += ds.treated(i) ? ds.y()[i] - imp : imp - ds.y()[i];
  }
  return total / static_cast<double>(ds.n());
}

/// Marginal empirical CDF by direct counting.
inline std::vector<double> ecdf_coords(const ate::Dataset& ds) {
  std::vector<double> out(ds.n() * ds.m());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t k = 0; k < ds.m(); ++k) {
      std::size_t c = 0;
      for (std::size_t j = 0; j < ds.n(); ++j) c += ds.x(j, k) <= ds.x(i, k) ? 1 : 0;
      out[i * ds.m() + k] = static_cast<double>(c) / static_cast<double>(ds.n());
    }
  }
  return out;
}

/// Random dataset with both arms holding at least min_arm units.
inline ate::Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t min_arm = 1,
                                   bool with_ties = false) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  while (true) {
    std::vector<double> x(n * m), y(n);
    std::vector<std::uint8_t> d(n);
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        const double u = unif(rng);
        x[i * m + k] = with_ties ? std::floor(u * 5.0) / 5.0 : u;
      }
      d[i] = unif(rng) < 0.5 ? 1 : 0;
      n1 += d[i];
      y[i] = x[i * m] + d[i] * 0.7 + noise(rng);
    }
    if (n1 >= min_arm && n - n1 >= min_arm) return ate::Dataset(m, std::move(x), std::move(d), std::move(y));
  }
}

}  // namespace oracle

#endif  // ATE_TESTS_ORACLES_HPP
