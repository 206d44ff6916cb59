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
#ifndef ATE_MATCHING_HPP
#define ATE_MATCHING_HPP

#include <cassert>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ate/common.hpp"
#include "ate/data.hpp"
#include "ate/kdtree.hpp"

namespace ate {

enum class MatchEngine {
  kAutomatic,  // k-d tree for dimension <= 8, exhaustive scan above
  kKdTree,
  kExhaustive,
};

inline constexpr std::size_t kKdTreeMaxDim = 8;

/// M-nearest-neighbor matches of every unit within the opposite treatment
/// group, with matched counts and stabilization radii.
struct MatchResult {
  std::size_t M = 0;
  std::size_t n = 0;
  std::vector<std::size_t> nn_idx;   // n x M, row i sorted by (distance, index)
  std::vector<double> nn_dist;       // n x M, non-decreasing per row
  std::vector<std::size_t> k_count;  // times unit i appears in opposite-group match sets
  std::vector<double> radius;        // M-th match distance

  std::span<const std::size_t> neighbors(std::size_t i) const { return {nn_idx.data() + i * M, M}; }
  std::span<const double> distances(std::size_t i) const { return {nn_dist.data() + i * M, M}; }
};

/// Matches in a possibly arm-specific coordinate space. A treated unit i is
/// matched in `space_for_treated` (rows are coordinates of every unit under the
/// control-side transform) against control units, and symmetrically for
/// control units. Both spaces are row-major n x dim.
inline MatchResult match_in_spaces(std::span<const double> space_for_treated,
                                   std::span<const double> space_for_control, std::size_t dim,
                                   std::span<const std::uint8_t> d, std::size_t M,
                                   MatchEngine engine = MatchEngine::kAutomatic) {
  const std::size_t n = d.size();
  if (M == 0) throw Error("number of matches must be a positive integer");
  if (space_for_treated.size() != n * dim || space_for_control.size() != n * dim) {
    throw Error("coordinate space size does not match n x dim");
  }
  std::vector<std::size_t> treated_ids, control_ids;
  for (std::size_t i = 0; i < n; ++i) (d[i] ? treated_ids : control_ids).push_back(i);
  if (treated_ids.empty() || control_ids.empty() || M > std::min(treated_ids.size(), control_ids.size())) {
    throw Error("insufficient opposite-group units: M=" + std::to_string(M) +
                " but n0=" + std::to_string(control_ids.size()) +
                ", n1=" + std::to_string(treated_ids.size()));
  }

  const bool use_tree = engine == MatchEngine::kKdTree ||
                        (engine == MatchEngine::kAutomatic && dim <= kKdTreeMaxDim);
  std::optional<KdTree> control_tree, treated_tree;
  if (use_tree) {
    control_tree.emplace(space_for_treated, dim, control_ids);
    treated_tree.emplace(space_for_control, dim, treated_ids);
  }

  MatchResult mr;
  mr.M = M;
  mr.n = n;
  mr.nn_idx.resize(n * M);
  mr.nn_dist.resize(n * M);
  mr.radius.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const bool t = d[i] == 1;
    const auto& space = t ? space_for_treated : space_for_control;
    const auto query = space.subspan(i * dim, dim);
    const std::vector<Neighbor> found =
        use_tree ? (t ? *control_tree : *treated_tree).knn(query, M)
                 : brute_force_knn(space, dim, t ? control_ids : treated_ids, query, M);
    for (std::size_t r = 0; r < M; ++r) {
      assert(found[r].index != i && d[found[r].index] != d[i]);
      mr.nn_idx[i * M + r] = found[r].index;
      mr.nn_dist[i * M + r] = std::sqrt(found[r].dist2);
    }
    mr.radius[i] = mr.nn_dist[i * M + M - 1];
  });

  mr.k_count.assign(n, 0);
  for (std::size_t j : mr.nn_idx) ++mr.k_count[j];
  return mr;
}

/// Euclidean M-NN matching on the dataset's covariates.
inline MatchResult match_mnn(const Dataset& ds, std::size_t M,
                             MatchEngine engine = MatchEngine::kAutomatic) {
  return match_in_spaces(ds.x(), ds.x(), ds.m(), ds.d(), M, engine);
}

/// Radius of stabilization per unit: the largest distance in its match set.
inline std::vector<double> stabilization_radius(const MatchResult& mr) {
  std::vector<double> r(mr.n);
  for (std::size_t i = 0; i < mr.n; ++i) {
    const auto dist = mr.distances(i);
    r[i] = *std::max_element(dist.begin(), dist.end());
  }
  return r;
}

/// Fraction of units whose radius is >= r, for each r in the grid.
inline std::vector<double> radius_survival(std::span<const double> radii, std::span<const double> r_grid) {
  std::vector<double> out;
  out.reserve(r_grid.size());
  for (double r : r_grid) {
    std::size_t count = 0;
    for (double v : radii) count += v >= r ? 1 : 0;
    out.push_back(radii.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(radii.size()));
  }
  return out;
}

inline std::vector<double> empirical_radius_tail(const Dataset& ds, std::size_t M,
                                                 std::span<const double> r_grid) {
  const MatchResult mr = match_mnn(ds, M);
  return radius_survival(stabilization_radius(mr), r_grid);
}

}  // namespace ate

#endif  // ATE_MATCHING_HPP
