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
#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "ate/matching.hpp"
#include "oracles.hpp"

namespace {

using ate::Dataset;

const Dataset kToy(1, {0.1, 0.2, 0.4, 0.9}, {1, 0, 1, 0}, {1, 0, 2, 1});

std::vector<std::size_t> row(const ate::MatchResult& mr, std::size_t i) {
  const auto s = mr.neighbors(i);
  return {s.begin(), s.end()};
}

TEST(Match, ToyExample) {
  const auto mr = ate::match_mnn(kToy, 1);
  EXPECT_EQ(row(mr, 0), std::vector<std::size_t>{1});
  EXPECT_EQ(row(mr, 1), std::vector<std::size_t>{0});
  EXPECT_EQ(row(mr, 2), std::vector<std::size_t>{1});
  EXPECT_EQ(row(mr, 3), std::vector<std::size_t>{2});
  EXPECT_EQ(mr.k_count, (std::vector<std::size_t>{1, 2, 1, 0}));
}

TEST(Match, TwoUnits) {
  const Dataset ds(1, {0.0, 1.0}, {0, 1}, {0, 0});
  const auto mr = ate::match_mnn(ds, 1);
  EXPECT_EQ(row(mr, 0), std::vector<std::size_t>{1});
  EXPECT_EQ(row(mr, 1), std::vector<std::size_t>{0});
  EXPECT_EQ(mr.k_count, (std::vector<std::size_t>{1, 1}));
}

TEST(Match, TiedTreatedUnitsShareControlSet) {
  const Dataset ds(1, {0.0, 0.5, 0.5, 1.0}, {0, 1, 1, 0}, {0, 0, 0, 0});
  const auto mr = ate::match_mnn(ds, 2);
  EXPECT_EQ(row(mr, 1), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(row(mr, 2), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(mr.k_count[0] + mr.k_count[3], 4u);
}

TEST(Match, Errors) {
  EXPECT_THROW(ate::match_mnn(kToy, 3), ate::Error);
  EXPECT_THROW(ate::match_mnn(kToy, 0), ate::Error);
  const Dataset one_arm(1, {0.0, 1.0}, {1, 1}, {0, 0});
  try {
    ate::match_mnn(one_arm, 1);
    FAIL();
  } catch (const ate::Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient opposite-group units"), std::string::npos);
  }
}

TEST(Match, InvariantsAndBruteForceEquivalence) {
  std::mt19937_64 rng(11);
  for (std::size_t m = 1; m <= 3; ++m) {
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 6 + rng() % 45;
      const std::size_t M = 1 + rng() % 3;
      const auto ds = oracle::random_dataset(rng, n, m, M, rep % 4 == 0);
      const auto ref = oracle::match(ds, M);
      for (auto engine : {ate::MatchEngine::kKdTree, ate::MatchEngine::kExhaustive}) {
        const auto mr = ate::match_mnn(ds, M, engine);
        std::size_t sum1 = 0, sum0 = 0;
        for (std::size_t i = 0; i < n; ++i) {
          ASSERT_EQ(row(mr, i), ref.nn[i]) << "m=" << m << " rep=" << rep << " unit " << i;
          const auto dist = mr.distances(i);
          EXPECT_TRUE(std::is_sorted(dist.begin(), dist.end()));
          EXPECT_EQ(mr.radius[i], dist[M - 1]);
          for (std::size_t j : mr.neighbors(i)) EXPECT_NE(ds.d()[j], ds.d()[i]);
          (ds.treated(i) ? sum1 : sum0) += mr.k_count[i];
        }
        EXPECT_EQ(mr.k_count, ref.k);
        EXPECT_EQ(sum1, M * ds.n0());
        EXPECT_EQ(sum0, M * ds.n1());
      }
    }
  }
}

TEST(Match, DuplicatePermutationKeepsCountMultiset) {
  // Shuffle rows only within groups of identical (coordinates, arm). The
  // covariate/arm layout is unchanged, so the counts must be too.
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto ds = oracle::random_dataset(rng, 40, 1, 3, true);
    std::map<std::pair<std::vector<double>, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      groups[{std::vector<double>(ds.row(i).begin(), ds.row(i).end()), ds.d()[i]}].push_back(i);
    }
    std::vector<std::size_t> perm(ds.n());
    for (auto& [key, members] : groups) {
      auto shuffled = members;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (std::size_t g = 0; g < members.size(); ++g) perm[members[g]] = shuffled[g];
    }
    std::vector<double> x, y;
    std::vector<std::uint8_t> d;
    for (std::size_t p : perm) {
      x.insert(x.end(), ds.row(p).begin(), ds.row(p).end());
      d.push_back(ds.d()[p]);
      y.push_back(ds.y()[p]);
    }
    const Dataset shuffled(ds.m(), x, d, y);
    auto a = ate::match_mnn(ds, 2);
    auto b = ate::match_mnn(shuffled, 2);
    EXPECT_EQ(a.nn_dist, b.nn_dist);
    // Undo the permutation: unit perm[i] of the original sits at row i.
    std::vector<std::size_t> undone(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) undone[perm[i]] = b.k_count[i];
    std::sort(undone.begin(), undone.end());
    std::sort(a.k_count.begin(), a.k_count.end());
    EXPECT_EQ(a.k_count, undone);
  }
}

TEST(Radius, ToyAndBoundaries) {
  const auto mr = ate::match_mnn(kToy, 1);
  EXPECT_NEAR(ate::stabilization_radius(mr)[0], 0.1, 1e-15);

  const Dataset dup(1, {0.3, 0.3, 0.8}, {1, 0, 0}, {0, 0, 0});
  EXPECT_EQ(ate::stabilization_radius(ate::match_mnn(dup, 1))[0], 0.0);

  // M equal to the opposite-arm size: the farthest opposite-label distance.
  const auto full = ate::match_mnn(kToy, 2);
  EXPECT_NEAR(ate::stabilization_radius(full)[0], 0.8, 1e-15);
}

TEST(Radius, MonotoneUnderAddedOppositePoint) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto ds = oracle::random_dataset(rng, 30, 2, 3);
    const auto before = ate::stabilization_radius(ate::match_mnn(ds, 3));
    auto x = ds.x();
    auto d = ds.d();
    auto y = ds.y();
    x.push_back(u(rng));
    x.push_back(u(rng));
    d.push_back(rep % 2);
    y.push_back(0.0);
    const auto after = ate::stabilization_radius(ate::match_mnn(Dataset(2, x, d, y), 3));
    for (std::size_t i = 0; i < ds.n(); ++i) EXPECT_LE(after[i], before[i]);
  }
}

TEST(RadiusTail, Boundaries) {
  const std::vector<double> grid = {0.0, 5.0};
  const auto s = ate::empirical_radius_tail(kToy, 1, grid);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_EQ(s[1], 0.0);
}

}  // namespace
