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
#include <cmath>
#include <random>

#include "ate/regress.hpp"
#include "oracles.hpp"

namespace {

using ate::Dataset;
using ate::RegressorKind;
using ate::RegressorSettings;

double arm_mean(const Dataset& ds, int omega) {
  double s = 0.0;
  int c = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.d()[i] == omega) {
      s += ds.y()[i];
      ++c;
    }
  }
  return s / c;
}

TEST(Oracle, ConstantContrastEverywhere) {
  const auto rp = ate::oracle_pair([](std::span<const double> x) { return std::sin(x[0]); },
                                   [](std::span<const double> x) { return std::sin(x[0]) + 2.5; });
  for (double v : {-3.0, 0.0, 0.7, 12.0}) {
    const double x[1] = {v};
    EXPECT_EQ(rp.predict(1, x) - rp.predict(0, x), 2.5);
  }
  const auto sq = ate::oracle_pair([](std::span<const double> x) { return x[0] * x[0]; },
                                   [](std::span<const double>) { return 0.0; });
  const double three[1] = {3.0};
  EXPECT_EQ(ate::predict(sq, 0, three), 9.0);
}

TEST(Knn, FullWindowIsArmMean) {
  std::mt19937_64 rng(1);
  for (std::size_t m : {1u, 2u}) {
    const auto ds = oracle::random_dataset(rng, 40, m, 5);
    RegressorSettings s;
    s.k = std::min(ds.n0(), ds.n1());
    const auto rp = ate::fit(ds, s);
    const int small = ds.n0() <= ds.n1() ? 0 : 1;
    const std::vector<double> q(m, 0.37);
    EXPECT_NEAR(rp.predict(small, q), arm_mean(ds, small), 1e-12);
  }
  const Dataset ds(1, {0, 1, 2, 3, 4, 5}, {0, 1, 0, 1, 0, 1}, {1, 2, 3, 4, 5, 6});
  RegressorSettings s;
  s.k = 3;
  const auto rp = ate::fit(ds, s);
  const double q[1] = {100.0};
  EXPECT_DOUBLE_EQ(rp.predict(0, q), 3.0);
  EXPECT_DOUBLE_EQ(rp.predict(1, q), 4.0);
  EXPECT_TRUE(rp.extrapolates(0, q));
}

TEST(Knn, OneNeighbourInterpolates) {
  std::mt19937_64 rng(2);
  for (std::size_t m : {1u, 2u, 3u, 10u}) {
    const auto ds = oracle::random_dataset(rng, 50, m, 3);
    RegressorSettings s;
    s.k = 1;
    const auto rp = ate::fit(ds, s);
    for (std::size_t i = 0; i < ds.n(); ++i) EXPECT_EQ(rp.predict(ds.d()[i], ds.row(i)), ds.y()[i]);
  }
}

TEST(Knn, MatchesBruteForceMean) {
  // The 1-D sorted scan, the k-d tree and brute force agree, ties included.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (std::size_t m : {1u, 2u, 9u}) {
    for (int rep = 0; rep < 30; ++rep) {
      const auto ds = oracle::random_dataset(rng, 60, m, 8, rep % 2 == 0);
      RegressorSettings s;
      s.k = 1 + rng() % 7;
      const auto rp = ate::fit(ds, s);
      for (int q = 0; q < 20; ++q) {
        std::vector<double> x(m);
        for (auto& v : x) v = rep % 2 == 0 ? std::round(u(rng) * 5.0) / 5.0 : u(rng);
        for (int omega = 0; omega < 2; ++omega) {
          std::vector<std::pair<double, std::size_t>> cand;
          for (std::size_t i = 0; i < ds.n(); ++i) {
            if (ds.d()[i] != omega) continue;
            double acc = 0.0;
            for (std::size_t c = 0; c < m; ++c) acc += (ds.x(i, c) - x[c]) * (ds.x(i, c) - x[c]);
            cand.emplace_back(acc, i);
          }
          std::sort(cand.begin(), cand.end());
          double mean = 0.0;
          for (std::size_t r = 0; r < *s.k; ++r) mean += ds.y()[cand[r].second];
          mean /= static_cast<double>(*s.k);
          EXPECT_NEAR(rp.predict(omega, x), mean, 1e-12);
        }
      }
    }
  }
}

TEST(Knn, DefaultWindow) {
  EXPECT_EQ(ate::RegressorPair::default_knn_k(1000, 1), static_cast<std::size_t>(std::ceil(std::pow(1000.0, 0.8))));
  EXPECT_EQ(ate::RegressorPair::default_knn_k(1, 3), 1u);
}

TEST(Polynomial, NoiselessLinearContrast) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x, y;
  std::vector<std::uint8_t> d;
  for (int i = 0; i < 60; ++i) {
    x.push_back(u(rng));
    d.push_back(i % 3 == 0);
    y.push_back(2.0 * x.back() + d.back());
  }
  const Dataset ds(1, x, d, y);
  RegressorSettings s;
  s.kind = RegressorKind::kPolynomial;
  s.degree = 1;
  const auto rp = ate::fit(ds, s);
  for (double v : {0.0, 0.3, 0.99}) {
    const double q[1] = {v};
    EXPECT_NEAR(rp.predict(1, q) - rp.predict(0, q), 1.0, 1e-9);
  }
}

TEST(Polynomial, DegreeZeroIsArmMean) {
  std::mt19937_64 rng(6);
  const auto ds = oracle::random_dataset(rng, 40, 2, 3);
  RegressorSettings s;
  s.kind = RegressorKind::kPolynomial;
  s.degree = 0;
  const auto rp = ate::fit(ds, s);
  const double q[2] = {5.0, -2.0};
  EXPECT_NEAR(rp.predict(0, q), arm_mean(ds, 0), 1e-9);
  EXPECT_NEAR(rp.predict(1, q), arm_mean(ds, 1), 1e-9);
}

TEST(Polynomial, QuadraticSurfaceTwoDims) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x, y;
  std::vector<std::uint8_t> d;
  for (int i = 0; i < 80; ++i) {
    const double a = u(rng), b = u(rng);
    x.push_back(a);
    x.push_back(b);
    d.push_back(i % 2);
    y.push_back(1.0 + a * a - 0.5 * a * b + 3.0 * b + d.back() * (b * b));
  }
  RegressorSettings s;
  s.kind = RegressorKind::kPolynomial;
  s.degree = 2;
  const auto rp = ate::fit(Dataset(2, x, d, y), s);
  const double q[2] = {0.25, 0.75};
  EXPECT_NEAR(rp.predict(1, q) - rp.predict(0, q), 0.75 * 0.75, 1e-7);
}

TEST(Fit, Errors) {
  const Dataset ds(1, {0, 1, 2, 3}, {0, 1, 0, 1}, {1, 2, 3, 4});
  RegressorSettings s;
  s.kind = RegressorKind::kPolynomial;
  s.degree = 3;
  try {
    ate::fit(ds, s);
    FAIL();
  } catch (const ate::Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient units for degree"), std::string::npos);
  }
  RegressorSettings k;
  k.k = 3;
  EXPECT_THROW(ate::fit(ds, k), ate::Error);
  const Dataset one_arm(1, {0, 1}, {1, 1}, {0, 0});
  EXPECT_THROW(ate::fit(one_arm, RegressorSettings{}), ate::Error);
}

TEST(Fit, ArmIsolation) {
  std::mt19937_64 rng(12);
  const auto ds = oracle::random_dataset(rng, 60, 2, 10);
  RegressorSettings s;
  s.k = 4;
  const auto rp = ate::fit(ds, s);
  auto y = ds.y();
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!ds.treated(i)) y[i] += 100.0;
  }
  const auto rp2 = ate::fit(ds.with_outcomes(y), s);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    EXPECT_EQ(rp.predict(1, ds.row(i)), rp2.predict(1, ds.row(i)));
    EXPECT_NE(rp.predict(0, ds.row(i)), rp2.predict(0, ds.row(i)));
  }
}

}  // namespace
