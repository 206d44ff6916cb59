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

#include <cmath>

#include "ate/simlab.hpp"

namespace {

TEST(Dgp, AnalyticMoments) {
  const auto lin = ate::builtin_dgp("linear-1d");
  EXPECT_NEAR(lin.tau_numeric(), 1.5, 1e-12);
  EXPECT_NEAR(lin.contrast_variance(), 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(lin.sigma2(), 1.0 / 12.0 + 1.25 * std::log(7.0 / 3.0), 1e-10);
  EXPECT_NEAR(lin.variance_floor(), 0.25 + 1.0 / 12.0, 1e-12);

  const auto quad = ate::builtin_dgp("quadratic-2d");
  EXPECT_NEAR(quad.tau(), 13.0 / 12.0, 1e-12);
  // contrast c = 1 + x2^2 + x1 x2 - x2; E c^2 from moments of U[0,1].
  const double ec2 = 1.0 + 1.0 / 5 + 1.0 / 9 + 1.0 / 3 + 2.0 * (1.0 / 3 + 1.0 / 4 - 1.0 / 2) +
                     2.0 * (1.0 / 8 - 1.0 / 4) - 2.0 * (1.0 / 6);
  EXPECT_NEAR(quad.contrast_variance(), ec2 - (13.0 / 12.0) * (13.0 / 12.0), 1e-12);

  const auto hom = ate::builtin_dgp("homogeneous");
  EXPECT_NEAR(hom.sigma2(), 4.0, 1e-12);
  EXPECT_NEAR(hom.variance_floor(), 1.0, 1e-12);
  EXPECT_THROW(ate::builtin_dgp("nope"), ate::Error);
}

TEST(Generate, Deterministic) {
  const auto g = ate::builtin_dgp("quadratic-2d");
  const auto a = ate::generate(g, 300, 5, 2);
  const auto b = ate::generate(g, 300, 5, 2);
  EXPECT_EQ(a.x(), b.x());
  EXPECT_EQ(a.d(), b.d());
  EXPECT_EQ(a.y(), b.y());
  EXPECT_NE(ate::generate(g, 300, 5, 3).y(), a.y());
  // A prefix of a larger draw is the smaller draw.
  const auto c = ate::generate(g, 500, 5, 2);
  EXPECT_EQ(std::vector<double>(c.y().begin(), c.y().begin() + 300), a.y());
}

TEST(Generate, BalancedArms) {
  const auto g = ate::builtin_dgp("homogeneous");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ds = ate::generate(g, 10000, seed);
    EXPECT_LE(std::abs(static_cast<double>(ds.n1()) / 1e4 - 0.5), 0.02);
  }
}

TEST(Generate, NoiselessUnitEffect) {
  const auto g = ate::builtin_dgp("noiseless-homogeneous");
  const auto ds = ate::generate(g, 200, 1);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    EXPECT_EQ(ds.y()[i], static_cast<double>(ds.d()[i]));
    EXPECT_EQ(g.mu1(ds.row(i)) - g.mu0(ds.row(i)), 1.0);
  }
}

TEST(Experiments, DegenerateDgp) {
  const auto g = ate::builtin_dgp("noiseless-homogeneous");
  try {
    ate::mc_kolmogorov(g, 200, 3, 100, 1);
    FAIL();
  } catch (const ate::Error& e) {
    EXPECT_NE(std::string(e.what()).find("limiting variance"), std::string::npos);
  }
  const auto v = ate::mc_variance(g, 200, 3, 50, 1);
  EXPECT_EQ(v.values.at("n_var_en"), 0.0);

  ate::RegressorSettings oracle;
  oracle.kind = ate::RegressorKind::kOracle;
  const auto c = ate::mc_coverage(g, 200, 3, 400, 0.05, 200, 1, oracle);
  EXPECT_EQ(c.values.at("coverage"), 1.0);
  EXPECT_EQ(c.values.at("mean_width"), 0.0);
}

TEST(Experiments, RadiusTailBranches) {
  const auto g = ate::builtin_dgp("homogeneous");
  for (std::size_t M : {2u, 10u}) {
    const auto r = ate::mc_radius_tail(g, 500, M, 20, {}, 4);
    EXPECT_EQ(r.grid.at("divisor"), M == 2 ? 8.0 : 20.0);
    EXPECT_EQ(r.values.at("violations"), 0.0);
    EXPECT_DOUBLE_EQ(r.series.at("envelope").front(), std::exp(2.0));
    EXPECT_EQ(r.series.at("survival").front(), 1.0);
    EXPECT_EQ(r.series.at("r_grid").size(), 20u);
  }
}

TEST(Experiments, DensityRatioConservation) {
  // Sum of control K counts is M n1, so the control mean of the ratio is 1.
  const auto r = ate::density_ratio_check(ate::builtin_dgp("linear-1d"), 600, 5, 2);
  EXPECT_NEAR(r.values.at("mean_ratio"), 1.0, 1e-12);
}

TEST(Experiments, MinimumReplications) {
  const auto g = ate::builtin_dgp("linear-1d");
  EXPECT_THROW(ate::mc_kolmogorov(g, 100, 2, 50, 1), ate::Error);
  EXPECT_THROW(ate::mc_coverage(g, 100, 2, 400, 0.05, 50, 1), ate::Error);
  EXPECT_EQ(ate::rule_matches(4000, 0.25), 8u);
  EXPECT_EQ(ate::rule_matches(2000, 0.3), 10u);
  EXPECT_EQ(ate::rule_matches(4000, 1.0 / 3.0), 16u);
  EXPECT_EQ(ate::rule_matches(1000, 1.0 / 3.0), 10u);
}

}  // namespace
