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

#include <random>
#include <sstream>

#include "ate/data.hpp"
#include "oracles.hpp"

namespace {

ate::Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return ate::parse_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ate::Error& e) {
    return e.what();
  }
  return "";
}

TEST(Csv, FourRowsOneCovariate) {
  const auto ds = parse("x1,d,y\n0.1,1,1\n0.2,0,0\n0.4,1,2\n0.9,0,1\n");
  EXPECT_EQ(ds.n(), 4u);
  EXPECT_EQ(ds.m(), 1u);
  EXPECT_DOUBLE_EQ(ds.x(2, 0), 0.4);
  EXPECT_EQ(ds.d()[3], 0);
}

TEST(Csv, ColumnOrderIsImmaterial) {
  const auto a = parse("x1,x2,d,y\n1,2,0,3\n4,5,1,6\n");
  const auto b = parse("y,d,x2,x1\n3,0,2,1\n6,1,5,4\n");
  EXPECT_EQ(a.x(), b.x());
  EXPECT_EQ(a.d(), b.d());
  EXPECT_EQ(a.y(), b.y());
}

TEST(Csv, HundredRowsTwoCovariates) {
  std::ostringstream text;
  text << "x1,x2,d,y\n";
  for (int i = 0; i < 100; ++i) text << i * 0.01 << ',' << 1 - i * 0.01 << ',' << i % 2 << ',' << i << '\n';
  const auto ds = parse(text.str());
  EXPECT_EQ(ds.n(), 100u);
  EXPECT_EQ(ds.m(), 2u);
}

TEST(Csv, NonBinaryTreatmentNamesRow) {
  EXPECT_NE(error_of("x1,d,y\n0.1,1,1\n0.2,2,0\n").find("non-binary treatment at row 2"), std::string::npos);
}

TEST(Csv, DistinctDiagnostics) {
  EXPECT_NE(error_of("x1,y\n1,2\n").find("missing column 'd'"), std::string::npos);
  EXPECT_NE(error_of("x1,d,y\n1,0,nan\n").find("non-finite value at row 1, column 'y'"), std::string::npos);
  EXPECT_NE(error_of("x1,d,y\n1,0,2\n3,inf,2\n").find("row 2"), std::string::npos);
  EXPECT_NE(error_of("").find("empty file"), std::string::npos);
  EXPECT_NE(error_of("x1,d,y\n").find("no data rows"), std::string::npos);
  EXPECT_NE(error_of("x1,d,y\n1,0\n").find("row 1 has 2 fields"), std::string::npos);
  EXPECT_NE(error_of("x1,d,y\n1,0,abc\n").find("invalid number 'abc' at row 1, column 'y'"), std::string::npos);
  EXPECT_NE(error_of("x1,x3,d,y\n1,2,0,1\n").find("missing column 'x2'"), std::string::npos);
}

TEST(Csv, RoundTripIsExactAtSeventeenDigits) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto ds = oracle::random_dataset(rng, 30, 1 + rep % 3);
    std::ostringstream out;
    ate::write_csv(out, ds);
    const auto back = parse(out.str());
    EXPECT_EQ(back.x(), ds.x());
    EXPECT_EQ(back.d(), ds.d());
    EXPECT_EQ(back.y(), ds.y());
  }
}

TEST(Dataset, ConstructorValidates) {
  EXPECT_THROW(ate::Dataset(1, {0.0}, {2}, {0.0}), ate::Error);
  EXPECT_THROW(ate::Dataset(1, {}, {}, {}), ate::Error);
  EXPECT_THROW(ate::Dataset(1, {std::nan("")}, {0}, {0.0}), ate::Error);
}

TEST(Split, Partitions) {
  const ate::Dataset a(1, {0, 0, 0, 0}, {1, 0, 1, 0}, {0, 0, 0, 0});
  const auto s = ate::split(a);
  EXPECT_EQ(s.treated_idx, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(s.control_idx, (std::vector<std::size_t>{1, 3}));

  const ate::Dataset b(1, {0, 0, 0}, {1, 1, 1}, {0, 0, 0});
  EXPECT_TRUE(ate::split(b).control_idx.empty());

  const ate::Dataset c(1, {0, 0, 0, 0, 0}, {0, 1, 1, 1, 0}, {0, 0, 0, 0, 0});
  const auto sc = ate::split(c);
  EXPECT_EQ(sc.treated_idx, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(sc.control_idx, (std::vector<std::size_t>{0, 4}));
  EXPECT_EQ(sc.treated_idx.size(), c.n1());
}

}  // namespace
