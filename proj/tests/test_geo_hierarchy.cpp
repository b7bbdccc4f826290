// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "disagg/error.hpp"
#include "disagg/geo_hierarchy.hpp"
#include "test_support.hpp"

using namespace disagg;

TEST_CASE("regular subdivision into quadrants") {
  auto h = regular_hierarchy(4, 4, 10.0, {4, 2});
  CHECK(h.dims() == std::vector<std::size_t>{1, 4});
  for (std::size_t u = 0; u < 4; ++u) CHECK(h.parent(0, u) == 0);
  CHECK(h.level(1).unit_area[0] == doctest::Approx(400.0));
  CHECK(h.level(0).unit_area[0] == doctest::Approx(1600.0));
}

TEST_CASE("three levels by repeated 2x subdivision") {
  auto h = regular_hierarchy(4, 4, 1.0, {4, 2, 1});
  CHECK(h.dims() == std::vector<std::size_t>{1, 4, 16});
  const Matrix direct = aggregation_matrix(h, 2, 0).dense();
  const Matrix composed = aggregation_matrix(h, 1, 0).dense() * aggregation_matrix(h, 2, 1).dense();
  CHECK(direct == composed);
  CHECK(direct == Matrix::Ones(1, 16));
}

TEST_CASE("straddling child is rejected as non-nested") {
  HierarchyDescription d;
  d.grid = {4, 4, 1.0};
  HierarchyDescription::Level top{"top", {}, 4, 2};  // left and right halves
  HierarchyDescription::Level bottom{"bottom", {}, 0, 0};
  // 2x2 block at columns 1-2 straddles the halves
  bottom.units = {{"straddle", {1, 2, 5, 6}},
                  {"a", {0, 4}},
                  {"b", {3, 7}},
                  {"c", {8, 9, 12, 13}},
                  {"d", {10, 11, 14, 15}}};
  d.levels = {top, bottom};
  try {
    build_hierarchy(d);
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("non-nested membership") != std::string::npos);
  }
}

TEST_CASE("coverage and level-count errors") {
  HierarchyDescription d;
  d.grid = {2, 2, 1.0};
  d.levels = {{"a", {{"all", {0, 1, 2, 3}}}, 0, 0}};
  CHECK_THROWS_AS(build_hierarchy(d), ConfigError);  // fewer than 2 levels

  d.levels.push_back({"b", {{"x", {0, 1}}, {"y", {2}}}, 0, 0});
  CHECK_THROWS_WITH_AS(build_hierarchy(d), doctest::Contains("uncovered"), ConfigError);

  d.levels[1].units = {{"x", {0, 1}}, {"y", {1, 2, 3}}};
  CHECK_THROWS_WITH_AS(build_hierarchy(d), doctest::Contains("doubly covered"), ConfigError);

  d.levels[1].units = {{"x", {0, 1, 2, 3}}};
  CHECK_THROWS_AS(build_hierarchy(d), ConfigError);  // unit counts must increase
}

TEST_CASE("aggregation matrix for a two-parent fixture") {
  auto h = test::two_parent_hierarchy();
  const Matrix m = aggregation_matrix(h, 1, 0).dense();
  Matrix expected(2, 4);
  expected << 1, 1, 0, 0, 0, 0, 1, 1;
  CHECK(m == expected);
  CHECK_THROWS_AS(aggregation_matrix(h, 0, 1), ConfigError);
  CHECK_THROWS_AS(aggregation_matrix(h, 1, 1), ConfigError);
}

TEST_CASE("aggregate sums children") {
  auto h = test::two_parent_hierarchy();
  const auto m = aggregation_matrix(h, 1, 0);
  const std::vector<double> x{1, 2, 3, 4};
  const Vector y = aggregate(x, m);
  CHECK(y(0) == 3.0);
  CHECK(y(1) == 7.0);
  const std::vector<double> zeros(4, 0.0);
  CHECK(aggregate(zeros, m).isZero());
  const std::vector<double> wrong(3, 1.0);
  CHECK_THROWS_AS(aggregate(wrong, m), DataError);
}

TEST_CASE("aggregate to root equals scalar sum") {
  auto h = regular_hierarchy(4, 4, 1.0, {4, 2, 1});
  const auto m = aggregation_matrix(h, 2, 0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1e6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(16);
    double total = 0.0;
    for (auto& v : x) {
      v = u(rng);
      total += v;
    }
    const Vector y = aggregate(x, m);
    CHECK(std::abs(y(0) - total) <= 1e-9 * total);
  }
}

TEST_CASE("point assignment uses half-open cells") {
  auto h = regular_hierarchy(4, 4, 10.0, {4, 2});
  auto p = assign_point(h, 1.0, 1.0);
  REQUIRE(p);
  CHECK((*p)[0] == 0);
  CHECK((*p)[1] == 0);

  // x = 20 is the boundary between cell columns 1 and 2: belongs to column 2,
  // which is in the top-right quadrant (unit 1).
  p = assign_point(h, 20.0, 0.0);
  REQUIRE(p);
  CHECK((*p)[1] == 1);
  p = assign_point(h, 19.999, 0.0);
  REQUIRE(p);
  CHECK((*p)[1] == 0);

  CHECK_FALSE(assign_point(h, 40.0, 5.0));
  CHECK_FALSE(assign_point(h, -0.001, 5.0));
  CHECK_FALSE(assign_point(h, 5.0, 1e9));
}

TEST_CASE("property: aggregation matrices compose and columns sum to one") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto h = test::random_hierarchy(rng, 3, 64);
    for (std::size_t fine = 1; fine < h.level_count(); ++fine) {
      for (std::size_t coarse = 0; coarse < fine; ++coarse) {
        const Matrix m = aggregation_matrix(h, fine, coarse).dense();
        CHECK(m.colwise().sum() == Matrix::Ones(1, m.cols()));
        for (std::size_t mid = coarse + 1; mid < fine; ++mid) {
          const Matrix composed =
              aggregation_matrix(h, mid, coarse).dense() * aggregation_matrix(h, fine, mid).dense();
          CHECK(composed == m);
        }
      }
    }
  }
}

TEST_CASE("property: counting points per fine unit then aggregating equals counting coarse") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto h = test::random_hierarchy(rng, 3, 48);
    const auto& g = h.grid();
    std::uniform_real_distribution<double> ux(-5.0, g.width() + 5.0);
    std::uniform_real_distribution<double> uy(-5.0, g.height() + 5.0);
    std::vector<std::vector<double>> counts(h.level_count());
    for (std::size_t l = 0; l < h.level_count(); ++l) counts[l].assign(h.level(l).size(), 0.0);
    for (int i = 0; i < 500; ++i) {
      auto p = assign_point(h, ux(rng), uy(rng));
      if (!p) continue;
      for (std::size_t l = 0; l < h.level_count(); ++l) counts[l][(*p)[l]] += 1.0;
      for (std::size_t l = 0; l + 1 < h.level_count(); ++l) {
        CHECK(h.parent(l, (*p)[l + 1]) == (*p)[l]);
      }
    }
    const std::size_t finest = h.level_count() - 1;
    for (std::size_t l = 0; l < finest; ++l) {
      const Vector agg = aggregate(counts[finest], aggregation_matrix(h, finest, l));
      for (std::size_t u = 0; u < h.level(l).size(); ++u) {
        CHECK(agg(static_cast<Eigen::Index>(u)) == counts[l][u]);
      }
    }
  }
}

TEST_CASE("hierarchy JSON round trip preserves hash") {
  std::mt19937_64 rng(8);
  auto h = test::random_hierarchy(rng, 3, 32);
  auto back = build_hierarchy(parse_hierarchy_description(h.to_json()));
  CHECK(back.hash() == h.hash());
  CHECK(back.dims() == h.dims());
}

TEST_CASE("bundled hierarchy example parses") {
  auto h = load_hierarchy(std::string(DISAGG_SOURCE_DIR) + "/configs/hierarchy_example.json");
  CHECK(h.level_count() == 3);
  CHECK(h.dims() == std::vector<std::size_t>{2, 4, 16});
}
