// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "disagg/baselines.hpp"
#include "disagg/error.hpp"
#include "disagg/util.hpp"
#include "test_support.hpp"

using namespace disagg;

namespace {

// Walks the parent chain one level at a time.
std::size_t ancestor_of(const GeoHierarchy& h, std::size_t fine, std::size_t u, std::size_t coarse) {
  for (std::size_t l = fine; l > coarse; --l) u = h.parent(l - 1, u);
  return u;
}

CountFrame frame_of(const std::string& level, Matrix m) {
  CountFrame f;
  f.level = level;
  f.counts = std::move(m);
  return f;
}

}  // namespace

TEST_CASE("CW splits evenly among children") {
  auto h = test::two_parent_hierarchy();
  const std::vector<double> x{10.0, 3.0};
  const Vector y = cw_disaggregate(x, h, 0, 1);
  CHECK(y(0) == 5.0);
  CHECK(y(1) == 5.0);
  CHECK(y(2) == 1.5);
  CHECK(y(3) == 1.5);
}

TEST_CASE("AW splits by area") {
  HierarchyDescription d;
  d.grid = {1, 4, 2.0};
  d.levels = {{"c", {{"p", {0, 1, 2, 3}}}, 0, 0}, {"f", {{"small", {0}}, {"big", {1, 2, 3}}}, 0, 0}};
  auto h = build_hierarchy(d);
  const std::vector<double> x{8.0};
  const Vector y = aw_disaggregate(x, h, 0, 1);
  CHECK(y(0) == 2.0);
  CHECK(y(1) == 6.0);
  CHECK(h.level(1).unit_area[1] == 12.0);
}

TEST_CASE("HR uses the ratio of summed training counts") {
  auto h = test::two_parent_hierarchy();
  Matrix coarse(2, 2);
  coarse << 4, 0, 6, 0;
  Matrix fine(2, 4);
  fine << 1, 3, 0, 0, 2, 4, 0, 0;
  const auto t = hr_fit(frame_of("coarse", coarse), frame_of("fine", fine), h);
  CHECK(t.ratio[0] == doctest::Approx(0.3));
  CHECK(t.ratio[1] == doctest::Approx(0.7));
  // parent with no history falls back to uniform
  CHECK(t.ratio[2] == 0.5);
  CHECK(t.ratio[3] == 0.5);
  const std::vector<double> x{10.0, 2.0};
  const Vector y = hr_disaggregate(x, t);
  CHECK(y(0) == doctest::Approx(3.0));
  CHECK(y(1) == doctest::Approx(7.0));
  CHECK(y(2) == 1.0);
}

TEST_CASE("baselines of a zero input are zero") {
  auto h = regular_hierarchy(4, 4, 1.0, {4, 2, 1});
  const std::vector<double> zero(1, 0.0);
  CHECK(cw_disaggregate(zero, h, 0, 2).isZero());
  CHECK(aw_disaggregate(zero, h, 0, 2).isZero());
}

TEST_CASE("invalid level pairs and widths are rejected") {
  auto h = test::two_parent_hierarchy();
  const std::vector<double> x{1.0, 2.0};
  CHECK_THROWS(cw_disaggregate(x, h, 1, 0));
  const std::vector<double> wrong{1.0};
  CHECK_THROWS(cw_disaggregate(wrong, h, 0, 1));
}

TEST_CASE("property: baselines conserve mass and match a per-unit loop") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  std::uniform_int_distribution<int> cnt(0, 20);
  for (int trial = 0; trial < 100; ++trial) {
    auto h = test::random_hierarchy(rng, 3, 64);
    const std::size_t L = h.level_count();
    const std::size_t fine = L - 1;
    const std::size_t coarse = std::uniform_int_distribution<std::size_t>(0, fine - 1)(rng);
    const std::size_t dc = h.level(coarse).size();
    const std::size_t df = h.level(fine).size();
    std::vector<double> x(dc);
    for (auto& v : x) v = u(rng);

    Matrix hist_f(6, static_cast<Eigen::Index>(df));
    for (Eigen::Index i = 0; i < hist_f.size(); ++i) hist_f.data()[i] = cnt(rng);
    if (trial % 5 == 0) hist_f.col(0).setZero();
    const Matrix hist_c = aggregation_matrix(h, fine, coarse).apply_rows(hist_f);
    const auto table = hr_fit(frame_of(h.level(coarse).name, hist_c), frame_of(h.level(fine).name, hist_f), h);

    const Vector cw = cw_disaggregate(x, h, coarse, fine);
    const Vector aw = aw_disaggregate(x, h, coarse, fine);
    const Vector hr = hr_disaggregate(x, table);

    for (std::size_t i = 0; i < df; ++i) {
      const std::size_t p = ancestor_of(h, fine, i, coarse);
      double n = 0.0, area = 0.0, hist_child = 0.0, hist_parent = 0.0;
      for (std::size_t j = 0; j < df; ++j) {
        if (ancestor_of(h, fine, j, coarse) != p) continue;
        n += 1.0;
        area += h.level(fine).unit_area[j];
        for (Eigen::Index t = 0; t < hist_f.rows(); ++t) hist_parent += hist_f(t, j);
      }
      for (Eigen::Index t = 0; t < hist_f.rows(); ++t) hist_child += hist_f(t, i);
      const double cw_ref = x[p] / n;
      const double aw_ref = x[p] * h.level(fine).unit_area[i] / area;
      const double hr_ref = hist_parent > 0.0 ? x[p] * (hist_child / hist_parent) : x[p] / n;
      const auto e = static_cast<Eigen::Index>(i);
      CHECK(std::abs(cw(e) - cw_ref) <= 1e-12 * std::max(1.0, std::abs(cw_ref)));
      CHECK(std::abs(aw(e) - aw_ref) <= 1e-12 * std::max(1.0, std::abs(aw_ref)));
      CHECK(std::abs(hr(e) - hr_ref) <= 1e-12 * std::max(1.0, std::abs(hr_ref)));
    }

    const auto m = aggregation_matrix(h, fine, coarse);
    for (const Vector* y : {&cw, &aw, &hr}) {
      const Vector back = m.apply(std::span<const double>(y->data(), static_cast<std::size_t>(y->size())));
      for (std::size_t p = 0; p < dc; ++p) {
        CHECK(std::abs(back(static_cast<Eigen::Index>(p)) - x[p]) <= 1e-9 * std::max(1.0, x[p]));
      }
    }
  }
}

TEST_CASE("disaggregate_rows matches per-row disaggregation") {
  auto h = regular_hierarchy(4, 4, 1.0, {4, 2, 1});
  Matrix rows(3, 4);
  rows << 4, 8, 0, 1, 2, 2, 2, 2, 0, 0, 0, 9;
  const auto t = cw_table(h, 1, 2);
  const Matrix out = disaggregate_rows(rows, t);
  for (Eigen::Index r = 0; r < 3; ++r) {
    const Vector ref = cw_disaggregate(std::span<const double>(rows.row(r).data(), 4), h, 1, 2);
    CHECK((out.row(r).transpose() - ref).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ratio table CSV round trip") {
  auto h = regular_hierarchy(4, 4, 1.0, {4, 2, 1});
  auto t = aw_table(h, 0, 2);
  t.ratio[0] = 0.1234567890123;
  const auto dir = test::scratch_dir("ratios");
  util::write_file_atomic(dir / "r.csv", ratio_table_to_csv(t, h));
  const auto back = read_ratio_table(dir / "r.csv", h, 0, 2);
  CHECK(back.ratio == t.ratio);
  CHECK(back.parent_of == t.parent_of);
}
