// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "disagg/geo_hierarchy.hpp"

namespace disagg::test {

// Shuffles items into k non-empty groups.
inline std::vector<std::size_t> random_partition(std::mt19937_64& rng, std::size_t m,
                                                 std::size_t k) {
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> group(m);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  for (std::size_t i = 0; i < m; ++i) group[order[i]] = i < k ? i : pick(rng);
  return group;
}

/// 2..max_levels levels of random nested partitions of a small grid, with
/// at most max_finest units at the finest level. Units need not be contiguous.
inline GeoHierarchy random_hierarchy(std::mt19937_64& rng, std::size_t max_levels,
                                     std::size_t max_finest) {
  std::uniform_int_distribution<std::size_t> edge(2, 9);
  HierarchyDescription d;
  d.grid = {edge(rng), edge(rng), std::uniform_real_distribution<double>(1.0, 50.0)(rng)};
  const std::size_t cells = d.grid.cell_count();
  const std::size_t levels = std::uniform_int_distribution<std::size_t>(2, max_levels)(rng);

  std::size_t n = std::uniform_int_distribution<std::size_t>(
      levels, std::min(cells, max_finest))(rng);
  // membership[cell] at the current (finer) level
  std::vector<std::size_t> membership = random_partition(rng, cells, n);
  std::vector<std::vector<std::size_t>> per_level{membership};
  std::vector<std::size_t> sizes{n};
  for (std::size_t l = 1; l < levels; ++l) {
    const std::size_t remaining = levels - l;  // levels still to build, incl. this one
    const std::size_t k = std::uniform_int_distribution<std::size_t>(remaining, n - 1)(rng);
    const auto merge = random_partition(rng, n, k);
    for (auto& m : membership) m = merge[m];
    per_level.push_back(membership);
    sizes.push_back(k);
    n = k;
  }
  std::reverse(per_level.begin(), per_level.end());
  std::reverse(sizes.begin(), sizes.end());
  for (std::size_t l = 0; l < levels; ++l) {
    HierarchyDescription::Level lvl;
    lvl.name = "L" + std::to_string(l);
    lvl.units.resize(sizes[l]);
    for (std::size_t u = 0; u < sizes[l]; ++u) lvl.units[u].id = lvl.name + "_" + std::to_string(u);
    for (std::size_t c = 0; c < cells; ++c) lvl.units[per_level[l][c]].cells.push_back(c);
    d.levels.push_back(std::move(lvl));
  }
  return build_hierarchy(d);
}

/// 1x4 strip: two parents of two cells each.
inline GeoHierarchy two_parent_hierarchy() {
  HierarchyDescription d;
  d.grid = {1, 4, 1.0};
  d.levels = {{"coarse", {}, 1, 2}, {"fine", {}, 1, 1}};
  return build_hierarchy(d);
}

/// Root, 4 quadrants, 16 cells.
inline GeoHierarchy fixture_1_4_16() {
  return regular_hierarchy(4, 4, 1.0, {4, 2, 1}, {"A", "B", "C"});
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("disagg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace disagg::test
