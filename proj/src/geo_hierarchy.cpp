// SPDX-License-Identifier: Apache-2.0
#include "disagg/geo_hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "disagg/error.hpp"
#include "disagg/util.hpp"

namespace disagg {

AggregationMatrix::AggregationMatrix(std::size_t fine_level, std::size_t coarse_level,
                                     std::size_t coarse_size,
                                     std::vector<std::size_t> parent_of)
    : fine_level_(fine_level),
      coarse_level_(coarse_level),
      coarse_size_(coarse_size),
      parent_of_(std::move(parent_of)) {}

Matrix AggregationMatrix::dense() const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(coarse_size_),
                          static_cast<Eigen::Index>(parent_of_.size()));
  for (std::size_t c = 0; c < parent_of_.size(); ++c) {
    m(static_cast<Eigen::Index>(parent_of_[c]), static_cast<Eigen::Index>(c)) = 1.0;
  }
  return m;
}

Vector AggregationMatrix::apply(std::span<const double> x_fine) const {
  if (x_fine.size() != parent_of_.size()) {
    throw DataError("aggregate: input length " + std::to_string(x_fine.size()) +
                    " does not match fine dimension " + std::to_string(parent_of_.size()));
  }
  Vector y = Vector::Zero(static_cast<Eigen::Index>(coarse_size_));
  for (std::size_t c = 0; c < x_fine.size(); ++c) {
    y(static_cast<Eigen::Index>(parent_of_[c])) += x_fine[c];
  }
  return y;
}

Matrix AggregationMatrix::apply_rows(const Matrix& x_fine) const {
  if (static_cast<std::size_t>(x_fine.cols()) != parent_of_.size()) {
    throw DataError("aggregate: input width " + std::to_string(x_fine.cols()) +
                    " does not match fine dimension " + std::to_string(parent_of_.size()));
  }
  Matrix y = Matrix::Zero(x_fine.rows(), static_cast<Eigen::Index>(coarse_size_));
  for (Eigen::Index r = 0; r < x_fine.rows(); ++r) {
    for (std::size_t c = 0; c < parent_of_.size(); ++c) {
      y(r, static_cast<Eigen::Index>(parent_of_[c])) += x_fine(r, static_cast<Eigen::Index>(c));
    }
  }
  return y;
}

std::vector<std::size_t> GeoHierarchy::dims() const {
  std::vector<std::size_t> d;
  d.reserve(levels_.size());
  for (const auto& l : levels_) d.push_back(l.size());
  return d;
}

std::optional<std::size_t> GeoHierarchy::find_level(const std::string& name) const {
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    if (levels_[l].name == name) return l;
  }
  return std::nullopt;
}

std::size_t GeoHierarchy::level_index(const std::string& name) const {
  if (auto l = find_level(name)) return *l;
  throw ConfigError("unknown level '" + name + "'");
}

std::vector<std::size_t> GeoHierarchy::ancestors(std::size_t fine, std::size_t coarse) const {
  if (coarse >= fine || fine >= levels_.size()) {
    throw ConfigError("level " + std::to_string(fine) + " is not strictly below level " +
                      std::to_string(coarse));
  }
  std::vector<std::size_t> up(levels_[fine].size());
  for (std::size_t u = 0; u < up.size(); ++u) {
    std::size_t cur = u;
    for (std::size_t l = fine; l > coarse; --l) cur = parents_[l - 1][cur];
    up[u] = cur;
  }
  return up;
}

std::vector<std::vector<std::size_t>> GeoHierarchy::descendants(std::size_t coarse,
                                                                std::size_t fine) const {
  auto up = ancestors(fine, coarse);
  std::vector<std::vector<std::size_t>> down(levels_[coarse].size());
  for (std::size_t u = 0; u < up.size(); ++u) down[up[u]].push_back(u);
  return down;
}

std::optional<std::size_t> GeoHierarchy::cell_at(double x, double y) const {
  if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
  if (x < 0.0 || y < 0.0) return std::nullopt;
  const double col = std::floor(x / grid_.cell_size_m);
  const double row = std::floor(y / grid_.cell_size_m);
  if (col >= static_cast<double>(grid_.cols) || row >= static_cast<double>(grid_.rows)) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(row) * grid_.cols + static_cast<std::size_t>(col);
}

nlohmann::json GeoHierarchy::to_json() const {
  nlohmann::json j;
  j["grid"] = {{"rows", grid_.rows}, {"cols", grid_.cols}, {"cell_size_m", grid_.cell_size_m}};
  j["levels"] = nlohmann::json::array();
  for (const auto& lvl : levels_) {
    nlohmann::json units = nlohmann::json::array();
    for (std::size_t u = 0; u < lvl.size(); ++u) {
      units.push_back({{"id", lvl.unit_ids[u]}, {"cells", lvl.unit_cells[u]}});
    }
    j["levels"].push_back({{"name", lvl.name}, {"units", std::move(units)}});
  }
  return j;
}

namespace {

std::vector<HierarchyDescription::Unit> regular_units(const CellGrid& g,
                                                      const HierarchyDescription::Level& lvl) {
  if (lvl.block_rows == 0 || lvl.block_cols == 0 || g.rows % lvl.block_rows != 0 ||
      g.cols % lvl.block_cols != 0) {
    throw ConfigError("level '" + lvl.name + "': block " + std::to_string(lvl.block_rows) + "x" +
                      std::to_string(lvl.block_cols) + " does not tile a " +
                      std::to_string(g.rows) + "x" + std::to_string(g.cols) + " grid");
  }
  const std::size_t br = g.rows / lvl.block_rows;
  const std::size_t bc = g.cols / lvl.block_cols;
  std::vector<HierarchyDescription::Unit> units(br * bc);
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      const std::size_t u = (r / lvl.block_rows) * bc + c / lvl.block_cols;
      units[u].cells.push_back(r * g.cols + c);
    }
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    units[u].id = lvl.name + "_" + std::to_string(u);
  }
  return units;
}

}  // namespace

GeoHierarchy build_hierarchy(const HierarchyDescription& desc) {
  const CellGrid& g = desc.grid;
  if (g.rows == 0 || g.cols == 0 || !(g.cell_size_m > 0.0) || !std::isfinite(g.cell_size_m)) {
    throw ConfigError("grid must have positive rows, cols and cell size");
  }
  if (desc.levels.size() < 2) {
    throw ConfigError("hierarchy needs at least 2 levels, got " +
                      std::to_string(desc.levels.size()));
  }

  GeoHierarchy h;
  h.grid_ = g;
  const std::size_t ncells = g.cell_count();
  std::set<std::string> names;

  for (const auto& lvl : desc.levels) {
    if (lvl.name.empty()) throw ConfigError("level name must be nonempty");
    if (!names.insert(lvl.name).second) throw ConfigError("duplicate level name '" + lvl.name + "'");
    auto units = lvl.units.empty() ? regular_units(g, lvl) : lvl.units;

    LevelSpec spec;
    spec.name = lvl.name;
    std::vector<std::size_t> cell_unit(ncells, SIZE_MAX);
    std::set<std::string> ids;
    for (std::size_t u = 0; u < units.size(); ++u) {
      const auto& unit = units[u];
      if (!ids.insert(unit.id).second) {
        throw ConfigError("level '" + lvl.name + "': duplicate unit id '" + unit.id + "'");
      }
      if (unit.cells.empty()) {
        throw ConfigError("level '" + lvl.name + "': unit '" + unit.id + "' has no cells");
      }
      for (std::size_t c : unit.cells) {
        if (c >= ncells) {
          throw ConfigError("level '" + lvl.name + "': cell " + std::to_string(c) +
                            " outside grid");
        }
        if (cell_unit[c] != SIZE_MAX) {
          throw ConfigError("level '" + lvl.name + "': cell " + std::to_string(c) +
                            " doubly covered");
        }
        cell_unit[c] = u;
      }
      auto cells = unit.cells;
      std::sort(cells.begin(), cells.end());
      spec.unit_ids.push_back(unit.id);
      spec.unit_area.push_back(static_cast<double>(cells.size()) * g.cell_area());
      spec.unit_cells.push_back(std::move(cells));
    }
    for (std::size_t c = 0; c < ncells; ++c) {
      if (cell_unit[c] == SIZE_MAX) {
        throw ConfigError("level '" + lvl.name + "': cell " + std::to_string(c) + " uncovered");
      }
    }
    if (!h.levels_.empty() && spec.size() <= h.levels_.back().size()) {
      throw ConfigError("level '" + lvl.name + "' must have more units than '" +
                        h.levels_.back().name + "'");
    }
    h.levels_.push_back(std::move(spec));
    h.cell_unit_.push_back(std::move(cell_unit));
  }

  for (std::size_t l = 0; l + 1 < h.levels_.size(); ++l) {
    const auto& child = h.levels_[l + 1];
    std::vector<std::size_t> parent(child.size(), SIZE_MAX);
    for (std::size_t u = 0; u < child.size(); ++u) {
      for (std::size_t c : child.unit_cells[u]) {
        const std::size_t p = h.cell_unit_[l][c];
        if (parent[u] == SIZE_MAX) {
          parent[u] = p;
        } else if (parent[u] != p) {
          throw ConfigError("non-nested membership: unit '" + child.unit_ids[u] + "' of level '" +
                            child.name + "' spans units '" + h.levels_[l].unit_ids[parent[u]] +
                            "' and '" + h.levels_[l].unit_ids[p] + "' of level '" +
                            h.levels_[l].name + "'");
        }
      }
    }
    h.parents_.push_back(std::move(parent));
  }

  std::ostringstream canon;
  canon << g.rows << ' ' << g.cols << ' ' << util::format_double(g.cell_size_m) << '\n';
  for (std::size_t l = 0; l < h.levels_.size(); ++l) {
    canon << h.levels_[l].name;
    for (std::size_t c = 0; c < ncells; ++c) canon << ' ' << h.cell_unit_[l][c];
    canon << '\n';
    for (const auto& id : h.levels_[l].unit_ids) canon << id << ',';
    canon << '\n';
  }
  h.hash_ = util::sha256_hex(canon.str());
  return h;
}

GeoHierarchy regular_hierarchy(std::size_t rows, std::size_t cols, double cell_size_m,
                               const std::vector<std::size_t>& block_edges,
                               const std::vector<std::string>& names) {
  HierarchyDescription d;
  d.grid = {rows, cols, cell_size_m};
  for (std::size_t i = 0; i < block_edges.size(); ++i) {
    HierarchyDescription::Level lvl;
    lvl.name = i < names.size() ? names[i] : "L" + std::to_string(i);
    lvl.block_rows = block_edges[i];
    lvl.block_cols = block_edges[i];
    d.levels.push_back(std::move(lvl));
  }
  return build_hierarchy(d);
}

HierarchyDescription parse_hierarchy_description(const nlohmann::json& j) {
  HierarchyDescription d;
  try {
    const auto& g = j.at("grid");
    d.grid.rows = g.at("rows").get<std::size_t>();
    d.grid.cols = g.at("cols").get<std::size_t>();
    d.grid.cell_size_m = g.at("cell_size_m").get<double>();
    for (const auto& lj : j.at("levels")) {
      HierarchyDescription::Level lvl;
      lvl.name = lj.at("name").get<std::string>();
      if (lj.contains("units")) {
        for (const auto& uj : lj.at("units")) {
          lvl.units.push_back({uj.at("id").get<std::string>(),
                               uj.at("cells").get<std::vector<std::size_t>>()});
        }
      } else if (lj.contains("block")) {
        const auto& b = lj.at("block");
        if (b.is_array()) {
          lvl.block_rows = b.at(0).get<std::size_t>();
          lvl.block_cols = b.at(1).get<std::size_t>();
        } else {
          lvl.block_rows = lvl.block_cols = b.get<std::size_t>();
        }
      } else {
        throw ConfigError("level '" + lvl.name + "' needs either 'units' or 'block'");
      }
      d.levels.push_back(std::move(lvl));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hierarchy description: ") + e.what());
  }
  return d;
}

GeoHierarchy load_hierarchy(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return build_hierarchy(parse_hierarchy_description(j));
}

AggregationMatrix aggregation_matrix(const GeoHierarchy& h, std::size_t fine, std::size_t coarse) {
  return AggregationMatrix(fine, coarse, h.level(coarse).size(), h.ancestors(fine, coarse));
}

Vector aggregate(std::span<const double> x_fine, const AggregationMatrix& m) {
  for (double v : x_fine) {
    if (!std::isfinite(v)) throw DataError("aggregate: non-finite input");
  }
  return m.apply(x_fine);
}

std::optional<UnitPath> assign_point(const GeoHierarchy& h, double x, double y) {
  auto cell = h.cell_at(x, y);
  if (!cell) return std::nullopt;
  UnitPath path(h.level_count());
  for (std::size_t l = 0; l < h.level_count(); ++l) path[l] = h.unit_of_cell(l, *cell);
  return path;
}

}  // namespace disagg
