// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace disagg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Rectangular lattice on which every areal unit is defined. Cell (r, c)
/// covers x in [c*edge, (c+1)*edge) and y in [r*edge, (r+1)*edge); its
/// linear index is r*cols + c.
struct CellGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double cell_size_m = 1.0;

  std::size_t cell_count() const { return rows * cols; }
  double cell_area() const { return cell_size_m * cell_size_m; }
  double width() const { return static_cast<double>(cols) * cell_size_m; }
  double height() const { return static_cast<double>(rows) * cell_size_m; }
};

struct LevelSpec {
  std::string name;
  std::vector<std::string> unit_ids;
  std::vector<std::vector<std::size_t>> unit_cells;  // sorted cell indices per unit
  std::vector<double> unit_area;                     // m^2

  std::size_t size() const { return unit_ids.size(); }
};

/// Input to build_hierarchy: either explicit unit->cells lists per level, or
/// square/rectangular blocks of cells (regular subdivision).
struct HierarchyDescription {
  struct Unit {
    std::string id;
    std::vector<std::size_t> cells;
  };
  struct Level {
    std::string name;
    std::vector<Unit> units;        // explicit form
    std::size_t block_rows = 0;     // regular form when units is empty
    std::size_t block_cols = 0;
  };
  CellGrid grid;
  std::vector<Level> levels;  // coarse -> fine
};

/// Binary fine->coarse summation operator. Stored as the fine-unit -> coarse
/// parent index; dense() materialises the d_coarse x d_fine 0/1 matrix.
class AggregationMatrix {
 public:
  AggregationMatrix(std::size_t fine_level, std::size_t coarse_level,
                    std::size_t coarse_size, std::vector<std::size_t> parent_of);

  std::size_t fine_level() const { return fine_level_; }
  std::size_t coarse_level() const { return coarse_level_; }
  std::size_t fine_size() const { return parent_of_.size(); }
  std::size_t coarse_size() const { return coarse_size_; }
  std::span<const std::size_t> parent_of() const { return parent_of_; }

  Matrix dense() const;

  /// y = M x for a single vector.
  Vector apply(std::span<const double> x_fine) const;
  /// Row-wise aggregation of an hours x d_fine matrix.
  Matrix apply_rows(const Matrix& x_fine) const;

 private:
  std::size_t fine_level_;
  std::size_t coarse_level_;
  std::size_t coarse_size_;
  std::vector<std::size_t> parent_of_;
};

/// Unit index per level for a located point.
using UnitPath = std::vector<std::size_t>;

class GeoHierarchy {
 public:
  const CellGrid& grid() const { return grid_; }
  std::size_t level_count() const { return levels_.size(); }
  const LevelSpec& level(std::size_t l) const { return levels_.at(l); }
  std::vector<std::size_t> dims() const;

  std::size_t level_index(const std::string& name) const;
  std::optional<std::size_t> find_level(const std::string& name) const;

  /// Parent (at level l) of child unit u at level l+1.
  std::size_t parent(std::size_t l, std::size_t u) const { return parents_.at(l).at(u); }
  /// Unit at level l containing cell c.
  std::size_t unit_of_cell(std::size_t l, std::size_t c) const { return cell_unit_.at(l).at(c); }

  /// Ancestor map fine unit -> coarse unit via composed memberships.
  std::vector<std::size_t> ancestors(std::size_t fine, std::size_t coarse) const;
  /// Children (at level coarse+k, k>0) of each coarse unit.
  std::vector<std::vector<std::size_t>> descendants(std::size_t coarse, std::size_t fine) const;

  /// Cell index for a planar coordinate, or nullopt when outside the grid.
  std::optional<std::size_t> cell_at(double x, double y) const;

  /// SHA-256 over a canonical text rendering of grid and memberships.
  const std::string& hash() const { return hash_; }

  nlohmann::json to_json() const;

 private:
  friend GeoHierarchy build_hierarchy(const HierarchyDescription&);

  CellGrid grid_;
  std::vector<LevelSpec> levels_;
  std::vector<std::vector<std::size_t>> cell_unit_;  // [level][cell]
  std::vector<std::vector<std::size_t>> parents_;    // [l][unit at l+1]
  std::string hash_;
};

/// Validates nesting/coverage and computes areas. Throws ConfigError.
GeoHierarchy build_hierarchy(const HierarchyDescription& desc);

/// Regular-subdivision shorthand: one level per block edge (in cells), coarse->fine.
GeoHierarchy regular_hierarchy(std::size_t rows, std::size_t cols, double cell_size_m,
                               const std::vector<std::size_t>& block_edges,
                               const std::vector<std::string>& names = {});

HierarchyDescription parse_hierarchy_description(const nlohmann::json& j);
GeoHierarchy load_hierarchy(const std::string& path);

AggregationMatrix aggregation_matrix(const GeoHierarchy& h, std::size_t fine,
                                     std::size_t coarse);

Vector aggregate(std::span<const double> x_fine, const AggregationMatrix& m);

/// Unit per level for a coordinate; nullopt (rejection) when out of bounds.
std::optional<UnitPath> assign_point(const GeoHierarchy& h, double x, double y);

}  // namespace disagg
