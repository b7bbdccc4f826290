// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "disagg/count_frame.hpp"
#include "disagg/geo_hierarchy.hpp"

namespace disagg {

/// Historical share of each fine unit within its coarse ancestor.
struct RatioTable {
  std::size_t fine_level = 0;
  std::size_t coarse_level = 0;
  std::vector<std::size_t> parent_of;  // fine unit -> coarse unit
  std::vector<double> ratio;           // fine unit -> share in [0, 1]
};

// Constant weighting: equal split among descendants at `fine`.
Vector cw_disaggregate(std::span<const double> x_coarse, const GeoHierarchy& h,
                       std::size_t coarse, std::size_t fine);

// Areal weighting: split proportional to descendant areas.
Vector aw_disaggregate(std::span<const double> x_coarse, const GeoHierarchy& h,
                       std::size_t coarse, std::size_t fine);

/// Historical ratios estimated as ratio of summed counts over the training
/// hours: share(child) = sum_t fine[t, child] / sum_t coarse[t, parent].
/// Parents with zero history fall back to uniform shares.
RatioTable hr_fit(const CountFrame& train_coarse, const CountFrame& train_fine,
                  const GeoHierarchy& h);

Vector hr_disaggregate(std::span<const double> x_coarse, const RatioTable& table);

/// Per-child multipliers (child value = share * parent value) shared by all
/// three baselines; rows of a frame are disaggregated with these.
RatioTable cw_table(const GeoHierarchy& h, std::size_t coarse, std::size_t fine);
RatioTable aw_table(const GeoHierarchy& h, std::size_t coarse, std::size_t fine);

/// Applies a share table to every row of an hours x d_coarse matrix.
Matrix disaggregate_rows(const Matrix& x_coarse, const RatioTable& table);

/// CSV `fine_unit,parent_unit,ratio`.
std::string ratio_table_to_csv(const RatioTable& table, const GeoHierarchy& h);
RatioTable read_ratio_table(const std::filesystem::path& path, const GeoHierarchy& h,
                            std::size_t coarse, std::size_t fine);

}  // namespace disagg
