// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "disagg/count_frame.hpp"
#include "disagg/geo_hierarchy.hpp"

namespace disagg {

struct PointRecord {
  std::int64_t timestamp = 0;  // UTC seconds
  double x = 0.0;              // meters, grid frame
  double y = 0.0;

  bool operator==(const PointRecord&) const = default;
};

inline std::int64_t hour_of(std::int64_t timestamp) {
  // floor division so pre-epoch timestamps bucket consistently
  return timestamp >= 0 ? timestamp / 3600 : -((-timestamp + 3599) / 3600);
}

struct IngestResult {
  LevelFrames frames;
  std::size_t accepted = 0;
  std::size_t out_of_bounds = 0;   // outside the grid
  std::size_t outside_window = 0;  // timestamp outside the hour window
  std::vector<std::string> warnings;
};

/// Counts records per (hour, unit) at every level of the hierarchy.
IngestResult ingest_points(std::span<const PointRecord> records, const GeoHierarchy& h,
                           HourRange window);

/// Reads `timestamp,x,y`. Malformed lines raise DataError naming every bad line number.
std::vector<PointRecord> read_points_csv(const std::filesystem::path& path);
std::string points_to_csv(std::span<const PointRecord> records);

/// Smallest hour window covering all records (empty range for no records).
HourRange covering_window(std::span<const PointRecord> records);

}  // namespace disagg
