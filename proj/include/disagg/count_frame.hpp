// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "disagg/geo_hierarchy.hpp"

namespace disagg {

/// Hourly counts for one level: rows are consecutive absolute hours
/// (floor(unix_seconds / 3600)) starting at first_hour, columns are units.
struct CountFrame {
  std::string level;
  std::int64_t first_hour = 0;
  Matrix counts;

  std::size_t hours() const { return static_cast<std::size_t>(counts.rows()); }
  std::size_t units() const { return static_cast<std::size_t>(counts.cols()); }
  std::int64_t end_hour() const { return first_hour + static_cast<std::int64_t>(hours()); }

  /// Rows [begin, end) in absolute hours.
  CountFrame slice_hours(std::int64_t begin, std::int64_t end) const;
};

/// One frame per hierarchy level, index-aligned with GeoHierarchy levels.
using LevelFrames = std::vector<CountFrame>;

/// Half-open absolute hour interval.
struct HourRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  std::int64_t length() const { return end - begin; }
  bool operator==(const HourRange&) const = default;
};

struct SplitRule {
  HourRange train;
  HourRange val;
  HourRange test;
};

struct SplitSet {
  LevelFrames train;
  LevelFrames val;
  LevelFrames test;
  SplitRule rule;
};

struct FrameStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Checks dims against the hierarchy, contiguous shared hour axis and the
/// cross-level mass invariant (exact for integer counts).
void validate_level_frames(const LevelFrames& frames, const GeoHierarchy& h);

/// Splits every level by the rule. Ranges must lie inside the frames, be
/// disjoint and ordered train < val < test.
SplitSet make_splits(const LevelFrames& frames, const SplitRule& rule);

/// Last `test_hours` rows as test, the `val_hours` before them as val, the rest train.
SplitRule tail_split_rule(HourRange window, std::int64_t val_hours, std::int64_t test_hours);

/// Parses a splits config. Each of train/val/test is either
/// {"start": "YYYY-MM-DD", "end": "YYYY-MM-DD"} (inclusive UTC days) or
/// {"begin_hour": h0, "end_hour": h1} (half-open absolute hours). Alternatively
/// {"tail": {"val_hours": v, "test_hours": t}} relative to `window`.
SplitRule parse_split_rule(const nlohmann::json& j, HourRange window);

/// Absolute hour index of 00:00 UTC on the given calendar day.
std::int64_t day_start_hour(int year, unsigned month, unsigned day);
std::int64_t parse_date_hour(const std::string& yyyy_mm_dd);

FrameStats descriptive_stats(const CountFrame& frame);

// CSV with header `hour,<unit ids...>` plus a JSON sidecar <file>.json.
std::string frame_to_csv(const CountFrame& frame, const GeoHierarchy& h);
void write_frame(const std::filesystem::path& csv_path, const CountFrame& frame,
                 const GeoHierarchy& h);
CountFrame read_frame(const std::filesystem::path& csv_path, const GeoHierarchy& h,
                      const std::string& level);

/// Writes <dir>/<level>.csv for every level.
void write_level_frames(const std::filesystem::path& dir, const LevelFrames& frames,
                        const GeoHierarchy& h);
LevelFrames read_level_frames(const std::filesystem::path& dir, const GeoHierarchy& h);

}  // namespace disagg
