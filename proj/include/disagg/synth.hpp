// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "disagg/count_frame.hpp"
#include "disagg/geo_hierarchy.hpp"
#include "disagg/ingest.hpp"

namespace disagg {

struct Hotspot {
  double center_x = 0.0;  // meters
  double center_y = 0.0;
  double scale = 1.0;      // Gaussian sigma, meters
  double amplitude = 0.0;  // expected records per cell-hour at the center
};

struct SynthConfig {
  std::size_t rows = 32;
  std::size_t cols = 32;
  double cell_size_m = 100.0;
  std::vector<std::size_t> block_edges{16, 8, 4, 2, 1};  // coarse -> fine, in cells
  std::vector<std::string> level_names{"PUMA", "NTA", "TRACT", "BLOCK", "EXTREME"};
  std::vector<Hotspot> hotspots;
  double daily_amplitude = 0.0;
  double daily_phase = 0.0;  // radians
  std::size_t hours = 720;
  std::int64_t start_time = 1451606400;  // 2016-01-01T00:00:00Z
  std::uint64_t seed = 42;
  std::optional<nlohmann::json> splits;  // optional split rule, see parse_split_rule

  HourRange window() const;
  void validate() const;
};

SynthConfig parse_synth_config(const nlohmann::json& j);

struct SynthResult {
  GeoHierarchy hierarchy;
  std::vector<PointRecord> records;  // ordered by hour, then cell
  LevelFrames truth;
};

/// Expected records in finest cell `cell` during absolute hour `hour`.
double synth_intensity(const SynthConfig& cfg, std::size_t cell, std::int64_t hour);

/// Poisson point process over the grid: per-cell counts drawn from the
/// hotspot-times-daily-cycle intensity, then placed uniformly (1 mm, 1 s
/// resolution) inside the cell and hour. Bit-identical for a fixed seed.
SynthResult synth_generate(const SynthConfig& cfg);

}  // namespace disagg
