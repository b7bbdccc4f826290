// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "disagg/count_frame.hpp"
#include "disagg/experiment.hpp"

namespace disagg {

struct SynthOutputs {
  std::vector<FrameStats> stats;  // per level
  std::size_t records = 0;
};

/// Writes records.csv, hierarchy.json, frames/<level>.csv, stats.csv and,
/// when the config carries a split rule, splits/{train,val,test}/.
SynthOutputs cmd_synth(const std::filesystem::path& config, const std::filesystem::path& out,
                       std::optional<std::uint64_t> seed, std::ostream& log);

struct IngestOutputs {
  std::size_t accepted = 0;
  std::size_t dropped = 0;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::size_t test_rows = 0;
};

/// Writes hierarchy.json, frames/, splits/, split_summary.csv and ingest_report.json.
IngestOutputs cmd_ingest(const std::filesystem::path& points, const std::filesystem::path& hierarchy,
                         const std::filesystem::path& splits, const std::filesystem::path& out,
                         std::ostream& log);

RunSummary cmd_run(const std::filesystem::path& config, const std::filesystem::path& data,
                   const std::filesystem::path& out, std::size_t jobs,
                   std::optional<std::uint64_t> seed, std::ostream& log);

/// Writes pivot_<metric>.csv and metrics_long.csv.
PivotTable cmd_report(const std::filesystem::path& metrics, const std::filesystem::path& out,
                      const std::string& metric, std::ostream& log);

std::string stats_table(const std::vector<std::string>& levels, const std::vector<FrameStats>& stats);

}  // namespace disagg
