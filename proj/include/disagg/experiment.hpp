// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "disagg/count_frame.hpp"
#include "disagg/geo_hierarchy.hpp"
#include "disagg/training.hpp"

namespace disagg {

struct Task {
  std::string source;
  std::string target;

  std::string label() const { return source + "->" + target; }
};

/// One (task, model, scheme, weighting, seed) run.
struct Cell {
  Task task;
  std::string model;      // CW | AW | HR | FNN | LSTM
  std::string scheme;     // "-" for classical baselines
  std::string weighting;  // weighted | unweighted | "-"
  std::optional<std::uint64_t> seed;

  bool trained() const { return model == "FNN" || model == "LSTM"; }
  std::string id() const;
};

struct ExperimentMatrix {
  std::vector<Task> tasks;
  std::vector<std::string> models;
  std::vector<std::string> schemes{"plain"};
  std::vector<bool> weightings{true};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainConfig train;
  std::vector<std::size_t> fnn_hidden{256};
  std::vector<std::size_t> lstm_head_hidden{};
  std::size_t lstm_hidden = 128;
  std::size_t window = 5;
  bool lstm_finest = false;  // LSTM rows for the finest level are skipped unless set
  bool clamp = true;
  bool save_checkpoints = false;
  /// Explicit cells replace the cross product when present.
  std::vector<Cell> cells;

  static ExperimentMatrix from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Throws ConfigError for unknown levels/models/schemes and invalid
  /// (model, scheme) pairs. Runs before any computation.
  void validate(const GeoHierarchy& h) const;
  std::vector<Cell> expand(const GeoHierarchy& h) const;
};

struct Dataset {
  GeoHierarchy hierarchy;
  SplitSet splits;
};

/// Reads <dir>/hierarchy.json and <dir>/splits/{train,val,test}/<level>.csv.
Dataset load_dataset(const std::filesystem::path& dir);
void write_splits(const std::filesystem::path& dir, const SplitSet& splits, const GeoHierarchy& h);

struct MetricsRow {
  Cell cell;
  double mae_raw = 0.0;
  double mae_per_area = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

struct CellOutcome {
  MetricsRow row;
  std::vector<EpochRecord> history;
  EvalReport report;
  double runtime_s = 0.0;
};

CellOutcome run_cell(const Cell& cell, const ExperimentMatrix& m, const Dataset& data,
                     const std::filesystem::path& out_dir);

struct RunSummary {
  std::vector<CellOutcome> outcomes;
};

/// Runs every cell (up to `jobs` concurrently) and writes metrics.csv,
/// summary.csv, runs/<cell>/history.csv + eval.json, and run_manifest.json.
/// Everything except run_manifest.json is a deterministic function of the
/// inputs and seeds.
RunSummary run_matrix(const ExperimentMatrix& m, const Dataset& data,
                      const std::filesystem::path& out_dir, std::size_t jobs,
                      const std::string& config_text = {});

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

/// Median over seeds per (task, model, scheme, weighting).
std::string summary_to_csv(const std::vector<MetricsRow>& rows);

double median(std::vector<double> v);

struct PivotTable {
  std::vector<std::string> tasks;    // row keys, first-seen order
  std::vector<std::string> columns;  // model/scheme[/weighting], first-seen order
  std::vector<std::vector<std::optional<double>>> values;  // median per cell
  std::vector<std::vector<std::size_t>> counts;            // input rows per cell
  std::vector<std::string> best;     // argmin column per task
};

PivotTable pivot(const std::vector<MetricsRow>& rows, const std::string& metric);
std::string pivot_to_csv(const PivotTable& p);
/// task,model,scheme,weighting,seed,metric,value
std::string long_format_csv(const std::vector<MetricsRow>& rows);

}  // namespace disagg
