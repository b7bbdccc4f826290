// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disagg/count_frame.hpp"
#include "disagg/geo_hierarchy.hpp"
#include "disagg/models.hpp"

namespace disagg {

enum class Reconstruction { None, Full, Bridge, BottomUp };

struct LossScheme {
  bool cot = false;
  Reconstruction rec = Reconstruction::None;
  bool weighted = true;

  /// Reconstruction is only defined on top of COT training.
  void validate() const;
  /// plain | cot | cot+rec-full | cot+rec-bridge | cot+rec-bottomup
  std::string label() const;
  static LossScheme parse(const std::string& label, bool weighted);
};

struct LevelWeights {
  std::vector<std::size_t> levels;  // coarse -> fine
  std::vector<double> alpha;

  double at(std::size_t level) const;
};

/// alpha_l = (1/d_l) / sum_k (1/d_k) when weighted, 1/L otherwise.
std::vector<double> level_weights(std::span<const std::size_t> dims, bool weighted = true);

struct TrainConfig {
  std::size_t batch_size = 8;
  double learning_rate = 1e-4;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Truth rows per level index (batch x d_level).
using LevelMatrices = std::map<std::size_t, Matrix>;
/// Differentiable reconstruction per coarser level index.
using Reconstructions = std::map<std::size_t, ad::Tensor>;

/// Re-aggregates finer predictions onto every coarser in-task level
/// [source, finest predicted). Full averages the aggregations of all finer
/// predicted levels, Bridge uses only the next finer predicted level,
/// BottomUp only the finest predicted level.
Reconstructions reconstruct(const ModelOutput& predictions, const GeoHierarchy& h,
                            std::size_t source, Reconstruction scheme);

struct LossTerms {
  ad::Tensor total;
  /// Weighted per-level term alpha_l * (prediction L1 + reconstruction L1).
  std::map<std::size_t, double> weighted;
  std::map<std::size_t, double> prediction_l1;
  std::map<std::size_t, double> reconstruction_l1;
};

/// Levels that carry a loss term under `scheme` for a model that predicts
/// `predicted` (coarse -> fine) from `source`.
std::vector<std::size_t> loss_levels(const LossScheme& scheme, std::size_t source,
                                     const std::vector<std::size_t>& predicted);

/// Weights over loss_levels(), by level dimension.
LevelWeights scheme_weights(const LossScheme& scheme, const GeoHierarchy& h, std::size_t source,
                            const std::vector<std::size_t>& predicted);

LossTerms compose_loss(const ModelOutput& predictions, const Reconstructions& reconstructions,
                       const LevelMatrices& truths, const LossScheme& scheme,
                       const LevelWeights& weights, std::size_t target);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Mini-batch adaptive-moment training on splits.train with early stopping on
/// the composed validation loss.
TrainResult train(Model model, const SplitSet& splits, const GeoHierarchy& h,
                  const LossScheme& scheme, const TrainConfig& cfg);

/// Composed loss of `model` over every labelled row of a split.
LossTerms split_loss(const Model& model, const LevelFrames& split, const GeoHierarchy& h,
                     const LossScheme& scheme);

struct EvalReport {
  double mae_raw = 0.0;       // count / unit / hour
  double mae_per_area = 0.0;  // count / m^2 / hour
  std::map<std::string, double> level_terms;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
};

/// MAE over (hour, unit) cells, raw and divided by unit area. When `clamp`
/// is set negative predictions are raised to 0 first.
EvalReport evaluate(const Matrix& prediction, const Matrix& truth, std::span<const double> areas,
                    bool clamp = true);

/// Target-level predictions for every labelled row of a split.
Matrix predict_split(const Model& model, const LevelFrames& split);

EvalReport evaluate_model(const Model& model, const LevelFrames& test, const GeoHierarchy& h,
                          const LossScheme& scheme, bool clamp = true);

std::string history_to_csv(const std::vector<EpochRecord>& history);

}  // namespace disagg
