// SPDX-License-Identifier: Apache-2.0
#include "disagg/training.hpp"

#include <cmath>
#include <limits>

#include "disagg/error.hpp"
#include "disagg/optimizer.hpp"
#include "disagg/util.hpp"

namespace disagg {

void LossScheme::validate() const {
  if (rec != Reconstruction::None && !cot) {
    throw ConfigError("reconstruction loss requires COT training");
  }
}

std::string LossScheme::label() const {
  if (!cot) return "plain";
  switch (rec) {
    case Reconstruction::None: return "cot";
    case Reconstruction::Full: return "cot+rec-full";
    case Reconstruction::Bridge: return "cot+rec-bridge";
    case Reconstruction::BottomUp: return "cot+rec-bottomup";
  }
  return "cot";
}

LossScheme LossScheme::parse(const std::string& label, bool weighted) {
  if (label == "plain") return {false, Reconstruction::None, weighted};
  if (label == "cot") return {true, Reconstruction::None, weighted};
  if (label == "cot+rec-full") return {true, Reconstruction::Full, weighted};
  if (label == "cot+rec-bridge") return {true, Reconstruction::Bridge, weighted};
  if (label == "cot+rec-bottomup") return {true, Reconstruction::BottomUp, weighted};
  throw ConfigError("unknown scheme '" + label + "'");
}

double LevelWeights::at(std::size_t level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return alpha[i];
  }
  throw std::out_of_range("no weight for level " + std::to_string(level));
}

std::vector<double> level_weights(std::span<const std::size_t> dims, bool weighted) {
  if (dims.empty()) throw ConfigError("level_weights: no levels");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == 0) throw ConfigError("level_weights: dimensions must be positive");
    if (i > 0 && dims[i] < dims[i - 1]) {
      throw ConfigError("level_weights: dimensions must ascend coarse to fine");
    }
  }
  std::vector<double> alpha(dims.size());
  if (!weighted) {
    std::fill(alpha.begin(), alpha.end(), 1.0 / static_cast<double>(dims.size()));
    return alpha;
  }
  double norm = 0.0;
  for (std::size_t d : dims) norm += 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    alpha[i] = (1.0 / static_cast<double>(dims[i])) / norm;
  }
  return alpha;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
}

Reconstructions reconstruct(const ModelOutput& predictions, const GeoHierarchy& h,
                            std::size_t source, Reconstruction scheme) {
  Reconstructions out;
  if (scheme == Reconstruction::None) return out;
  if (predictions.empty()) throw DataError("reconstruct: no predictions");
  std::vector<std::size_t> predicted;
  for (const auto& [level, _] : predictions) {
    if (level <= source) throw DataError("reconstruct: prediction at or above the source level");
    predicted.push_back(level);
  }
  std::vector<std::size_t> coarser{source};
  coarser.insert(coarser.end(), predicted.begin(), predicted.end() - 1);

  const auto aggregated = [&](std::size_t fine, std::size_t coarse) {
    const auto parents = h.ancestors(fine, coarse);
    return ad::group_sum(predictions.at(fine), parents, h.level(coarse).size());
  };

  for (std::size_t c : coarser) {
    std::vector<std::size_t> finer;
    for (std::size_t p : predicted) {
      if (p > c) finer.push_back(p);
    }
    switch (scheme) {
      case Reconstruction::Full: {
        ad::Tensor acc = aggregated(finer.front(), c);
        for (std::size_t i = 1; i < finer.size(); ++i) acc = ad::add(acc, aggregated(finer[i], c));
        out[c] = finer.size() == 1 ? acc : ad::scalar_div(acc, static_cast<double>(finer.size()));
        break;
      }
      case Reconstruction::Bridge:
        out[c] = aggregated(finer.front(), c);
        break;
      case Reconstruction::BottomUp:
        out[c] = aggregated(finer.back(), c);
        break;
      case Reconstruction::None:
        break;
    }
  }
  return out;
}

std::vector<std::size_t> loss_levels(const LossScheme& scheme, std::size_t source,
                                     const std::vector<std::size_t>& predicted) {
  scheme.validate();
  if (!scheme.cot) return {predicted.back()};
  std::vector<std::size_t> levels;
  if (scheme.rec != Reconstruction::None) levels.push_back(source);
  levels.insert(levels.end(), predicted.begin(), predicted.end());
  return levels;
}

LevelWeights scheme_weights(const LossScheme& scheme, const GeoHierarchy& h, std::size_t source,
                            const std::vector<std::size_t>& predicted) {
  LevelWeights w;
  w.levels = loss_levels(scheme, source, predicted);
  std::vector<std::size_t> dims;
  for (std::size_t l : w.levels) dims.push_back(h.level(l).size());
  w.alpha = level_weights(dims, scheme.weighted);
  return w;
}

LossTerms compose_loss(const ModelOutput& predictions, const Reconstructions& reconstructions,
                       const LevelMatrices& truths, const LossScheme& scheme,
                       const LevelWeights& weights, std::size_t target) {
  scheme.validate();
  LossTerms out;
  std::vector<ad::Tensor> terms;
  std::vector<double> alphas;
  for (std::size_t i = 0; i < weights.levels.size(); ++i) {
    const std::size_t l = weights.levels[i];
    auto truth_it = truths.find(l);
    if (truth_it == truths.end()) {
      throw DataError("compose_loss: missing truth for level " + std::to_string(l));
    }
    const ad::Tensor truth = ad::constant(truth_it->second);
    std::optional<ad::Tensor> level_loss;
    if (l == target || scheme.cot) {
      if (auto p = predictions.find(l); p != predictions.end()) {
        auto t = ad::l1_loss(p->second, truth);
        out.prediction_l1[l] = t.item();
        level_loss = t;
      }
    }
    if (scheme.rec != Reconstruction::None) {
      if (auto r = reconstructions.find(l); r != reconstructions.end()) {
        auto t = ad::l1_loss(r->second, truth);
        out.reconstruction_l1[l] = t.item();
        level_loss = level_loss ? ad::add(*level_loss, t) : t;
      }
    }
    if (!level_loss) {
      throw DataError("compose_loss: no prediction or reconstruction for level " +
                      std::to_string(l));
    }
    out.weighted[l] = weights.alpha[i] * level_loss->item();
    terms.push_back(*level_loss);
    alphas.push_back(weights.alpha[i]);
  }
  out.total = ad::weighted_sum(terms, alphas);
  return out;
}

namespace {

LevelMatrices gather_truths(const LevelFrames& split, std::span<const std::size_t> levels,
                            std::span<const std::size_t> rows) {
  LevelMatrices out;
  for (std::size_t l : levels) out[l] = gather_rows(split.at(l).counts, rows);
  return out;
}

struct TaskContext {
  std::size_t source;
  std::size_t target;
  LevelWeights weights;
};

TaskContext task_context(const Model& model, const GeoHierarchy& h, const LossScheme& scheme) {
  scheme.validate();
  if (scheme.cot != model.spec().cot) {
    throw ConfigError("scheme '" + scheme.label() + "' does not match a " +
                      std::string(model.spec().cot ? "COT" : "plain") + " model");
  }
  return {model.source_level(), model.target_level(),
          scheme_weights(scheme, h, model.source_level(), model.predicted_levels())};
}

LossTerms batch_loss(const Model& model, const LevelFrames& split, const GeoHierarchy& h,
                     const LossScheme& scheme, const TaskContext& ctx,
                     std::span<const std::size_t> labels, ad::Tape* tape) {
  const auto batch = make_batch(split.at(ctx.source).counts, labels, model.spec().window);
  const auto out = model.forward(batch, tape);
  const auto rec = reconstruct(out, h, ctx.source, scheme.rec);
  const auto truths = gather_truths(split, ctx.weights.levels, labels);
  return compose_loss(out, rec, truths, scheme, ctx.weights, ctx.target);
}

}  // namespace

LossTerms split_loss(const Model& model, const LevelFrames& split, const GeoHierarchy& h,
                     const LossScheme& scheme) {
  const auto ctx = task_context(model, h, scheme);
  const auto labels = window_labels(split.at(ctx.source).hours(), model.spec().window);
  return batch_loss(model, split, h, scheme, ctx, labels, nullptr);
}

TrainResult train(Model model, const SplitSet& splits, const GeoHierarchy& h,
                  const LossScheme& scheme, const TrainConfig& cfg) {
  cfg.validate();
  const auto ctx = task_context(model, h, scheme);
  const std::size_t rows = splits.train.at(ctx.source).hours();
  if (rows == 0) throw DataError("training split is empty");

  ad::OptimizerState opt;
  opt.config.learning_rate = cfg.learning_rate;
  auto params = model.parameters();
  ad::Tape tape;

  TrainResult result{model, {}, 0, 0};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto batches = window_batches(rows, model.spec().window, cfg.batch_size, cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t samples = 0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      tape.reset();
      auto terms = batch_loss(model, splits.train, h, scheme, ctx, batches[step], &tape);
      const double value = terms.total.item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step + 1));
      }
      tape.backward(terms.total);
      try {
        ad::optimizer_step(params, opt);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
      }
      model.zero_grad();
      loss_sum += value * static_cast<double>(batches[step].size());
      samples += batches[step].size();
    }
    const double val = split_loss(model, splits.val, h, scheme).total.item();
    if (!std::isfinite(val)) {
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(samples), val});
    result.epochs_run = epoch;
    if (val < best) {
      best = val;
      since_best = 0;
      result.best_epoch = epoch;
      result.model = model;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  tape.reset();
  return result;
}

EvalReport evaluate(const Matrix& prediction, const Matrix& truth, std::span<const double> areas,
                    bool clamp) {
  if (prediction.rows() != truth.rows() || prediction.cols() != truth.cols()) {
    throw DataError("evaluate: prediction and truth are misaligned");
  }
  if (static_cast<std::size_t>(truth.cols()) != areas.size()) {
    throw DataError("evaluate: area vector does not match unit count");
  }
  if (truth.size() == 0) throw DataError("evaluate: no rows");
  const Matrix pred = clamp ? Matrix(prediction.cwiseMax(0.0)) : prediction;
  const Matrix err = (pred - truth).cwiseAbs();
  EvalReport r;
  r.mae_raw = err.mean();
  double per_area = 0.0;
  for (Eigen::Index u = 0; u < err.cols(); ++u) per_area += err.col(u).sum() / areas[static_cast<std::size_t>(u)];
  r.mae_per_area = per_area / static_cast<double>(err.size());
  return r;
}

Matrix predict_split(const Model& model, const LevelFrames& split) {
  const auto& src = split.at(model.source_level()).counts;
  const auto labels = window_labels(static_cast<std::size_t>(src.rows()), model.spec().window);
  return model.predict(make_batch(src, labels, model.spec().window));
}

EvalReport evaluate_model(const Model& model, const LevelFrames& test, const GeoHierarchy& h,
                          const LossScheme& scheme, bool clamp) {
  const auto& truth_full = test.at(model.target_level()).counts;
  const auto labels = window_labels(static_cast<std::size_t>(truth_full.rows()), model.spec().window);
  auto report = evaluate(predict_split(model, test), gather_rows(truth_full, labels),
                         h.level(model.target_level()).unit_area, clamp);
  for (const auto& [level, value] : split_loss(model, test, h, scheme).weighted) {
    report.level_terms[h.level(level).name] = value;
  }
  return report;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& e : history) {
    out += std::to_string(e.epoch) + "," + util::format_double(e.train_loss) + "," +
           util::format_double(e.val_loss) + "\n";
  }
  return out;
}

}  // namespace disagg
