// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "disagg/autodiff.hpp"
#include "disagg/count_frame.hpp"
#include "disagg/geo_hierarchy.hpp"

namespace disagg {

enum class Family { FNN, LSTM };

std::string to_string(Family f);
Family parse_family(const std::string& s);

struct ModelSpec {
  Family family = Family::FNN;
  std::string source;
  std::string target;
  bool cot = false;
  /// Filled by resolve() under COT: every level strictly between source and target.
  std::vector<std::string> intermediates;
  /// Plain-mode hidden widths (dense head after the encoder for LSTM).
  std::vector<std::size_t> hidden_widths;
  std::size_t lstm_hidden = 128;
  /// Temporal window T. FNN always uses 1.
  std::size_t window = 1;

  /// Checks the spec against the hierarchy and fills intermediates for COT.
  /// Throws ConfigError when declared intermediates are not the in-between levels.
  ModelSpec resolved(const GeoHierarchy& h) const;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

/// T consecutive source-level row blocks (each batch x d_source), oldest first.
struct Batch {
  std::vector<Matrix> steps;

  Eigen::Index size() const { return steps.empty() ? 0 : steps.back().rows(); }
};

/// Prediction per level index. The target is always present; under COT each
/// intermediate level's hidden activation is exposed as that level's prediction.
using ModelOutput = std::map<std::size_t, ad::Tensor>;

class Model {
 public:
  Model(ModelSpec spec, const GeoHierarchy& h, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::size_t source_level() const { return source_; }
  std::size_t target_level() const { return target_; }
  /// Levels whose predictions the model emits, coarse -> fine.
  const std::vector<std::size_t>& predicted_levels() const { return predicted_; }
  /// Dense layer widths from head input to output.
  const std::vector<std::size_t>& head_widths() const { return widths_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  void zero_grad();

  /// Sets every weight and bias of the last dense layer to zero.
  void zero_output_layer();

  /// Records onto `tape` when given; otherwise a pure inference pass.
  ModelOutput forward(const Batch& batch, ad::Tape* tape = nullptr) const;

  /// Target-level prediction rows for plain inference.
  Matrix predict(const Batch& batch) const;

 private:
  struct Dense {
    ad::Parameter weight;
    ad::Parameter bias;
  };

  ModelSpec spec_;
  std::size_t source_ = 0;
  std::size_t target_ = 0;
  std::size_t source_dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::size_t> predicted_;
  std::vector<std::size_t> widths_;
  // LSTM encoder
  ad::Parameter lstm_w_input_;
  ad::Parameter lstm_w_hidden_;
  ad::Parameter lstm_bias_;
  std::vector<Dense> head_;
};

Model build_model(const ModelSpec& spec, const GeoHierarchy& h, std::uint64_t seed);

/// Label rows usable with a window of T: T-1 .. rows-1.
std::vector<std::size_t> window_labels(std::size_t rows, std::size_t window);

/// Shuffled mini-batches of label-row indices for one epoch. Shuffling is
/// seeded by (seed, epoch).
std::vector<std::vector<std::size_t>> window_batches(std::size_t rows, std::size_t window,
                                                     std::size_t batch_size, std::uint64_t seed,
                                                     std::size_t epoch);

/// Gathers the T-row windows ending at each label row of `source`.
Batch make_batch(const Matrix& source, std::span<const std::size_t> labels, std::size_t window);

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

}  // namespace disagg
