// SPDX-License-Identifier: Apache-2.0
#include "disagg/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "disagg/error.hpp"

namespace disagg {

std::string to_string(Family f) { return f == Family::FNN ? "FNN" : "LSTM"; }

Family parse_family(const std::string& s) {
  if (s == "FNN") return Family::FNN;
  if (s == "LSTM") return Family::LSTM;
  throw ConfigError("unknown model family '" + s + "'");
}

ModelSpec ModelSpec::resolved(const GeoHierarchy& h) const {
  ModelSpec out = *this;
  const auto src = h.level_index(source);
  const auto tgt = h.level_index(target);
  if (tgt <= src) {
    throw ConfigError("target level '" + target + "' is not below source '" + source + "'");
  }
  if (family == Family::FNN) out.window = 1;
  if (out.window < 1) throw ConfigError("window T must be >= 1");
  if (family == Family::LSTM && out.lstm_hidden == 0) throw ConfigError("lstm_hidden must be > 0");
  if (cot) {
    std::vector<std::string> between;
    for (std::size_t l = src + 1; l < tgt; ++l) between.push_back(h.level(l).name);
    if (!intermediates.empty() && intermediates != between) {
      throw ConfigError("COT intermediates must be exactly the levels between '" + source +
                        "' and '" + target + "'");
    }
    out.intermediates = std::move(between);
  } else if (!intermediates.empty()) {
    throw ConfigError("intermediate levels are only meaningful with COT");
  }
  for (std::size_t w : out.hidden_widths) {
    if (w == 0) throw ConfigError("hidden widths must be positive");
  }
  return out;
}

nlohmann::json ModelSpec::to_json() const {
  return {{"family", to_string(family)}, {"source", source},
          {"target", target},            {"cot", cot},
          {"intermediates", intermediates}, {"hidden_widths", hidden_widths},
          {"lstm_hidden", lstm_hidden},  {"window", window}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.family = parse_family(j.at("family").get<std::string>());
    s.source = j.at("source").get<std::string>();
    s.target = j.at("target").get<std::string>();
    s.cot = j.value("cot", false);
    s.intermediates = j.value("intermediates", std::vector<std::string>{});
    s.hidden_widths = j.value("hidden_widths", std::vector<std::size_t>{});
    s.lstm_hidden = j.value("lstm_hidden", std::size_t{128});
    s.window = j.value("window", std::size_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture descriptor: ") + e.what());
  }
  return s;
}

namespace {

Matrix uniform_init(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

Model::Model(ModelSpec spec, const GeoHierarchy& h, std::uint64_t seed)
    : spec_(spec.resolved(h)), seed_(seed) {
  source_ = h.level_index(spec_.source);
  target_ = h.level_index(spec_.target);
  source_dim_ = h.level(source_).size();

  std::mt19937_64 rng(seed);
  std::size_t head_in = source_dim_;
  if (spec_.family == Family::LSTM) {
    const std::size_t hid = spec_.lstm_hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(source_dim_ + hid));
    lstm_w_input_ = ad::Parameter("encoder.w_input", uniform_init(source_dim_, 4 * hid, bound, rng));
    lstm_w_hidden_ = ad::Parameter("encoder.w_hidden", uniform_init(hid, 4 * hid, bound, rng));
    lstm_bias_ = ad::Parameter("encoder.bias", uniform_init(1, 4 * hid, bound, rng));
    head_in = hid;
  }

  widths_.push_back(head_in);
  if (spec_.cot) {
    for (const auto& name : spec_.intermediates) {
      const auto l = h.level_index(name);
      widths_.push_back(h.level(l).size());
      predicted_.push_back(l);
    }
  } else {
    widths_.insert(widths_.end(), spec_.hidden_widths.begin(), spec_.hidden_widths.end());
  }
  widths_.push_back(h.level(target_).size());
  predicted_.push_back(target_);

  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[i]));
    const auto prefix = "head." + std::to_string(i) + ".";
    head_.push_back({ad::Parameter(prefix + "weight", uniform_init(widths_[i], widths_[i + 1], bound, rng)),
                     ad::Parameter(prefix + "bias", uniform_init(1, widths_[i + 1], bound, rng))});
  }
}

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out;
  if (spec_.family == Family::LSTM) {
    out.push_back(&lstm_w_input_);
    out.push_back(&lstm_w_hidden_);
    out.push_back(&lstm_bias_);
  }
  for (auto& d : head_) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  return out;
}

std::vector<const ad::Parameter*> Model::parameters() const {
  auto mut = const_cast<Model*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

void Model::zero_output_layer() {
  head_.back().weight.mutable_value().setZero();
  head_.back().bias.mutable_value().setZero();
}

ModelOutput Model::forward(const Batch& batch, ad::Tape* tape) const {
  const auto use = [tape](const ad::Parameter& p) {
    return tape != nullptr ? tape->watch(p) : ad::Tensor(p.node(), nullptr);
  };
  if (batch.steps.size() != spec_.window) {
    throw DataError("forward: batch carries " + std::to_string(batch.steps.size()) +
                    " time steps, model window is " + std::to_string(spec_.window));
  }
  for (const auto& step : batch.steps) {
    if (static_cast<std::size_t>(step.cols()) != source_dim_ || step.rows() != batch.size()) {
      throw DataError("forward: batch width " + std::to_string(step.cols()) +
                      " does not match source dimension " + std::to_string(source_dim_));
    }
  }
  const Eigen::Index rows = batch.size();

  ad::Tensor x;
  if (spec_.family == Family::LSTM) {
    const auto hid = static_cast<Eigen::Index>(spec_.lstm_hidden);
    ad::LstmParams p{use(lstm_w_input_), use(lstm_w_hidden_), use(lstm_bias_)};
    ad::LstmState state{ad::constant(Matrix::Zero(rows, hid)), ad::constant(Matrix::Zero(rows, hid))};
    for (const auto& step : batch.steps) state = ad::lstm_cell(ad::constant(step), state, p);
    x = state.h;
  } else {
    x = ad::constant(batch.steps.back());
  }

  ModelOutput out;
  for (std::size_t i = 0; i < head_.size(); ++i) {
    x = ad::add_bias(ad::matmul(x, use(head_[i].weight)), use(head_[i].bias));
    const bool last = i + 1 == head_.size();
    if (!last) {
      x = ad::relu(x);
      if (spec_.cot) out[predicted_[i]] = x;
    }
  }
  out[target_] = x;
  return out;
}

Matrix Model::predict(const Batch& batch) const { return forward(batch).at(target_).value(); }

Model build_model(const ModelSpec& spec, const GeoHierarchy& h, std::uint64_t seed) {
  return Model(spec, h, seed);
}

std::vector<std::size_t> window_labels(std::size_t rows, std::size_t window) {
  if (window == 0) throw ConfigError("window T must be >= 1");
  if (rows < window) {
    throw DataError("frame has " + std::to_string(rows) + " rows, shorter than window T=" +
                    std::to_string(window));
  }
  std::vector<std::size_t> out(rows - window + 1);
  std::iota(out.begin(), out.end(), window - 1);
  return out;
}

std::vector<std::vector<std::size_t>> window_batches(std::size_t rows, std::size_t window,
                                                     std::size_t batch_size, std::uint64_t seed,
                                                     std::size_t epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  auto labels = window_labels(rows, window);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(labels.begin(), labels.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < labels.size(); i += batch_size) {
    const auto end = std::min(labels.size(), i + batch_size);
    batches.emplace_back(labels.begin() + static_cast<std::ptrdiff_t>(i),
                         labels.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Batch make_batch(const Matrix& source, std::span<const std::size_t> labels, std::size_t window) {
  Batch b;
  for (std::size_t k = 0; k < window; ++k) {
    const std::size_t back = window - 1 - k;
    std::vector<std::size_t> rows(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < back || labels[i] >= static_cast<std::size_t>(source.rows())) {
        throw DataError("make_batch: label row " + std::to_string(labels[i]) +
                        " has no full window");
      }
      rows[i] = labels[i] - back;
    }
    b.steps.push_back(gather_rows(source, rows));
  }
  return b;
}

}  // namespace disagg
