// SPDX-License-Identifier: Apache-2.0
//
// Dense reverse-mode automatic differentiation over 2-D double matrices.
//
// A Tape records every primitive whose inputs require gradients, together
// with a closure that pushes the output gradient back to the inputs.
// Parameters live outside any tape; Tape::watch() exposes one as a leaf whose
// gradient accumulates into the parameter across backward passes until
// Parameter::zero_grad(). A tape may be replayed backwards once; call
// reset() before recording the next step.
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "disagg/geo_hierarchy.hpp"

namespace disagg::ad {

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient reaches the node
  bool requires_grad = false;

  void accumulate(const Matrix& g);
};

class Tape;

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::shared_ptr<Node> node, Tape* tape) : node_(std::move(node)), tape_(tape) {}

  const Matrix& value() const { return node_->value; }
  /// Zero-size when no gradient has been propagated.
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::string shape() const;
  double item() const;

  Tape* tape() const { return tape_; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
  Tape* tape_ = nullptr;
};

/// Constant (no gradient) tensor, usable with any tape.
Tensor constant(Matrix value);

class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Matrix value);
  // Copies own their storage; a copied model never aliases the original.
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const { return name_; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Zero matrix of the parameter's shape when no gradient is present.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::string name_;
  std::shared_ptr<Node> node_ = std::make_shared<Node>();
};

class Tape {
 public:
  using Backward = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf referencing the parameter's storage.
  Tensor watch(const Parameter& p);
  /// Fresh leaf tensor that records gradients.
  Tensor leaf(Matrix value);

  /// Propagates d(loss)/d(.) to every recorded node. Loss must be 1x1.
  void backward(const Tensor& loss);
  void reset();

  std::size_t size() const { return entries_.size(); }
  void record(Backward fn) { entries_.push_back(std::move(fn)); }

 private:
  std::vector<Backward> entries_;
  bool consumed_ = false;
};

// Primitives. Shape errors throw std::invalid_argument naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor add_bias(const Tensor& x, const Tensor& bias);  // bias is 1 x cols
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, Eigen::Index begin, Eigen::Index count);
Tensor scalar_mul(const Tensor& x, double s);
/// x / s; exact for averages of integer-valued sums, unlike x * (1/s).
Tensor scalar_div(const Tensor& x, double s);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor abs(const Tensor& x);

/// Column-group summation: out[:, parent_of[c]] += x[:, c]. This is the
/// differentiable form of applying an AggregationMatrix to every row.
Tensor group_sum(const Tensor& x, std::span<const std::size_t> parent_of, std::size_t groups);

/// Mean absolute error over all entries; subgradient sign(0) = 0.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// Sum of w_i * terms_i for 1x1 terms.
Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights);

struct LstmParams {
  Tensor w_input;   // d_in x 4H, gate order [input, forget, candidate, output]
  Tensor w_hidden;  // H x 4H
  Tensor bias;      // 1 x 4H
};

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmParams& p);

}  // namespace disagg::ad
