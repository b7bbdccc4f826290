// SPDX-License-Identifier: Apache-2.0
#include "disagg/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace disagg::ad {

namespace {

std::string shape_of(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape() + " vs " +
                              b.shape());
}

Tape* tape_of(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->requires_grad()) continue;
    if (t->tape() == nullptr) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw std::invalid_argument("tensors recorded on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

struct Output {
  std::shared_ptr<Node> node;
  Tape* tape;

  Tensor tensor() const { return Tensor(node, tape); }
  bool recording() const { return tape != nullptr; }
};

Output make_output(Matrix value, std::initializer_list<const Tensor*> inputs) {
  Tape* tape = tape_of(inputs);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = tape != nullptr;
  return {std::move(node), tape};
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

std::string Tensor::shape() const { return node_ ? shape_of(node_->value) : "(null)"; }

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw std::invalid_argument("item(): tensor is not scalar " + shape());
  }
  return node_->value(0, 0);
}

Tensor constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node), nullptr);
}

Parameter::Parameter(std::string name, Matrix value) : name_(std::move(name)) {
  node_->value = std::move(value);
  node_->requires_grad = true;
}

Parameter::Parameter(const Parameter& other)
    : name_(other.name_), node_(std::make_shared<Node>(*other.node_)) {}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) {
    name_ = other.name_;
    node_ = std::make_shared<Node>(*other.node_);
  }
  return *this;
}

Matrix Parameter::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

Tensor Tape::watch(const Parameter& p) { return Tensor(p.node(), this); }

Tensor Tape::leaf(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node), this);
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::logic_error("backward called twice without reset");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + loss.shape());
  }
  if (entries_.empty() || !loss.requires_grad()) {
    throw std::logic_error("backward: nothing recorded on the tape");
  }
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  consumed_ = true;
  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  auto out = make_output(a.value() * b.value(), {&a, &b});
  if (out.recording()) {
    out.tape->record([an = a.node(), bn = b.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      if (an->requires_grad) an->accumulate(on->grad * bn->value.transpose());
      if (bn->requires_grad) bn->accumulate(an->value.transpose() * on->grad);
    });
  }
  return out.tensor();
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a, b);
  auto out = make_output(a.value() + b.value(), {&a, &b});
  if (out.recording()) {
    out.tape->record([an = a.node(), bn = b.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      an->accumulate(on->grad);
      bn->accumulate(on->grad);
    });
  }
  return out.tensor();
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a, b);
  auto out = make_output(a.value() - b.value(), {&a, &b});
  if (out.recording()) {
    out.tape->record([an = a.node(), bn = b.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      an->accumulate(on->grad);
      if (bn->requires_grad) bn->accumulate(-on->grad);
    });
  }
  return out.tensor();
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
  Matrix v = a.value().cwiseProduct(b.value());
  auto out = make_output(std::move(v), {&a, &b});
  if (out.recording()) {
    out.tape->record([an = a.node(), bn = b.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      if (an->requires_grad) an->accumulate(on->grad.cwiseProduct(bn->value));
      if (bn->requires_grad) bn->accumulate(on->grad.cwiseProduct(an->value));
    });
  }
  return out.tensor();
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_error("add_bias", x, bias);
  Matrix v = x.value().rowwise() + bias.value().row(0);
  auto out = make_output(std::move(v), {&x, &bias});
  if (out.recording()) {
    out.tape->record([xn = x.node(), bn = bias.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      xn->accumulate(on->grad);
      if (bn->requires_grad) bn->accumulate(on->grad.colwise().sum());
    });
  }
  return out.tensor();
}

Tensor relu(const Tensor& x) {
  auto out = make_output(x.value().cwiseMax(0.0), {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      xn->accumulate((xn->value.array() > 0.0).select(on->grad, 0.0));
    });
  }
  return out.tensor();
}

Tensor sigmoid(const Tensor& x) {
  Matrix v = x.value().unaryExpr([](double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  });
  auto out = make_output(std::move(v), {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      const auto& s = on->value.array();
      xn->accumulate((on->grad.array() * s * (1.0 - s)).matrix());
    });
  }
  return out.tensor();
}

Tensor tanh(const Tensor& x) {
  Matrix v = x.value().array().tanh().matrix();
  auto out = make_output(std::move(v), {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      const auto& t = on->value.array();
      xn->accumulate((on->grad.array() * (1.0 - t * t)).matrix());
    });
  }
  return out.tensor();
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) shape_error("concat_cols", parts[0], p);
    cols += p.cols();
  }
  Matrix v(parts[0].rows(), cols);
  Eigen::Index at = 0;
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    Tape* t = tape_of({&p});
    if (t != nullptr) {
      if (tape != nullptr && tape != t) throw std::invalid_argument("tensors recorded on different tapes");
      tape = t;
    }
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(v);
  node->requires_grad = tape != nullptr;
  if (tape != nullptr) {
    std::vector<std::shared_ptr<Node>> inputs;
    for (const auto& p : parts) inputs.push_back(p.node());
    tape->record([inputs = std::move(inputs), on = node] {
      if (on->grad.size() == 0) return;
      Eigen::Index at = 0;
      for (const auto& in : inputs) {
        const auto c = in->value.cols();
        if (in->requires_grad) in->accumulate(on->grad.middleCols(at, c));
        at += c;
      }
    });
  }
  return Tensor(std::move(node), tape);
}

Tensor slice_cols(const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.cols()) {
    throw std::invalid_argument("slice_cols: [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") outside " + x.shape());
  }
  auto out = make_output(x.value().middleCols(begin, count), {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node, begin, count] {
      if (on->grad.size() == 0) return;
      Matrix g = Matrix::Zero(xn->value.rows(), xn->value.cols());
      g.middleCols(begin, count) = on->grad;
      xn->accumulate(g);
    });
  }
  return out.tensor();
}

Tensor scalar_mul(const Tensor& x, double s) {
  auto out = make_output(x.value() * s, {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node, s] {
      if (on->grad.size() == 0) return;
      xn->accumulate(on->grad * s);
    });
  }
  return out.tensor();
}

Tensor scalar_div(const Tensor& x, double s) {
  if (s == 0.0) throw std::invalid_argument("scalar_div: division by zero");
  auto out = make_output(x.value() / s, {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node, s] {
      if (on->grad.size() == 0) return;
      xn->accumulate(on->grad / s);
    });
  }
  return out.tensor();
}

Tensor sum(const Tensor& x) {
  auto out = make_output(Matrix::Constant(1, 1, x.value().sum()), {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      xn->accumulate(Matrix::Constant(xn->value.rows(), xn->value.cols(), on->grad(0, 0)));
    });
  }
  return out.tensor();
}

Tensor mean(const Tensor& x) {
  if (x.value().size() == 0) throw std::invalid_argument("mean: empty tensor");
  const double n = static_cast<double>(x.value().size());
  auto out = make_output(Matrix::Constant(1, 1, x.value().sum() / n), {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node, n] {
      if (on->grad.size() == 0) return;
      xn->accumulate(Matrix::Constant(xn->value.rows(), xn->value.cols(), on->grad(0, 0) / n));
    });
  }
  return out.tensor();
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor abs(const Tensor& x) {
  auto out = make_output(x.value().cwiseAbs(), {&x});
  if (out.recording()) {
    out.tape->record([xn = x.node(), on = out.node] {
      if (on->grad.size() == 0) return;
      xn->accumulate(on->grad.cwiseProduct(xn->value.unaryExpr(&sign)));
    });
  }
  return out.tensor();
}

Tensor group_sum(const Tensor& x, std::span<const std::size_t> parent_of, std::size_t groups) {
  if (static_cast<std::size_t>(x.cols()) != parent_of.size()) {
    throw std::invalid_argument("group_sum: input " + x.shape() + " vs " +
                                std::to_string(parent_of.size()) + " group assignments");
  }
  Matrix v = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(groups));
  for (std::size_t c = 0; c < parent_of.size(); ++c) {
    if (parent_of[c] >= groups) throw std::invalid_argument("group_sum: group index out of range");
    v.col(static_cast<Eigen::Index>(parent_of[c])) += x.value().col(static_cast<Eigen::Index>(c));
  }
  auto out = make_output(std::move(v), {&x});
  if (out.recording()) {
    std::vector<std::size_t> parents(parent_of.begin(), parent_of.end());
    out.tape->record([xn = x.node(), on = out.node, parents = std::move(parents)] {
      if (on->grad.size() == 0) return;
      Matrix g(xn->value.rows(), xn->value.cols());
      for (std::size_t c = 0; c < parents.size(); ++c) {
        g.col(static_cast<Eigen::Index>(c)) = on->grad.col(static_cast<Eigen::Index>(parents[c]));
      }
      xn->accumulate(g);
    });
  }
  return out.tensor();
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    shape_error("l1_loss", pred, target);
  }
  return mean(abs(sub(pred, target)));
}

Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: " + std::to_string(terms.size()) + " terms vs " +
                                std::to_string(weights.size()) + " weights");
  }
  Tensor total = scalar_mul(terms[0], weights[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, scalar_mul(terms[i], weights[i]));
  return total;
}

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmParams& p) {
  const Eigen::Index hidden = p.w_hidden.rows();
  if (p.w_input.rows() != x.cols() || p.w_input.cols() != 4 * hidden) {
    shape_error("lstm_cell input weights", x, p.w_input);
  }
  if (p.w_hidden.cols() != 4 * hidden) shape_error("lstm_cell hidden weights", prev.h, p.w_hidden);
  if (prev.h.cols() != hidden || prev.c.cols() != hidden || prev.h.rows() != x.rows() ||
      prev.c.rows() != x.rows()) {
    shape_error("lstm_cell state", prev.h, prev.c);
  }
  Tensor gates = add_bias(add(matmul(x, p.w_input), matmul(prev.h, p.w_hidden)), p.bias);
  Tensor in_gate = sigmoid(slice_cols(gates, 0, hidden));
  Tensor forget_gate = sigmoid(slice_cols(gates, hidden, hidden));
  Tensor candidate = tanh(slice_cols(gates, 2 * hidden, hidden));
  Tensor out_gate = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  Tensor c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  Tensor h = mul(out_gate, tanh(c));
  return {h, c};
}

}  // namespace disagg::ad
