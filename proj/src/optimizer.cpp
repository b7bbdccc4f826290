// SPDX-License-Identifier: Apache-2.0
#include "disagg/optimizer.hpp"

#include <cmath>

#include "disagg/error.hpp"

namespace disagg::ad {

void optimizer_step(std::span<Parameter* const> params, OptimizerState& state) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
      state.second_moment.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: parameter count changed");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params[i]->value();
    if (state.first_moment[i].rows() != v.rows() || state.first_moment[i].cols() != v.cols()) {
      throw std::invalid_argument("optimizer_step: shape of '" + params[i]->name() + "' changed");
    }
    if (params[i]->has_grad() && !params[i]->grad().allFinite()) {
      throw NumericalError("non-finite gradient for '" + params[i]->name() + "' at step " +
                           std::to_string(state.step + 1));
    }
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix g = params[i]->grad();
    auto& m = state.first_moment[i];
    auto& s = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    s = c.beta2 * s + (1.0 - c.beta2) * g.cwiseProduct(g);
    params[i]->mutable_value().array() -=
        c.learning_rate * (m.array() / correction1) /
        ((s.array() / correction2).sqrt() + c.epsilon);
  }
}

}  // namespace disagg::ad
