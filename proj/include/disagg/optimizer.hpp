// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "disagg/autodiff.hpp"

namespace disagg::ad {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One bias-corrected adaptive-moment update over `params` using their
/// accumulated gradients. A non-finite gradient raises NumericalError
/// naming the step and parameter; parameters are left untouched in that case.
void optimizer_step(std::span<Parameter* const> params, OptimizerState& state);

}  // namespace disagg::ad
