#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tractshape/autodiff.hpp"

namespace tractshape::ad {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // coupled L2: added to the gradient before the moment update
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::int64_t step = 0;
};

AdamState make_adam_state(std::span<const Tensor> params, const AdamConfig& config);

/// One bias-corrected Adam update of every parameter from the matching
/// gradient buffer, at state.config.learning_rate.
void adam_step(std::span<Tensor> params, std::span<const std::vector<float>> grads, AdamState& state);

/// Same, reading each parameter's own accumulated gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Step decay: initial_lr * gamma^floor(step_index / step_size).
double scheduler_lr(double initial_lr, std::size_t step_index, double gamma = 0.1, std::size_t step_size = 200);

}  // namespace tractshape::ad
