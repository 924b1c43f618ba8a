#include "tractshape/optim.hpp"

#include <cmath>

#include "tractshape/error.hpp"

namespace tractshape::ad {

AdamState make_adam_state(std::span<const Tensor> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0f);
    state.second_moment.emplace_back(p.numel(), 0.0f);
  }
  return state;
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<float>> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step: parameter/gradient/state counts differ");
  }
  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  const auto b1 = static_cast<float>(cfg.beta1);
  const auto b2 = static_cast<float>(cfg.beta2);
  const auto wd = static_cast<float>(cfg.weight_decay);
  const auto step_size = static_cast<float>(cfg.learning_rate / bias1);
  const auto sqrt_bias2 = static_cast<float>(std::sqrt(bias2));
  const auto eps = static_cast<float>(cfg.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_values();
    const auto& g = grads[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (g.size() != p.size() || m.size() != p.size()) {
      throw Error(ErrorCode::ShapeMismatch, "adam_step: buffer size mismatch for parameter " + std::to_string(i));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float gj = g[j] + wd * p[j];
      m[j] = b1 * m[j] + (1.0f - b1) * gj;
      v[j] = b2 * v[j] + (1.0f - b2) * gj * gj;
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) / sqrt_bias2 + eps);
    }
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  std::vector<std::vector<float>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.grad().begin(), p.grad().end());
  adam_step(params, grads, state);
}

double scheduler_lr(double initial_lr, std::size_t step_index, double gamma, std::size_t step_size) {
  if (step_size == 0) throw Error(ErrorCode::InvalidArgument, "scheduler step_size must be positive");
  return initial_lr * std::pow(gamma, static_cast<double>(step_index / step_size));
}

}  // namespace tractshape::ad
