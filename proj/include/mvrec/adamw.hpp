#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvrec/error.hpp"

namespace mvrec {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Optimizer state for one parameter block. Moments are sized lazily on the
/// first step.
template <typename T>
struct AdamWState {
  AdamWConfig config;
  std::size_t step = 0;
  std::vector<T> m;
  std::vector<T> v;

  AdamWState() = default;
  explicit AdamWState(AdamWConfig cfg) : config(cfg) {}
};

/// One decoupled-weight-decay Adam update, in place:
///   p <- p - lr*wd*p
///   m <- b1 m + (1-b1) g ;  v <- b2 v + (1-b2) g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grads, AdamWState<T>& state) {
  require(params.size() == grads.size(), ErrorCode::ShapeMismatch,
          "adamw_step: " + std::to_string(params.size()) + " params vs " +
              std::to_string(grads.size()) + " grads");
  if (state.m.empty() && state.step == 0) {
    state.m.assign(params.size(), T{0});
    state.v.assign(params.size(), T{0});
  }
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorCode::ShapeMismatch, "adamw_step: optimizer state shape differs from params");

  const auto& c = state.config;
  ++state.step;
  const T b1 = T(c.beta1), b2 = T(c.beta2);
  const T bc1 = T{1} - static_cast<T>(std::pow(c.beta1, static_cast<double>(state.step)));
  const T bc2 = T{1} - static_cast<T>(std::pow(c.beta2, static_cast<double>(state.step)));
  const T lr = T(c.lr), eps = T(c.eps), decay = T(c.lr * c.weight_decay);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    if (decay != T{0}) params[i] -= decay * params[i];
    state.m[i] = b1 * state.m[i] + (T{1} - b1) * g;
    state.v[i] = b2 * state.v[i] + (T{1} - b2) * g * g;
    const T m_hat = state.m[i] / bc1;
    const T v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace mvrec
