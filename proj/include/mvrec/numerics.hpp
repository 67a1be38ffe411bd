#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "mvrec/error.hpp"
#include "mvrec/tensor.hpp"

namespace mvrec {

inline constexpr double kZeroNormThreshold = 1e-12;

/// Cosine similarity clamped to [-1, 1]. Throws ZeroVector for degenerate
/// inputs instead of returning NaN.
template <typename T>
T cosine_sim(std::span<const T> a, std::span<const T> b) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::ShapeMismatch,
          "cosine_sim lengths " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  const T na = norm(a);
  const T nb = norm(b);
  require(na >= T(kZeroNormThreshold) && nb >= T(kZeroNormThreshold), ErrorCode::ZeroVector,
          "cosine_sim on a zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), T{-1}, T{1});
}

/// Accumulates scale * d cos(a, b) / d a into grad_a.
///   d cos / d a = b / (|a||b|) - cos * a / |a|^2
template <typename T>
void accumulate_cosine_grad(std::span<const T> a, std::span<const T> b, T na, T nb, T cos,
                            T scale, std::span<T> grad_a) {
  const T inv_ab = T{1} / (na * nb);
  const T inv_aa = cos / (na * na);
  for (std::size_t k = 0; k < a.size(); ++k) grad_a[k] += scale * (b[k] * inv_ab - a[k] * inv_aa);
}

/// Similarity modulation exp(-beta (1 - x)); beta sets the sharpness.
template <typename T>
T psi(T x, T beta) {
  return std::exp(-beta * (T{1} - x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
T silu(T x) {
  return x * sigmoid(x);
}

template <typename T>
T silu_grad(T x) {
  const T s = sigmoid(x);
  return s * (T{1} + x * (T{1} - s));
}

/// Index of the largest value; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace mvrec
