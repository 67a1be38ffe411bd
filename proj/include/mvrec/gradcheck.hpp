#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mvrec/error.hpp"

namespace mvrec {

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference gradient check.
///
/// `loss` maps a parameter vector to a scalar; `analytic` is its claimed
/// gradient at `params`. The per-entry error is
///   |a - n| / max(|a|, |n|, floor)
/// so entries whose true gradient is ~0 are compared in absolute terms.
template <typename LossFn>
GradientCheckResult check_gradients(LossFn&& loss, std::vector<double> params,
                                    std::span<const double> analytic, double epsilon = 1e-6,
                                    double floor = 1e-6) {
  require(epsilon >= 1e-7 && epsilon <= 1e-3, ErrorCode::InvalidArgument,
          "check_gradients epsilon outside [1e-7, 1e-3]");
  require(analytic.size() == params.size(), ErrorCode::ShapeMismatch,
          "check_gradients: gradient length differs from params");
  GradientCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss(std::span<const double>(params));
    params[i] = saved - epsilon;
    const double down = loss(std::span<const double>(params));
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

/// Overload for a callable returning {value, gradient}.
template <typename ValueAndGrad>
GradientCheckResult check_gradients_vg(ValueAndGrad&& fn, const std::vector<double>& params,
                                       double epsilon = 1e-6, double floor = 1e-6) {
  const auto [value, grad] = fn(std::span<const double>(params));
  (void)value;
  return check_gradients([&](std::span<const double> p) { return fn(p).first; }, params,
                         std::span<const double>(grad), epsilon, floor);
}

}  // namespace mvrec
