#pragma once

#include <functional>

#include "hmad/tensor.hpp"

namespace hmad {

using ScalarFn = std::function<double(const Tensor&)>;
using GradientFn = std::function<Tensor(const Tensor&)>;

// Compares an analytic gradient with central differences at `point`.
// Returns max_i |analytic_i - numeric_i| / max(1, |numeric_i|), or +infinity
// when the function or the analytic gradient produces a non-finite value.
double grad_check(const ScalarFn& fn, const GradientFn& analytic_grad, const Tensor& point,
                  double eps);

}  // namespace hmad
