#include "hmad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hmad {

double grad_check(const ScalarFn& fn, const GradientFn& analytic_grad, const Tensor& point,
                  double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  constexpr double inf = std::numeric_limits<double>::infinity();

  const Tensor analytic = analytic_grad(point);
  if (analytic.shape() != point.shape()) {
    throw ShapeError("grad_check: analytic gradient shape " + to_string(analytic.shape()) +
                     " != point shape " + to_string(point.shape()));
  }

  Tensor probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double up = fn(probe);
    probe[i] = point[i] - eps;
    const double down = fn(probe);
    probe[i] = point[i];
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[i])) return inf;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace hmad
