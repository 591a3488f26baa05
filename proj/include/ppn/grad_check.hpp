#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "ppn/tensor.hpp"

namespace ppn {

/// Scalar objective that also writes its analytic gradient into `grad`
/// (same shape as the point) when `grad` is non-null.
template <typename Scalar>
using Objective = std::function<Scalar(const Tensor<Scalar>& point, Tensor<Scalar>* grad)>;

/// Worst coordinate-wise relative error between the analytic gradient and
/// central differences (f(x+h) - f(x-h)) / 2h.
///
/// Each coordinate's error is |a - n| / max(|a|, |n|, floor), where the
/// floor is 1e-3 of the largest gradient magnitude seen (and at least 1e-10),
/// so coordinates whose true gradient is ~0 are judged against the gradient
/// scale rather than against rounding noise.
template <typename Scalar>
double grad_check(const Objective<Scalar>& f, const Tensor<Scalar>& point, Scalar h) {
  if (!(h > Scalar(0))) throw ConfigError("grad_check: step must be positive");
  Tensor<Scalar> analytic = Tensor<Scalar>::zeros_like(point);
  const Scalar base = f(point, &analytic);
  if (!std::isfinite(static_cast<double>(base)) || !analytic.values().allFinite()) {
    throw NumericError("grad_check: non-finite value or analytic gradient");
  }

  Tensor<Scalar> numeric = Tensor<Scalar>::zeros_like(point);
  Tensor<Scalar> probe = point;
  for (Index i = 0; i < point.size(); ++i) {
    const Scalar saved = probe[i];
    probe[i] = saved + h;
    const Scalar plus = f(probe, nullptr);
    probe[i] = saved - h;
    const Scalar minus = f(probe, nullptr);
    probe[i] = saved;
    if (!std::isfinite(static_cast<double>(plus)) || !std::isfinite(static_cast<double>(minus))) {
      throw NumericError("grad_check: non-finite objective at coordinate " + std::to_string(i));
    }
    numeric[i] = (plus - minus) / (Scalar(2) * h);
  }

  const double scale = std::max(analytic.values().abs().maxCoeff(), numeric.values().abs().maxCoeff());
  const double floor = std::max(1e-3 * scale, 1e-10);
  double worst = 0.0;
  for (Index i = 0; i < point.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
  }
  return worst;
}

}  // namespace ppn
