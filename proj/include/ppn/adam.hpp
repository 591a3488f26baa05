#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ppn/tensor.hpp"

namespace ppn {

template <typename Scalar>
struct AdamState {
  using Array = typename Tensor<Scalar>::Array;

  std::int64_t step_count = 0;
  std::vector<Array> m;
  std::vector<Array> v;
  Scalar lr = Scalar(1e-4);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps_opt = Scalar(1e-8);
};

/// One bias-corrected Adam update of every parameter from its grad buffer.
/// Moment buffers are zero-initialized lazily on the first call.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params, AdamState<Scalar>& state) {
  using Array = typename AdamState<Scalar>::Array;
  if (state.m.empty()) {
    for (const Tensor<Scalar>* p : params) {
      state.m.push_back(Array::Zero(p->size()));
      state.v.push_back(Array::Zero(p->size()));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but state tracks " +
                     std::to_string(state.m.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i]->size()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " has " +
                       std::to_string(params[i]->size()) + " entries, moments have " +
                       std::to_string(state.m[i].size()));
    }
  }

  ++state.step_count;
  const Scalar t = static_cast<Scalar>(state.step_count);
  const Scalar correction1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar correction2 = Scalar(1) - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar>& p = *params[i];
    if (!p.has_grad()) continue;
    const Array& g = p.grad();
    state.m[i] = state.beta1 * state.m[i] + (Scalar(1) - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (Scalar(1) - state.beta2) * g.square();
    p.values() -= state.lr * (state.m[i] / correction1) / ((state.v[i] / correction2).sqrt() + state.eps_opt);
  }
}

}  // namespace ppn
