#pragma once

#include <utility>
#include <vector>

#include "ppn/tensor.hpp"

namespace ppn {

struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel_h = 1;
  Index kernel_w = 1;
  Index stride = 1;
  Index padding = 0;

  /// floor((in + 2p - k) / s) + 1, or a ShapeError if that is < 1.
  Index conv_output(Index in, Index kernel) const;
  /// (in - 1) * s - 2p + k, or a ShapeError if that is < 1.
  Index transposed_output(Index in, Index kernel) const;
};

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

// Weights are [out, in, kh, kw]; bias is [out].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const ConvSpec& spec, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias);
template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const ConvSpec& spec,
                                  const Tensor<Scalar>& weight, const Tensor<Scalar>& grad_output);

// Weights are [in, out, kh, kw] (the adjoint layout of conv2d); bias is [out].
template <typename Scalar>
Tensor<Scalar> conv_transpose2d(const Tensor<Scalar>& input, const ConvSpec& spec,
                                const Tensor<Scalar>& weight, const Tensor<Scalar>& bias);
template <typename Scalar>
ConvGrads<Scalar> conv_transpose2d_backward(const Tensor<Scalar>& input, const ConvSpec& spec,
                                            const Tensor<Scalar>& weight,
                                            const Tensor<Scalar>& grad_output);

enum class NormMode { kTraining, kInference };

template <typename Scalar>
struct BatchNormState {
  using Array = typename Tensor<Scalar>::Array;

  explicit BatchNormState(Index channels = 1)
      : gamma(Shape{channels}, Scalar(1)),
        beta_shift(Shape{channels}, Scalar(0)),
        running_mean(Array::Zero(channels)),
        running_var(Array::Ones(channels)) {}

  Index channels() const { return gamma.size(); }

  Tensor<Scalar> gamma;
  Tensor<Scalar> beta_shift;
  Array running_mean;
  Array running_var;
  Scalar momentum = Scalar(0.1);
  Scalar eps = Scalar(1e-5);
  NormMode mode = NormMode::kTraining;
};

template <typename Scalar>
struct BatchNormCache {
  Tensor<Scalar> normalized;
  typename Tensor<Scalar>::Array inv_std;
  NormMode mode = NormMode::kTraining;
};

template <typename Scalar>
struct BatchNormGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta_shift;
};

/// Accepts C x H x W or N x C x H x W. Training mode normalizes with batch
/// statistics over every non-channel axis and folds them into the running
/// statistics; inference mode reads the running statistics and never writes.
template <typename Scalar>
Tensor<Scalar> batchnorm2d(const Tensor<Scalar>& input, BatchNormState<Scalar>& state,
                           BatchNormCache<Scalar>* cache = nullptr);
/// Inference-mode forward that cannot touch the state.
template <typename Scalar>
Tensor<Scalar> batchnorm2d_inference(const Tensor<Scalar>& input, const BatchNormState<Scalar>& state);
template <typename Scalar>
BatchNormGrads<Scalar> batchnorm2d_backward(const BatchNormCache<Scalar>& cache,
                                            const BatchNormState<Scalar>& state,
                                            const Tensor<Scalar>& grad_output);

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& input, Scalar slope);
template <typename Scalar>
Tensor<Scalar> leaky_relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_output,
                                   Scalar slope);

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input index per output cell
  Shape input_shape;
};

// 2x2 window, stride 2. Ties go to the first element in row-major window order.
template <typename Scalar>
PoolResult<Scalar> maxpool2d(const Tensor<Scalar>& input);
template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const PoolResult<Scalar>& pool, const Tensor<Scalar>& grad_output);

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
/// Splits a gradient of concat_channels(a, b) back into (grad_a, grad_b).
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad, Index first_channels);

enum class Activation { kSigmoid = 0, kTanh = 1 };

template <typename Scalar>
Tensor<Scalar> activation_map(const Tensor<Scalar>& input, Activation kind);
/// Backward from the forward output, using s(1-s) or 1-t^2.
template <typename Scalar>
Tensor<Scalar> activation_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_output,
                                   Activation kind);

}  // namespace ppn
