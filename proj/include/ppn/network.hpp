#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ppn/bev.hpp"
#include "ppn/image_io.hpp"
#include "ppn/kernels.hpp"

namespace ppn {

inline constexpr double kLeakySlope = 0.1;

struct NetworkConfig {
  Index t_in = 16;
  Index base_channels = 16;
  Index depth = 3;
  Index out_channels = 1;
  Activation output_activation = Activation::kSigmoid;
  bool skips = true;
  std::uint64_t seed = 0;  // weight initialization only; not persisted
  // Declared input size, 0 when not declared. Both must be divisible by 2^depth.
  Index input_height = 0;
  Index input_width = 0;

  static NetworkConfig segmentation(Index t_in = 16, Index base = 16, Index depth = 3) {
    return {t_in, base, depth, 1, Activation::kSigmoid, true};
  }
  static NetworkConfig reconstruction(Index t_in = 16, Index base = 16, Index depth = 3) {
    return {t_in, base, depth, 1, Activation::kSigmoid, false};
  }
  /// Two-frame, three-channel tanh variant used for RGB renders.
  static NetworkConfig rgb(Index base = 16, Index depth = 3) {
    return {2, base, depth, 3, Activation::kTanh, true};
  }

  void validate() const;
  void validate_input(const Shape& input_shape) const;
  Index spatial_divisor() const { return Index{1} << depth; }
  bool operator==(const NetworkConfig&) const = default;
};

template <typename Scalar>
struct ConvLayer {
  ConvSpec spec;
  bool transposed = false;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const;
  /// Accumulates parameter gradients; returns the input gradient.
  Tensor<Scalar> backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad);
};

/// conv -> batchnorm -> leaky ReLU
template <typename Scalar>
struct ConvUnit {
  ConvLayer<Scalar> conv;
  BatchNormState<Scalar> norm;
};

template <typename Scalar>
struct ConvBlock {
  ConvUnit<Scalar> first;
  ConvUnit<Scalar> second;
};

template <typename Scalar>
struct DecoderStage {
  ConvLayer<Scalar> up;  // 2x2 stride-2 transposed conv
  ConvBlock<Scalar> block;
};

/// Encoder-decoder over T stacked BEV frames. With skips the decoder
/// concatenates each upsampled tensor with the pre-pool activation of the
/// matching encoder level (segmentation flavor); without skips the same
/// topology runs as a plain autoencoder (reconstruction flavor).
template <typename Scalar>
class Network {
 public:
  explicit Network(const NetworkConfig& config);

  const NetworkConfig& config() const { return config_; }

  /// Inference-mode pass: batchnorm reads running statistics, nothing is
  /// written, so a frozen network may be shared across threads.
  Tensor<Scalar> forward(const Tensor<Scalar>& input) const;

  /// Training-mode pass: batch statistics, running-stat update, and the
  /// activation trace consumed by backward().
  Tensor<Scalar> forward_train(const Tensor<Scalar>& input);

  /// Backpropagates through the last forward_train(), accumulating into each
  /// parameter's grad buffer. Returns the gradient w.r.t. the input.
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output);

  std::vector<Tensor<Scalar>*> parameters();
  std::vector<const Tensor<Scalar>*> parameters() const;
  Index parameter_count() const;
  void zero_grad();

  /// Visits every persisted array (learnable parameters plus batchnorm
  /// running statistics) in construction order.
  void for_each_state(const std::function<void(const Shape&, typename Tensor<Scalar>::Array&)>& f);
  void for_each_state(const std::function<void(const Shape&, const typename Tensor<Scalar>::Array&)>& f) const;

  const ConvLayer<Scalar>& temporal() const { return temporal_; }
  const std::vector<ConvBlock<Scalar>>& encoder() const { return encoder_; }
  const std::vector<DecoderStage<Scalar>>& decoder() const { return decoder_; }
  const ConvLayer<Scalar>& head() const { return head_; }
  ConvLayer<Scalar>& head() { return head_; }

 private:
  struct UnitTrace {
    Tensor<Scalar> input;
    Tensor<Scalar> pre_activation;
    BatchNormCache<Scalar> norm;
  };
  struct BlockTrace {
    UnitTrace first;
    UnitTrace second;
  };
  struct Trace {
    Tensor<Scalar> input;
    std::vector<BlockTrace> encoder;
    std::vector<PoolResult<Scalar>> pools;
    std::vector<Tensor<Scalar>> up_inputs;
    std::vector<BlockTrace> decoder;
    Tensor<Scalar> head_input;
    Tensor<Scalar> output;
  };

  NetworkConfig config_;
  ConvLayer<Scalar> temporal_;
  std::vector<ConvBlock<Scalar>> encoder_;
  std::vector<DecoderStage<Scalar>> decoder_;
  ConvLayer<Scalar> head_;
  std::optional<Trace> trace_;
};

template <typename Scalar>
Network<Scalar> build_network(const NetworkConfig& config) {
  return Network<Scalar>(config);
}

/// Runs the skip-connected network over a sequence (oldest frame = channel 0).
template <typename Scalar>
Tensor<Scalar> segment_sequence(const Network<Scalar>& net, const BevSequence& seq);

/// round-half-up of (v + 1) / 2 * 255, clamped to [0, 255].
std::uint8_t tanh_to_byte(double v);

/// RGB image (H x W x 3) from a 2-frame, 3-channel tanh network.
template <typename Scalar>
Image render_rgb(const Network<Scalar>& net3, const BevSequence& pair);

}  // namespace ppn
