#include "ppn/network.hpp"

#include <cmath>
#include <string>

#include "ppn/rng.hpp"

namespace ppn {

void NetworkConfig::validate() const {
  if (t_in < 1) throw ConfigError("network: t_in must be >= 1");
  if (base_channels < 1) throw ConfigError("network: base_channels must be >= 1");
  if (depth < 1 || depth > 16) throw ConfigError("network: depth must lie in [1, 16]");
  if (out_channels < 1) throw ConfigError("network: out_channels must be >= 1");
  const Index div = spatial_divisor();
  if (input_height < 0 || input_width < 0 || input_height % div != 0 || input_width % div != 0) {
    throw ConfigError("network: declared input " + std::to_string(input_height) + "x" +
                      std::to_string(input_width) + " not divisible by " + std::to_string(div));
  }
}

void NetworkConfig::validate_input(const Shape& shape) const {
  if (shape.size() != 3 || shape[0] != t_in) {
    throw ShapeError("network: expected input [" + std::to_string(t_in) + " x H x W], got " + shape_string(shape));
  }
  const Index div = spatial_divisor();
  if (shape[1] % div != 0 || shape[2] % div != 0) {
    throw ShapeError("network: input spatial dims " + std::to_string(shape[1]) + "x" + std::to_string(shape[2]) +
                     " not divisible by " + std::to_string(div));
  }
}

namespace {

template <typename Scalar>
ConvLayer<Scalar> make_layer(Index in, Index out, Index kernel, Index stride, Index padding, bool transposed,
                             SplitMix64& rng) {
  ConvLayer<Scalar> layer;
  layer.spec = ConvSpec{in, out, kernel, kernel, stride, padding};
  layer.transposed = transposed;
  const Shape shape = transposed ? Shape{in, out, kernel, kernel} : Shape{out, in, kernel, kernel};
  layer.weight = Tensor<Scalar>(shape);
  layer.bias = Tensor<Scalar>(Shape{out});
  // Fan-in scaled uniform (He bound). A transposed conv with stride s feeds
  // each output from in * (k / s)^2 inputs.
  const double fan_in = transposed ? static_cast<double>(in * kernel * kernel) / static_cast<double>(stride * stride)
                                   : static_cast<double>(in * kernel * kernel);
  const double bound = std::sqrt(6.0 / fan_in);
  for (Index i = 0; i < layer.weight.size(); ++i) layer.weight[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  return layer;
}

template <typename Scalar>
ConvUnit<Scalar> make_unit(Index in, Index out, SplitMix64& rng) {
  return {make_layer<Scalar>(in, out, 3, 1, 1, false, rng), BatchNormState<Scalar>(out)};
}

template <typename Scalar>
ConvBlock<Scalar> make_block(Index in, Index out, SplitMix64& rng) {
  ConvUnit<Scalar> first = make_unit<Scalar>(in, out, rng);
  ConvUnit<Scalar> second = make_unit<Scalar>(out, out, rng);
  return {std::move(first), std::move(second)};
}

template <typename Scalar>
Tensor<Scalar> unit_forward(const ConvUnit<Scalar>& unit, const Tensor<Scalar>& x) {
  return leaky_relu(batchnorm2d_inference(unit.conv.forward(x), unit.norm), Scalar(kLeakySlope));
}

template <typename Scalar>
Tensor<Scalar> block_forward(const ConvBlock<Scalar>& block, const Tensor<Scalar>& x) {
  return unit_forward(block.second, unit_forward(block.first, x));
}

template <typename Scalar>
void accumulate(Tensor<Scalar>& param, const Tensor<Scalar>& grad) {
  param.grad() += grad.values();
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> ConvLayer<Scalar>::forward(const Tensor<Scalar>& x) const {
  return transposed ? conv_transpose2d(x, spec, weight, bias) : conv2d(x, spec, weight, bias);
}

template <typename Scalar>
Tensor<Scalar> ConvLayer<Scalar>::backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad) {
  ConvGrads<Scalar> g = transposed ? conv_transpose2d_backward(x, spec, weight, grad)
                                   : conv2d_backward(x, spec, weight, grad);
  accumulate(weight, g.weight);
  accumulate(bias, g.bias);
  return std::move(g.input);
}

template <typename Scalar>
Network<Scalar>::Network(const NetworkConfig& config) : config_(config) {
  config_.validate();
  SplitMix64 rng(mix64(config.seed));
  const Index base = config.base_channels;

  temporal_ = make_layer<Scalar>(config.t_in, base, 1, 1, 0, false, rng);

  Index channels = base;
  for (Index k = 0; k < config.depth; ++k) {
    const Index out = base << k;
    encoder_.push_back(make_block<Scalar>(channels, out, rng));
    channels = out;
  }
  for (Index k = config.depth - 1; k >= 0; --k) {
    const Index out = base << k;
    DecoderStage<Scalar> stage;
    stage.up = make_layer<Scalar>(channels, out, 2, 2, 0, true, rng);
    stage.block = make_block<Scalar>(config.skips ? 2 * out : out, out, rng);
    decoder_.push_back(std::move(stage));
    channels = out;
  }
  head_ = make_layer<Scalar>(base, config.out_channels, 1, 1, 0, false, rng);
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::forward(const Tensor<Scalar>& input) const {
  config_.validate_input(input.shape());
  Tensor<Scalar> x = temporal_.forward(input);
  std::vector<Tensor<Scalar>> taps;
  for (const ConvBlock<Scalar>& block : encoder_) {
    taps.push_back(block_forward(block, x));
    x = maxpool2d(taps.back()).output;
  }
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    Tensor<Scalar> up = decoder_[j].up.forward(x);
    if (config_.skips) up = concat_channels(up, taps[taps.size() - 1 - j]);
    x = block_forward(decoder_[j].block, up);
  }
  return activation_map(head_.forward(x), config_.output_activation);
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::forward_train(const Tensor<Scalar>& input) {
  config_.validate_input(input.shape());
  Trace trace;
  trace.input = input;

  auto unit = [](ConvUnit<Scalar>& u, const Tensor<Scalar>& x, UnitTrace& t) {
    u.norm.mode = NormMode::kTraining;
    t.input = x;
    t.pre_activation = batchnorm2d(u.conv.forward(x), u.norm, &t.norm);
    return leaky_relu(t.pre_activation, Scalar(kLeakySlope));
  };
  auto block = [&unit](ConvBlock<Scalar>& b, const Tensor<Scalar>& x, BlockTrace& t) {
    return unit(b.second, unit(b.first, x, t.first), t.second);
  };

  Tensor<Scalar> x = temporal_.forward(input);
  std::vector<Tensor<Scalar>> taps;
  for (ConvBlock<Scalar>& b : encoder_) {
    trace.encoder.emplace_back();
    taps.push_back(block(b, x, trace.encoder.back()));
    trace.pools.push_back(maxpool2d(taps.back()));
    x = trace.pools.back().output;
  }
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    trace.up_inputs.push_back(x);
    Tensor<Scalar> up = decoder_[j].up.forward(x);
    if (config_.skips) up = concat_channels(up, taps[taps.size() - 1 - j]);
    trace.decoder.emplace_back();
    x = block(decoder_[j].block, up, trace.decoder.back());
  }
  trace.head_input = x;
  trace.output = activation_map(head_.forward(x), config_.output_activation);
  Tensor<Scalar> out = trace.output;
  trace_ = std::move(trace);
  return out;
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::backward(const Tensor<Scalar>& grad_output) {
  if (!trace_) throw ShapeError("network: backward() without a preceding forward_train()");
  Trace& trace = *trace_;
  require_same_shape(trace.output, grad_output, "network backward");

  auto unit = [](ConvUnit<Scalar>& u, const UnitTrace& t, const Tensor<Scalar>& g) {
    const Tensor<Scalar> g_act = leaky_relu_backward(t.pre_activation, g, Scalar(kLeakySlope));
    BatchNormGrads<Scalar> bn = batchnorm2d_backward(t.norm, u.norm, g_act);
    accumulate(u.norm.gamma, bn.gamma);
    accumulate(u.norm.beta_shift, bn.beta_shift);
    return u.conv.backward(t.input, bn.input);
  };
  auto block = [&unit](ConvBlock<Scalar>& b, const BlockTrace& t, const Tensor<Scalar>& g) {
    return unit(b.first, t.first, unit(b.second, t.second, g));
  };

  Tensor<Scalar> g = activation_backward(trace.output, grad_output, config_.output_activation);
  g = head_.backward(trace.head_input, g);

  const std::size_t depth = encoder_.size();
  std::vector<std::optional<Tensor<Scalar>>> tap_grads(depth);
  for (std::size_t j = decoder_.size(); j-- > 0;) {
    Tensor<Scalar> g_cat = block(decoder_[j].block, trace.decoder[j], g);
    if (config_.skips) {
      auto [g_up, g_tap] = split_channels(g_cat, decoder_[j].up.spec.out_channels);
      tap_grads[depth - 1 - j] = std::move(g_tap);
      g_cat = std::move(g_up);
    }
    g = decoder_[j].up.backward(trace.up_inputs[j], g_cat);
  }
  for (std::size_t k = depth; k-- > 0;) {
    Tensor<Scalar> g_tap = maxpool2d_backward(trace.pools[k], g);
    if (tap_grads[k]) g_tap.values() += tap_grads[k]->values();
    g = block(encoder_[k], trace.encoder[k], g_tap);
  }
  return temporal_.backward(trace.input, g);
}

template <typename Scalar>
std::vector<Tensor<Scalar>*> Network<Scalar>::parameters() {
  std::vector<Tensor<Scalar>*> out;
  auto layer = [&out](ConvLayer<Scalar>& l) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  };
  auto unit = [&](ConvUnit<Scalar>& u) {
    layer(u.conv);
    out.push_back(&u.norm.gamma);
    out.push_back(&u.norm.beta_shift);
  };
  layer(temporal_);
  for (ConvBlock<Scalar>& b : encoder_) {
    unit(b.first);
    unit(b.second);
  }
  for (DecoderStage<Scalar>& s : decoder_) {
    layer(s.up);
    unit(s.block.first);
    unit(s.block.second);
  }
  layer(head_);
  return out;
}

template <typename Scalar>
std::vector<const Tensor<Scalar>*> Network<Scalar>::parameters() const {
  auto mutable_params = const_cast<Network*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

template <typename Scalar>
Index Network<Scalar>::parameter_count() const {
  Index n = 0;
  for (const Tensor<Scalar>* p : parameters()) n += p->size();
  return n;
}

template <typename Scalar>
void Network<Scalar>::zero_grad() {
  for (Tensor<Scalar>* p : parameters()) p->zero_grad();
}

template <typename Scalar>
void Network<Scalar>::for_each_state(
    const std::function<void(const Shape&, typename Tensor<Scalar>::Array&)>& f) {
  auto tensor = [&f](Tensor<Scalar>& t) { f(t.shape(), t.values()); };
  auto layer = [&](ConvLayer<Scalar>& l) {
    tensor(l.weight);
    tensor(l.bias);
  };
  auto unit = [&](ConvUnit<Scalar>& u) {
    layer(u.conv);
    tensor(u.norm.gamma);
    tensor(u.norm.beta_shift);
    const Shape stats{u.norm.channels()};
    f(stats, u.norm.running_mean);
    f(stats, u.norm.running_var);
  };
  layer(temporal_);
  for (ConvBlock<Scalar>& b : encoder_) {
    unit(b.first);
    unit(b.second);
  }
  for (DecoderStage<Scalar>& s : decoder_) {
    layer(s.up);
    unit(s.block.first);
    unit(s.block.second);
  }
  layer(head_);
}

template <typename Scalar>
void Network<Scalar>::for_each_state(
    const std::function<void(const Shape&, const typename Tensor<Scalar>::Array&)>& f) const {
  const_cast<Network*>(this)->for_each_state(
      [&f](const Shape& shape, typename Tensor<Scalar>::Array& values) { f(shape, values); });
}

template <typename Scalar>
Tensor<Scalar> segment_sequence(const Network<Scalar>& net, const BevSequence& seq) {
  if (seq.t_len() != net.config().t_in) {
    throw ShapeError("segment_sequence: sequence has " + std::to_string(seq.t_len()) + " frames, network expects " +
                     std::to_string(net.config().t_in));
  }
  return net.forward(sequence_tensor<Scalar>(seq));
}

std::uint8_t tanh_to_byte(double v) {
  const double scaled = std::floor((v + 1.0) / 2.0 * 255.0 + 0.5);
  return static_cast<std::uint8_t>(scaled < 0 ? 0 : (scaled > 255 ? 255 : scaled));
}

template <typename Scalar>
Image render_rgb(const Network<Scalar>& net3, const BevSequence& pair) {
  const NetworkConfig& cfg = net3.config();
  if (cfg.out_channels != 3 || cfg.output_activation != Activation::kTanh || cfg.t_in != 2) {
    throw ShapeError("render_rgb: network must take 2 frames and emit 3 tanh channels");
  }
  const Tensor<Scalar> out = segment_sequence(net3, pair);
  Image img{out.width(), out.height(), 3, {}};
  img.bytes.reserve(static_cast<std::size_t>(img.width * img.height * 3));
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      for (Index c = 0; c < 3; ++c) img.bytes.push_back(tanh_to_byte(static_cast<double>(out(c, y, x))));
    }
  }
  return img;
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template class Network<float>;
template class Network<double>;
template Tensor<float> segment_sequence(const Network<float>&, const BevSequence&);
template Tensor<double> segment_sequence(const Network<double>&, const BevSequence&);
template Image render_rgb(const Network<float>&, const BevSequence&);
template Image render_rgb(const Network<double>&, const BevSequence&);

}  // namespace ppn
