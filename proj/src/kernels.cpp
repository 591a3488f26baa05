#include "ppn/kernels.hpp"

#include <cmath>
#include <string>

namespace ppn {

namespace {

template <typename Scalar>
using Array = typename Tensor<Scalar>::Array;

void require_rank3(const Shape& shape, const char* what) {
  if (shape.size() != 3) {
    throw ShapeError(std::string(what) + ": expected C x H x W input, got " + shape_string(shape));
  }
}

struct Geometry {
  Index channels, height, width;        // image side
  Index kernel_h, kernel_w, stride, pad;
  Index out_h, out_w;                   // sliding-window grid
};

// cols is [channels*kh*kw x out_h*out_w].
template <typename Scalar>
RowMatrix<Scalar> im2col(const Scalar* image, const Geometry& g) {
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(g.channels * g.kernel_h * g.kernel_w, g.out_h * g.out_w);
  for (Index c = 0; c < g.channels; ++c) {
    const Scalar* plane = image + c * g.height * g.width;
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj) {
        Scalar* row = cols.data() + ((c * g.kernel_h + ki) * g.kernel_w + kj) * g.out_h * g.out_w;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.height) continue;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.width) row[oy * g.out_w + ox] = plane[iy * g.width + ix];
          }
        }
      }
    }
  }
  return cols;
}

// Scatter-add of cols back onto a zeroed image; adjoint of im2col.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, const Geometry& g, Scalar* image) {
  for (Index c = 0; c < g.channels; ++c) {
    Scalar* plane = image + c * g.height * g.width;
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj) {
        const Scalar* row = cols.data() + ((c * g.kernel_h + ki) * g.kernel_w + kj) * g.out_h * g.out_w;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.height) continue;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.width) plane[iy * g.width + ix] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

void check_weight(const Shape& weight, Index a, Index b, const ConvSpec& spec, const char* what) {
  const Shape expected{a, b, spec.kernel_h, spec.kernel_w};
  if (weight != expected) {
    throw ShapeError(std::string(what) + ": weight shape " + shape_string(weight) + ", expected " +
                     shape_string(expected));
  }
}

template <typename Scalar>
void check_conv_inputs(const Tensor<Scalar>& input, const ConvSpec& spec, const Tensor<Scalar>& bias,
                       const char* what) {
  require_rank3(input.shape(), what);
  if (input.channels() != spec.in_channels) {
    throw ShapeError(std::string(what) + ": input channels " + std::to_string(input.channels()) +
                     " != in_channels " + std::to_string(spec.in_channels));
  }
  if (bias.shape() != Shape{spec.out_channels}) {
    throw ShapeError(std::string(what) + ": bias shape " + shape_string(bias.shape()));
  }
}

Geometry conv_geometry(const Shape& input, const ConvSpec& spec) {
  return {input[0], input[1], input[2], spec.kernel_h, spec.kernel_w, spec.stride, spec.padding,
          spec.conv_output(input[1], spec.kernel_h), spec.conv_output(input[2], spec.kernel_w)};
}

// The transposed op's output is the image side of an ordinary convolution
// whose sliding grid is the transposed op's input.
Geometry transposed_geometry(const Shape& input, const ConvSpec& spec) {
  return {spec.out_channels, spec.transposed_output(input[1], spec.kernel_h),
          spec.transposed_output(input[2], spec.kernel_w), spec.kernel_h, spec.kernel_w,
          spec.stride, spec.padding, input[1], input[2]};
}

}  // namespace

Index ConvSpec::conv_output(Index in, Index kernel) const {
  if (stride < 1 || padding < 0) throw ShapeError("conv: stride must be >= 1 and padding >= 0");
  const Index span = in + 2 * padding - kernel;
  if (span < 0) {
    throw ShapeError("conv: kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(in + 2 * padding));
  }
  return span / stride + 1;
}

Index ConvSpec::transposed_output(Index in, Index kernel) const {
  if (stride < 1 || padding < 0) throw ShapeError("conv_transpose: stride must be >= 1 and padding >= 0");
  const Index out = (in - 1) * stride - 2 * padding + kernel;
  if (out < 1) throw ShapeError("conv_transpose: empty output for input size " + std::to_string(in));
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const ConvSpec& spec, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias) {
  check_conv_inputs(input, spec, bias, "conv2d");
  check_weight(weight.shape(), spec.out_channels, spec.in_channels, spec, "conv2d");
  const Geometry g = conv_geometry(input.shape(), spec);
  const RowMatrix<Scalar> cols = im2col(input.data(), g);
  Tensor<Scalar> out(Shape{spec.out_channels, g.out_h, g.out_w});
  auto w = weight.matrix(spec.out_channels, spec.in_channels * spec.kernel_h * spec.kernel_w);
  auto o = out.matrix(spec.out_channels, g.out_h * g.out_w);
  o.noalias() = w * cols;
  o.colwise() += bias.values().matrix();
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const ConvSpec& spec,
                                  const Tensor<Scalar>& weight, const Tensor<Scalar>& grad_output) {
  const Geometry g = conv_geometry(input.shape(), spec);
  const Shape out_shape{spec.out_channels, g.out_h, g.out_w};
  if (grad_output.shape() != out_shape) {
    throw ShapeError("conv2d_backward: grad shape " + shape_string(grad_output.shape()) + ", expected " +
                     shape_string(out_shape));
  }
  const Index k = spec.in_channels * spec.kernel_h * spec.kernel_w;
  const RowMatrix<Scalar> cols = im2col(input.data(), g);
  auto grad = grad_output.matrix(spec.out_channels, g.out_h * g.out_w);

  ConvGrads<Scalar> grads{Tensor<Scalar>::zeros_like(input), Tensor<Scalar>::zeros_like(weight),
                          Tensor<Scalar>(Shape{spec.out_channels})};
  grads.weight.matrix(spec.out_channels, k).noalias() = grad * cols.transpose();
  grads.bias.values() = grad.rowwise().sum().array();
  const RowMatrix<Scalar> dcols = weight.matrix(spec.out_channels, k).transpose() * grad;
  col2im(dcols, g, grads.input.data());
  return grads;
}

template <typename Scalar>
Tensor<Scalar> conv_transpose2d(const Tensor<Scalar>& input, const ConvSpec& spec,
                                const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  check_conv_inputs(input, spec, bias, "conv_transpose2d");
  check_weight(weight.shape(), spec.in_channels, spec.out_channels, spec, "conv_transpose2d");
  const Geometry g = transposed_geometry(input.shape(), spec);
  const Index k = spec.out_channels * spec.kernel_h * spec.kernel_w;
  const RowMatrix<Scalar> cols =
      weight.matrix(spec.in_channels, k).transpose() * input.matrix(spec.in_channels, g.out_h * g.out_w);
  Tensor<Scalar> out(Shape{spec.out_channels, g.height, g.width});
  col2im(cols, g, out.data());
  out.matrix(spec.out_channels, g.height * g.width).colwise() += bias.values().matrix();
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv_transpose2d_backward(const Tensor<Scalar>& input, const ConvSpec& spec,
                                            const Tensor<Scalar>& weight,
                                            const Tensor<Scalar>& grad_output) {
  const Geometry g = transposed_geometry(input.shape(), spec);
  const Shape out_shape{spec.out_channels, g.height, g.width};
  if (grad_output.shape() != out_shape) {
    throw ShapeError("conv_transpose2d_backward: grad shape " + shape_string(grad_output.shape()) +
                     ", expected " + shape_string(out_shape));
  }
  const Index k = spec.out_channels * spec.kernel_h * spec.kernel_w;
  const Index positions = g.out_h * g.out_w;
  const RowMatrix<Scalar> dcols = im2col(grad_output.data(), g);

  ConvGrads<Scalar> grads{Tensor<Scalar>::zeros_like(input), Tensor<Scalar>::zeros_like(weight),
                          Tensor<Scalar>(Shape{spec.out_channels})};
  grads.input.matrix(spec.in_channels, positions).noalias() = weight.matrix(spec.in_channels, k) * dcols;
  grads.weight.matrix(spec.in_channels, k).noalias() =
      input.matrix(spec.in_channels, positions) * dcols.transpose();
  grads.bias.values() =
      grad_output.matrix(spec.out_channels, g.height * g.width).rowwise().sum().array();
  return grads;
}

namespace {

struct NormLayout {
  Index batch, channels, plane;
};

NormLayout norm_layout(const Shape& shape, Index channels) {
  NormLayout layout{};
  if (shape.size() == 3) {
    layout = {1, shape[0], shape[1] * shape[2]};
  } else if (shape.size() == 4) {
    layout = {shape[0], shape[1], shape[2] * shape[3]};
  } else {
    throw ShapeError("batchnorm2d: expected rank 3 or 4, got " + shape_string(shape));
  }
  if (layout.channels != channels) {
    throw ShapeError("batchnorm2d: input has " + std::to_string(layout.channels) +
                     " channels, state has " + std::to_string(channels));
  }
  return layout;
}

// Applies y = gamma * (x - mean) * inv_std + beta per channel; optionally keeps x_hat.
template <typename Scalar>
Tensor<Scalar> normalize(const Tensor<Scalar>& input, const NormLayout& layout, const Array<Scalar>& mean,
                         const Array<Scalar>& inv_std, const BatchNormState<Scalar>& state,
                         Tensor<Scalar>* normalized) {
  Tensor<Scalar> out = Tensor<Scalar>::zeros_like(input);
  if (normalized) *normalized = Tensor<Scalar>::zeros_like(input);
  for (Index n = 0; n < layout.batch; ++n) {
    for (Index c = 0; c < layout.channels; ++c) {
      const Index offset = (n * layout.channels + c) * layout.plane;
      const auto x = input.values().segment(offset, layout.plane);
      const Array<Scalar> x_hat = (x - mean[c]) * inv_std[c];
      out.values().segment(offset, layout.plane) = state.gamma[c] * x_hat + state.beta_shift[c];
      if (normalized) normalized->values().segment(offset, layout.plane) = x_hat;
    }
  }
  return out;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> batchnorm2d(const Tensor<Scalar>& input, BatchNormState<Scalar>& state,
                           BatchNormCache<Scalar>* cache) {
  const NormLayout layout = norm_layout(input.shape(), state.channels());
  if (state.mode == NormMode::kInference) {
    const Array<Scalar> inv_std = (state.running_var + state.eps).rsqrt();
    Tensor<Scalar> out = normalize(input, layout, state.running_mean, inv_std, state,
                                   cache ? &cache->normalized : nullptr);
    if (cache) {
      cache->inv_std = inv_std;
      cache->mode = NormMode::kInference;
    }
    return out;
  }

  const Index count = layout.batch * layout.plane;
  Array<Scalar> mean = Array<Scalar>::Zero(layout.channels);
  Array<Scalar> var = Array<Scalar>::Zero(layout.channels);
  for (Index c = 0; c < layout.channels; ++c) {
    for (Index n = 0; n < layout.batch; ++n) {
      mean[c] += input.values().segment((n * layout.channels + c) * layout.plane, layout.plane).sum();
    }
    mean[c] /= Scalar(count);
    for (Index n = 0; n < layout.batch; ++n) {
      var[c] += (input.values().segment((n * layout.channels + c) * layout.plane, layout.plane) - mean[c])
                    .square()
                    .sum();
    }
    var[c] /= Scalar(count);
  }
  const Array<Scalar> inv_std = (var + state.eps).rsqrt();
  BatchNormCache<Scalar> local;
  BatchNormCache<Scalar>& target = cache ? *cache : local;
  Tensor<Scalar> out = normalize(input, layout, mean, inv_std, state, &target.normalized);
  target.inv_std = inv_std;
  target.mode = NormMode::kTraining;

  const Scalar unbias = count > 1 ? Scalar(count) / Scalar(count - 1) : Scalar(1);
  state.running_mean = (Scalar(1) - state.momentum) * state.running_mean + state.momentum * mean;
  state.running_var = (Scalar(1) - state.momentum) * state.running_var + state.momentum * unbias * var;
  return out;
}

template <typename Scalar>
Tensor<Scalar> batchnorm2d_inference(const Tensor<Scalar>& input, const BatchNormState<Scalar>& state) {
  const NormLayout layout = norm_layout(input.shape(), state.channels());
  const Array<Scalar> inv_std = (state.running_var + state.eps).rsqrt();
  return normalize<Scalar>(input, layout, state.running_mean, inv_std, state, nullptr);
}

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm2d_backward(const BatchNormCache<Scalar>& cache,
                                            const BatchNormState<Scalar>& state,
                                            const Tensor<Scalar>& grad_output) {
  require_same_shape(cache.normalized, grad_output, "batchnorm2d_backward");
  const NormLayout layout = norm_layout(grad_output.shape(), state.channels());
  const Index count = layout.batch * layout.plane;
  BatchNormGrads<Scalar> grads{Tensor<Scalar>::zeros_like(grad_output), Tensor<Scalar>(Shape{layout.channels}),
                               Tensor<Scalar>(Shape{layout.channels})};
  for (Index c = 0; c < layout.channels; ++c) {
    Scalar sum_dy = 0;
    Scalar sum_dy_xhat = 0;
    for (Index n = 0; n < layout.batch; ++n) {
      const Index offset = (n * layout.channels + c) * layout.plane;
      const auto dy = grad_output.values().segment(offset, layout.plane);
      sum_dy += dy.sum();
      sum_dy_xhat += (dy * cache.normalized.values().segment(offset, layout.plane)).sum();
    }
    grads.gamma[c] = sum_dy_xhat;
    grads.beta_shift[c] = sum_dy;
    const Scalar scale = state.gamma[c] * cache.inv_std[c];
    for (Index n = 0; n < layout.batch; ++n) {
      const Index offset = (n * layout.channels + c) * layout.plane;
      const auto dy = grad_output.values().segment(offset, layout.plane);
      auto dx = grads.input.values().segment(offset, layout.plane);
      if (cache.mode == NormMode::kInference) {
        dx = scale * dy;
      } else {
        const auto x_hat = cache.normalized.values().segment(offset, layout.plane);
        dx = scale * (dy - sum_dy / Scalar(count) - x_hat * (sum_dy_xhat / Scalar(count)));
      }
    }
  }
  return grads;
}

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& input, Scalar slope) {
  Tensor<Scalar> out = Tensor<Scalar>::zeros_like(input);
  out.values() = (input.values() > Scalar(0)).select(input.values(), slope * input.values());
  return out;
}

template <typename Scalar>
Tensor<Scalar> leaky_relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_output,
                                   Scalar slope) {
  require_same_shape(input, grad_output, "leaky_relu_backward");
  Tensor<Scalar> out = Tensor<Scalar>::zeros_like(input);
  out.values() = (input.values() > Scalar(0)).select(grad_output.values(), slope * grad_output.values());
  return out;
}

template <typename Scalar>
PoolResult<Scalar> maxpool2d(const Tensor<Scalar>& input) {
  require_rank3(input.shape(), "maxpool2d");
  const Index channels = input.channels();
  const Index h = input.height();
  const Index w = input.width();
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2d: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                     " not divisible by 2");
  }
  PoolResult<Scalar> result{Tensor<Scalar>(Shape{channels, h / 2, w / 2}), {}, input.shape()};
  result.argmax.resize(static_cast<std::size_t>(result.output.size()));
  Index o = 0;
  for (Index c = 0; c < channels; ++c) {
    for (Index y = 0; y < h; y += 2) {
      for (Index x = 0; x < w; x += 2, ++o) {
        Index best = (c * h + y) * w + x;
        for (Index dy = 0; dy < 2; ++dy) {
          for (Index dx = 0; dx < 2; ++dx) {
            const Index idx = (c * h + y + dy) * w + x + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        result.output[o] = input[best];
        result.argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return result;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const PoolResult<Scalar>& pool, const Tensor<Scalar>& grad_output) {
  require_same_shape(pool.output, grad_output, "maxpool2d_backward");
  Tensor<Scalar> grad(pool.input_shape);
  for (Index o = 0; o < grad_output.size(); ++o) grad[pool.argmax[static_cast<std::size_t>(o)]] += grad_output[o];
  return grad;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_rank3(a.shape(), "concat_channels");
  require_rank3(b.shape(), "concat_channels");
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor<Scalar> out(Shape{a.channels() + b.channels(), a.height(), a.width()});
  out.values().head(a.size()) = a.values();
  out.values().tail(b.size()) = b.values();
  return out;
}

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad, Index first_channels) {
  require_rank3(grad.shape(), "split_channels");
  if (first_channels <= 0 || first_channels >= grad.channels()) {
    throw ShapeError("split_channels: cannot split " + std::to_string(grad.channels()) + " channels at " +
                     std::to_string(first_channels));
  }
  const Index plane = grad.height() * grad.width();
  Tensor<Scalar> a(Shape{first_channels, grad.height(), grad.width()}, grad.values().head(first_channels * plane));
  Tensor<Scalar> b(Shape{grad.channels() - first_channels, grad.height(), grad.width()},
                   grad.values().tail(grad.size() - first_channels * plane));
  return {std::move(a), std::move(b)};
}

template <typename Scalar>
Tensor<Scalar> activation_map(const Tensor<Scalar>& input, Activation kind) {
  Tensor<Scalar> out = Tensor<Scalar>::zeros_like(input);
  if (kind == Activation::kSigmoid) {
    out.values() = Scalar(1) / (Scalar(1) + (-input.values()).exp());
  } else {
    out.values() = input.values().tanh();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> activation_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_output,
                                   Activation kind) {
  require_same_shape(output, grad_output, "activation_backward");
  Tensor<Scalar> out = Tensor<Scalar>::zeros_like(output);
  if (kind == Activation::kSigmoid) {
    out.values() = grad_output.values() * output.values() * (Scalar(1) - output.values());
  } else {
    out.values() = grad_output.values() * (Scalar(1) - output.values().square());
  }
  return out;
}

#define PPN_INSTANTIATE_KERNELS(S)                                                                       \
  template Tensor<S> conv2d(const Tensor<S>&, const ConvSpec&, const Tensor<S>&, const Tensor<S>&);       \
  template ConvGrads<S> conv2d_backward(const Tensor<S>&, const ConvSpec&, const Tensor<S>&,             \
                                        const Tensor<S>&);                                              \
  template Tensor<S> conv_transpose2d(const Tensor<S>&, const ConvSpec&, const Tensor<S>&,               \
                                      const Tensor<S>&);                                                \
  template ConvGrads<S> conv_transpose2d_backward(const Tensor<S>&, const ConvSpec&, const Tensor<S>&,   \
                                                  const Tensor<S>&);                                    \
  template Tensor<S> batchnorm2d(const Tensor<S>&, BatchNormState<S>&, BatchNormCache<S>*);              \
  template Tensor<S> batchnorm2d_inference(const Tensor<S>&, const BatchNormState<S>&);                  \
  template BatchNormGrads<S> batchnorm2d_backward(const BatchNormCache<S>&, const BatchNormState<S>&,    \
                                                  const Tensor<S>&);                                    \
  template Tensor<S> leaky_relu(const Tensor<S>&, S);                                                    \
  template Tensor<S> leaky_relu_backward(const Tensor<S>&, const Tensor<S>&, S);                         \
  template PoolResult<S> maxpool2d(const Tensor<S>&);                                                    \
  template Tensor<S> maxpool2d_backward(const PoolResult<S>&, const Tensor<S>&);                         \
  template Tensor<S> concat_channels(const Tensor<S>&, const Tensor<S>&);                                \
  template std::pair<Tensor<S>, Tensor<S>> split_channels(const Tensor<S>&, Index);                      \
  template Tensor<S> activation_map(const Tensor<S>&, Activation);                                       \
  template Tensor<S> activation_backward(const Tensor<S>&, const Tensor<S>&, Activation);

PPN_INSTANTIATE_KERNELS(float)
PPN_INSTANTIATE_KERNELS(double)

#undef PPN_INSTANTIATE_KERNELS

}  // namespace ppn
