#include "ppn/gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ppn/errors.hpp"
#include "ppn/grad_check.hpp"
#include "ppn/kernels.hpp"
#include "ppn/loss.hpp"
#include "ppn/network.hpp"
#include "ppn/rng.hpp"

namespace ppn {

namespace {

using T = Tensor<double>;

T random_tensor(const Shape& shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  T t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Magnitudes in [0.1, 1] with random sign, keeping clear of the kink at 0.
T off_kink_tensor(const Shape& shape, SplitMix64& rng) {
  T t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.1, 1.0);
  return t;
}

// Distinct values on a 1/size lattice plus jitter, so every pooling window
// has a unique max separated from the runner-up by far more than the step.
T distinct_tensor(const Shape& shape, SplitMix64& rng) {
  T t(shape);
  std::vector<Index> order(static_cast<std::size_t>(t.size()));
  for (Index i = 0; i < t.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next() % i]);
  for (Index i = 0; i < t.size(); ++i) {
    t[i] = (static_cast<double>(order[static_cast<std::size_t>(i)]) + rng.uniform(0.0, 0.2)) / static_cast<double>(t.size());
  }
  return t;
}

double project(const T& y, const T& weights) { return (y.values() * weights.values()).sum(); }

class Suite {
 public:
  explicit Suite(const GradSuiteOptions& options) : opt_(options), rng_(mix64(options.seed + 0x5eed)) {}

  std::vector<GradCheckEntry> run() {
    check_conv();
    check_conv_transpose();
    check_batchnorm();
    check_leaky_relu();
    check_maxpool();
    check_concat();
    check_activation("sigmoid", Activation::kSigmoid);
    check_activation("tanh", Activation::kTanh);
    check_losses();
    check_composite();
    if (opt_.include_networks) {
      check_network("network_segmentation", true);
      check_network("network_reconstruction", false);
    }
    return std::move(entries_);
  }

 private:
  // Wraps an objective so the analytic gradient of `kernel` can be corrupted.
  Objective<double> hooked(const std::string& kernel, Objective<double> f) const {
    if (kernel != opt_.corrupt_kernel) return f;
    return [f](const T& x, T* grad) {
      const double v = f(x, grad);
      if (grad) grad->values() *= 1.01;
      return v;
    };
  }

  void record(const std::string& kernel, double error, double threshold) {
    for (GradCheckEntry& e : entries_) {
      if (e.kernel == kernel) {
        e.worst_rel_error = std::max(e.worst_rel_error, error);
        return;
      }
    }
    entries_.push_back({kernel, error, threshold});
  }

  void check(const std::string& kernel, const Objective<double>& f, const T& point,
             double threshold = -1, double step = -1) {
    record(kernel, grad_check<double>(hooked(kernel, f), point, step > 0 ? step : opt_.step),
           threshold > 0 ? threshold : opt_.kernel_threshold);
  }

  void check_conv() {
    const ConvSpec spec{3, 4, 3, 3, 1, 1};
    const ConvSpec strided{2, 3, 3, 3, 2, 1};
    for (const ConvSpec& s : {spec, strided}) {
      const T x = random_tensor({s.in_channels, 7, 6}, rng_);
      const T w = random_tensor({s.out_channels, s.in_channels, 3, 3}, rng_);
      const T b = random_tensor({s.out_channels}, rng_);
      const T proj = random_tensor(conv2d(x, s, w, b).shape(), rng_);
      check("conv2d", [&](const T& p, T* g) {
        if (g) *g = conv2d_backward(p, s, w, proj).input;
        return project(conv2d(p, s, w, b), proj);
      }, x);
      check("conv2d", [&](const T& p, T* g) {
        if (g) *g = conv2d_backward(x, s, p, proj).weight;
        return project(conv2d(x, s, p, b), proj);
      }, w);
      check("conv2d", [&](const T& p, T* g) {
        if (g) *g = conv2d_backward(x, s, w, proj).bias;
        return project(conv2d(x, s, w, p), proj);
      }, b);
    }
  }

  void check_conv_transpose() {
    const ConvSpec up{3, 2, 2, 2, 2, 0};
    const ConvSpec overlap{2, 3, 3, 3, 2, 1};
    for (const ConvSpec& s : {up, overlap}) {
      const T x = random_tensor({s.in_channels, 4, 5}, rng_);
      const T w = random_tensor({s.in_channels, s.out_channels, s.kernel_h, s.kernel_w}, rng_);
      const T b = random_tensor({s.out_channels}, rng_);
      const T proj = random_tensor(conv_transpose2d(x, s, w, b).shape(), rng_);
      check("conv_transpose2d", [&](const T& p, T* g) {
        if (g) *g = conv_transpose2d_backward(p, s, w, proj).input;
        return project(conv_transpose2d(p, s, w, b), proj);
      }, x);
      check("conv_transpose2d", [&](const T& p, T* g) {
        if (g) *g = conv_transpose2d_backward(x, s, p, proj).weight;
        return project(conv_transpose2d(x, s, p, b), proj);
      }, w);
      check("conv_transpose2d", [&](const T& p, T* g) {
        if (g) *g = conv_transpose2d_backward(x, s, w, proj).bias;
        return project(conv_transpose2d(x, s, w, p), proj);
      }, b);
    }
  }

  void check_batchnorm() {
    for (NormMode mode : {NormMode::kTraining, NormMode::kInference}) {
      for (const Shape& shape : {Shape{3, 4, 5}, Shape{2, 3, 3, 4}}) {
        BatchNormState<double> state(3);
        state.mode = mode;
        state.gamma = random_tensor({3}, rng_, 0.5, 1.5);
        state.beta_shift = random_tensor({3}, rng_);
        state.running_mean = random_tensor({3}, rng_).values();
        state.running_var = random_tensor({3}, rng_, 0.5, 2.0).values();
        const T x = random_tensor(shape, rng_, -2.0, 2.0);
        const T proj = random_tensor(shape, rng_);
        auto forward = [&](const T& input, BatchNormState<double> s, BatchNormCache<double>* cache) {
          return batchnorm2d(input, s, cache);
        };
        check("batchnorm2d", [&](const T& p, T* g) {
          BatchNormCache<double> cache;
          const double v = project(forward(p, state, &cache), proj);
          if (g) *g = batchnorm2d_backward(cache, state, proj).input;
          return v;
        }, x);
        check("batchnorm2d", [&](const T& p, T* g) {
          BatchNormState<double> s = state;
          s.gamma = p;
          BatchNormCache<double> cache;
          const double v = project(forward(x, s, &cache), proj);
          if (g) *g = batchnorm2d_backward(cache, s, proj).gamma;
          return v;
        }, state.gamma);
        check("batchnorm2d", [&](const T& p, T* g) {
          BatchNormState<double> s = state;
          s.beta_shift = p;
          BatchNormCache<double> cache;
          const double v = project(forward(x, s, &cache), proj);
          if (g) *g = batchnorm2d_backward(cache, s, proj).beta_shift;
          return v;
        }, state.beta_shift);
      }
    }
  }

  void check_leaky_relu() {
    const T x = off_kink_tensor({2, 5, 5}, rng_);
    const T proj = random_tensor(x.shape(), rng_);
    check("leaky_relu", [&](const T& p, T* g) {
      if (g) *g = leaky_relu_backward(p, proj, kLeakySlope);
      return project(leaky_relu(p, kLeakySlope), proj);
    }, x);
  }

  void check_maxpool() {
    const T x = distinct_tensor({2, 6, 8}, rng_);
    const T proj = random_tensor({2, 3, 4}, rng_);
    check("maxpool2d", [&](const T& p, T* g) {
      const PoolResult<double> pool = maxpool2d(p);
      if (g) *g = maxpool2d_backward(pool, proj);
      return project(pool.output, proj);
    }, x);
  }

  void check_concat() {
    const T a = random_tensor({2, 3, 4}, rng_);
    const T b = random_tensor({3, 3, 4}, rng_);
    const T proj = random_tensor({5, 3, 4}, rng_);
    check("concat_channels", [&](const T& p, T* g) {
      if (g) *g = split_channels(proj, 2).first;
      return project(concat_channels(p, b), proj);
    }, a);
    check("concat_channels", [&](const T& p, T* g) {
      if (g) *g = split_channels(proj, 2).second;
      return project(concat_channels(a, p), proj);
    }, b);
  }

  void check_activation(const std::string& name, Activation kind) {
    const T x = random_tensor({2, 4, 4}, rng_, -3.0, 3.0);
    const T proj = random_tensor(x.shape(), rng_);
    check(name, [&, kind](const T& p, T* g) {
      const T y = activation_map(p, kind);
      if (g) *g = activation_backward(y, proj, kind);
      return project(y, proj);
    }, x);
  }

  void check_losses() {
    const Shape shape{1, 12, 12};
    const T pred = random_tensor(shape, rng_, 0.05, 0.95);
    T target(shape);
    for (Index y = 0; y < 12; ++y) {
      for (Index x = 6; x < 12; ++x) target(0, y, x) = 1.0;
    }
    auto loss_check = [&](const std::string& name, auto fn, const T& at) {
      check(name, [&, fn](const T& p, T* g) {
        LossResult<double> r = fn(p);
        if (g) *g = r.grad;
        return r.value;
      }, at);
    };
    loss_check("mse", [&](const T& p) { return mse(p, target); }, pred);

    // Differences drawn from [0.05, 0.45] and [0.55, 2] around beta = 0.5,
    // away from the branch point.
    T sl1_pred(shape);
    for (Index i = 0; i < sl1_pred.size(); ++i) {
      const double d = rng_.uniform() < 0.5 ? rng_.uniform(0.05, 0.45) : rng_.uniform(0.55, 2.0);
      sl1_pred[i] = target[i] + (rng_.uniform() < 0.5 ? -d : d);
    }
    loss_check("smooth_l1", [&](const T& p) { return smooth_l1(p, target, 0.5); }, sl1_pred);
    loss_check("iou_loss", [&](const T& p) { return iou_loss(p, target); }, pred);
    const LossWeights weights;
    const CannyParams canny_params;
    loss_check("mssce", [&](const T& p) { return mssce(p, target, weights, canny_params); }, pred);
    loss_check("edge_sobel_surrogate",
               [&](const T& p) { return edge_preserving(p, target, canny_params, EdgeTerm::kSobelSurrogate); }, pred);
  }

  void check_composite() {
    const ConvSpec spec{1, 2, 3, 3, 1, 1};
    const T x = random_tensor({1, 6, 6}, rng_);
    const T w = random_tensor({2, 1, 3, 3}, rng_);
    const T b = random_tensor({2}, rng_);
    check("composite_conv_leaky_sum", [&](const T& p, T* g) {
      const T pre = conv2d(p, spec, w, b);
      const T y = leaky_relu(pre, kLeakySlope);
      if (g) *g = conv2d_backward(p, spec, w, leaky_relu_backward(pre, T(y.shape(), 1.0), kLeakySlope)).input;
      return y.values().sum();
    }, x);
  }

  void check_network(const std::string& name, bool skips) {
    NetworkConfig config{3, 4, 2, 1, Activation::kSigmoid, skips, opt_.seed + 11};
    Network<double> net(config);
    T input(Shape{3, 16, 16});
    for (Index i = 0; i < input.size(); ++i) input[i] = rng_.uniform() < 0.3 ? 1.0 : 0.0;
    input.values() += random_tensor(input.shape(), rng_, -0.05, 0.05).values();
    const T target = random_tensor({1, 16, 16}, rng_, 0.0, 1.0);

    auto loss_of = [&](const T& x, bool want_grad, T* input_grad) {
      net.zero_grad();
      const T out = net.forward_train(x);
      const LossResult<double> r = mse(out, target);
      if (want_grad) {
        T gin = net.backward(r.grad);
        if (input_grad) *input_grad = std::move(gin);
      }
      return r.value;
    };
    const double threshold = opt_.network_threshold;
    check(name, [&](const T& p, T* g) { return loss_of(p, g != nullptr, g); }, input, threshold);

    // A few parameter tensors spread across the graph.
    std::vector<Tensor<double>*> params = net.parameters();
    for (std::size_t idx : {std::size_t{0}, std::size_t{4}, params.size() / 2, params.size() - 2}) {
      Tensor<double>& param = *params[idx];
      const T original = param;
      check(name, [&](const T& p, T* g) {
        param.values() = p.values();
        const double v = loss_of(input, g != nullptr, nullptr);
        if (g) *g = T(param.shape(), param.grad());
        param.values() = original.values();
        return v;
      }, original, threshold);
    }
  }

  GradSuiteOptions opt_;
  SplitMix64 rng_;
  std::vector<GradCheckEntry> entries_;
};

}  // namespace

const std::vector<std::string>& gradient_suite_kernels() {
  static const std::vector<std::string> kNames{
      "conv2d",   "conv_transpose2d", "batchnorm2d", "leaky_relu", "maxpool2d",
      "concat_channels", "sigmoid", "tanh", "mse", "smooth_l1", "iou_loss", "mssce",
      "edge_sobel_surrogate", "composite_conv_leaky_sum", "network_segmentation", "network_reconstruction"};
  return kNames;
}

std::vector<GradCheckEntry> run_gradient_suite(const GradSuiteOptions& options) {
  if (!options.corrupt_kernel.empty()) {
    const auto& names = gradient_suite_kernels();
    if (std::find(names.begin(), names.end(), options.corrupt_kernel) == names.end()) {
      throw ConfigError("unknown kernel '" + options.corrupt_kernel + "' for corruption hook");
    }
  }
  if (!(options.kernel_threshold > 0) || !(options.network_threshold > 0) || !(options.step > 0)) {
    throw ConfigError("gradient suite thresholds and step must be positive");
  }
  return Suite(options).run();
}

}  // namespace ppn
