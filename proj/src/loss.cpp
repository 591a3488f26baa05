#include "ppn/loss.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace ppn {

void LossWeights::validate() const {
  if (!(lambda_weight >= 0 && lambda_weight <= 1)) throw ConfigError("loss: lambda must lie in [0, 1]");
  if (!(beta_smooth > 0)) throw ConfigError("loss: beta must be > 0");
}

void CannyParams::validate() const {
  if (!(gaussian_sigma > 0)) throw ConfigError("canny: sigma must be > 0");
  if (gaussian_radius < 0) throw ConfigError("canny: radius must be >= 0");
  if (!(low_threshold > 0 && low_threshold < high_threshold && high_threshold < 1)) {
    throw ConfigError("canny: need 0 < low < high < 1");
  }
}

namespace {

Index clamp_index(Index i, Index n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

Eigen::ArrayXXd gaussian_blur(const Eigen::ArrayXXd& image, double sigma, int radius) {
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= sum;

  const Index rows = image.rows();
  const Index cols = image.cols();
  Eigen::ArrayXXd horizontal(rows, cols);
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * image(y, clamp_index(x + i, cols));
      }
      horizontal(y, x) = acc;
    }
  }
  Eigen::ArrayXXd out(rows, cols);
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * horizontal(clamp_index(y + i, rows), x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

constexpr std::array<std::array<double, 3>, 3> kSobelX{{{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}}};
constexpr std::array<std::array<double, 3>, 3> kSobelY{{{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}}};

struct Gradients {
  Eigen::ArrayXXd gx;
  Eigen::ArrayXXd gy;
};

Gradients sobel(const Eigen::ArrayXXd& image) {
  const Index rows = image.rows();
  const Index cols = image.cols();
  Gradients g{Eigen::ArrayXXd::Zero(rows, cols), Eigen::ArrayXXd::Zero(rows, cols)};
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      double gx = 0;
      double gy = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double v = image(clamp_index(y + dy, rows), clamp_index(x + dx, cols));
          gx += kSobelX[dy + 1][dx + 1] * v;
          gy += kSobelY[dy + 1][dx + 1] * v;
        }
      }
      g.gx(y, x) = gx;
      g.gy(y, x) = gy;
    }
  }
  return g;
}

template <typename Scalar>
Eigen::ArrayXXd plane_as_image(const Tensor<Scalar>& t, Index c) {
  return t.plane(c).template cast<double>().array();
}

template <typename Scalar>
Tensor<Scalar> as_planes(const Tensor<Scalar>& t) {
  if (t.rank() == 3) return t;
  if (t.rank() == 2) return t.reshaped(Shape{1, t.dim(0), t.dim(1)});
  throw ShapeError("edge term: expected H x W or C x H x W, got " + shape_string(t.shape()));
}

constexpr double kSurrogateEps = 1e-6;

// mean |S(pred) - S(target)| with S the smoothed Sobel magnitude, plus its
// exact gradient (clamped borders make the adjoint scatter onto edge pixels).
template <typename Scalar>
LossResult<Scalar> sobel_surrogate(const Tensor<Scalar>& pred_in, const Tensor<Scalar>& target_in) {
  const Tensor<Scalar> pred = as_planes(pred_in);
  const Tensor<Scalar> target = as_planes(target_in);
  LossResult<Scalar> result{Scalar(0), Tensor<Scalar>::zeros_like(pred)};
  const double n = static_cast<double>(pred.size());
  const Index rows = pred.height();
  const Index cols = pred.width();
  double total = 0;
  for (Index c = 0; c < pred.channels(); ++c) {
    const Gradients gp = sobel(plane_as_image(pred, c));
    const Gradients gt = sobel(plane_as_image(target, c));
    const Eigen::ArrayXXd mp = (gp.gx.square() + gp.gy.square() + kSurrogateEps * kSurrogateEps).sqrt();
    const Eigen::ArrayXXd mt = (gt.gx.square() + gt.gy.square() + kSurrogateEps * kSurrogateEps).sqrt();
    const Eigen::ArrayXXd diff = mp - mt;
    total += diff.abs().sum();
    auto grad = result.grad.plane(c);
    for (Index y = 0; y < rows; ++y) {
      for (Index x = 0; x < cols; ++x) {
        const double s = (diff(y, x) > 0) - (diff(y, x) < 0);
        if (s == 0) continue;
        const double dgx = s / n * gp.gx(y, x) / mp(y, x);
        const double dgy = s / n * gp.gy(y, x) / mp(y, x);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            grad(clamp_index(y + dy, rows), clamp_index(x + dx, cols)) +=
                static_cast<Scalar>(dgx * kSobelX[dy + 1][dx + 1] + dgy * kSobelY[dy + 1][dx + 1]);
          }
        }
      }
    }
  }
  result.value = static_cast<Scalar>(total / n);
  result.grad = result.grad.reshaped(pred_in.shape());
  return result;
}

template <typename Scalar>
LossResult<Scalar> combine(Scalar lambda, LossResult<Scalar> pixel, const LossResult<Scalar>& edge) {
  pixel.value = lambda * pixel.value + (Scalar(1) - lambda) * edge.value;
  pixel.grad.values() = lambda * pixel.grad.values() + (Scalar(1) - lambda) * edge.grad.values();
  return pixel;
}

}  // namespace

EdgeMap canny(const Eigen::ArrayXXd& image, const CannyParams& params) {
  params.validate();
  if (!image.allFinite()) throw NumericError("canny: non-finite input");
  const Index rows = image.rows();
  const Index cols = image.cols();
  EdgeMap edges = EdgeMap::Zero(rows, cols);
  if (rows == 0 || cols == 0) return edges;

  const Gradients g = sobel(gaussian_blur(image, params.gaussian_sigma, params.gaussian_radius));
  const Eigen::ArrayXXd magnitude = (g.gx.square() + g.gy.square()).sqrt();
  const double peak = magnitude.maxCoeff();
  if (peak <= 1e-12) return edges;
  // Comparisons tolerate rounding so that exact ties (e.g. the two columns
  // straddling a step) survive shifts of the input intensity.
  const double tol = 1e-9 * peak;

  auto mag_at = [&](Index y, Index x) {
    return (y < 0 || y >= rows || x < 0 || x >= cols) ? 0.0 : magnitude(y, x);
  };
  Eigen::ArrayXXd thin = Eigen::ArrayXXd::Zero(rows, cols);
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      const double m = magnitude(y, x);
      if (m <= tol) continue;
      double angle = std::atan2(g.gy(y, x), g.gx(y, x)) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      Index dy = 0;
      Index dx = 1;
      if (angle >= 22.5 && angle < 67.5) {
        dy = 1;
        dx = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        dy = 1;
        dx = 0;
      } else if (angle >= 112.5 && angle < 157.5) {
        dy = 1;
        dx = -1;
      }
      if (m + tol >= mag_at(y + dy, x + dx) && m + tol >= mag_at(y - dy, x - dx)) thin(y, x) = m;
    }
  }

  const double high = params.high_threshold * peak - tol;
  const double low = params.low_threshold * peak - tol;
  std::vector<std::pair<Index, Index>> stack;
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      if (thin(y, x) > 0 && thin(y, x) >= high) {
        edges(y, x) = 1;
        stack.emplace_back(y, x);
      }
    }
  }
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    for (Index dy = -1; dy <= 1; ++dy) {
      for (Index dx = -1; dx <= 1; ++dx) {
        const Index ny = y + dy;
        const Index nx = x + dx;
        if (ny < 0 || ny >= rows || nx < 0 || nx >= cols || edges(ny, nx)) continue;
        if (thin(ny, nx) > 0 && thin(ny, nx) >= low) {
          edges(ny, nx) = 1;
          stack.emplace_back(ny, nx);
        }
      }
    }
  }
  return edges;
}

template <typename Scalar>
LossResult<Scalar> mse(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  require_same_shape(pred, target, "mse");
  const Scalar n = static_cast<Scalar>(pred.size());
  LossResult<Scalar> r{Scalar(0), Tensor<Scalar>::zeros_like(pred)};
  const auto diff = (pred.values() - target.values()).eval();
  r.value = diff.square().sum() / n;
  r.grad.values() = Scalar(2) / n * diff;
  return r;
}

template <typename Scalar>
LossResult<Scalar> smooth_l1(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar beta_smooth) {
  require_same_shape(pred, target, "smooth_l1");
  if (!(beta_smooth > Scalar(0))) throw ConfigError("smooth_l1: beta must be > 0");
  const Scalar n = static_cast<Scalar>(pred.size());
  LossResult<Scalar> r{Scalar(0), Tensor<Scalar>::zeros_like(pred)};
  Scalar total = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    const Scalar d = pred[i] - target[i];
    const Scalar a = std::abs(d);
    if (a < beta_smooth) {
      total += Scalar(0.5) * d * d / beta_smooth;
      r.grad[i] = d / beta_smooth / n;
    } else {
      total += a - Scalar(0.5) * beta_smooth;
      r.grad[i] = (d > 0 ? Scalar(1) : Scalar(-1)) / n;
    }
  }
  r.value = total / n;
  return r;
}

template <typename Scalar>
LossResult<Scalar> edge_preserving(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                                   const CannyParams& params, EdgeTerm term) {
  require_same_shape(pred, target, "edge_preserving");
  if (term == EdgeTerm::kSobelSurrogate) return sobel_surrogate(pred, target);
  const Tensor<Scalar> p = as_planes(pred);
  const Tensor<Scalar> t = as_planes(target);
  Index differing = 0;
  for (Index c = 0; c < p.channels(); ++c) {
    const EdgeMap ep = canny(plane_as_image(p, c), params);
    const EdgeMap et = canny(plane_as_image(t, c), params);
    differing += (ep != et).template cast<Index>().sum();
  }
  return {static_cast<Scalar>(static_cast<double>(differing) / static_cast<double>(pred.size())),
          Tensor<Scalar>::zeros_like(pred)};
}

template <typename Scalar>
LossResult<Scalar> mse_canny(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& weights,
                             const CannyParams& params, EdgeTerm term) {
  weights.validate();
  return combine(static_cast<Scalar>(weights.lambda_weight), mse(pred, target),
                 edge_preserving(pred, target, params, term));
}

template <typename Scalar>
LossResult<Scalar> smoothl1_canny(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                                  const LossWeights& weights, const CannyParams& params, EdgeTerm term) {
  weights.validate();
  return combine(static_cast<Scalar>(weights.lambda_weight),
                 smooth_l1(pred, target, static_cast<Scalar>(weights.beta_smooth)),
                 edge_preserving(pred, target, params, term));
}

template <typename Scalar>
LossResult<Scalar> mssce(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& weights,
                         const CannyParams& params, EdgeTerm term) {
  weights.validate();
  // The edge term is shared by both halves; compute it once.
  const LossResult<Scalar> edge = edge_preserving(pred, target, params, term);
  const Scalar lambda = static_cast<Scalar>(weights.lambda_weight);
  LossResult<Scalar> a = combine(lambda, mse(pred, target), edge);
  const LossResult<Scalar> b =
      combine(lambda, smooth_l1(pred, target, static_cast<Scalar>(weights.beta_smooth)), edge);
  a.value += b.value;
  a.grad.values() += b.grad.values();
  return a;
}

template <typename Scalar>
LossResult<Scalar> iou_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  require_same_shape(pred, target, "iou_loss");
  const Scalar eps = static_cast<Scalar>(kIouEpsilon);
  const Scalar inter = (pred.values() * target.values()).sum();
  const Scalar uni = pred.values().sum() + target.values().sum() - inter;
  const Scalar num = inter + eps;
  const Scalar den = uni + eps;
  LossResult<Scalar> r{Scalar(1) - num / den, Tensor<Scalar>::zeros_like(pred)};
  // d(inter)/dp = t, d(union)/dp = 1 - t
  r.grad.values() = -(target.values() * den - num * (Scalar(1) - target.values())) / (den * den);
  return r;
}

template <typename Scalar>
double pixel_accuracy(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, double threshold) {
  require_same_shape(pred, target, "pixel_accuracy");
  const auto p = pred.values() > static_cast<Scalar>(threshold);
  const auto t = target.values() > Scalar(0.5);
  return static_cast<double>((p == t).template cast<Index>().sum()) / static_cast<double>(pred.size());
}

#define PPN_INSTANTIATE_LOSSES(S)                                                                             \
  template LossResult<S> mse(const Tensor<S>&, const Tensor<S>&);                                             \
  template LossResult<S> smooth_l1(const Tensor<S>&, const Tensor<S>&, S);                                    \
  template LossResult<S> edge_preserving(const Tensor<S>&, const Tensor<S>&, const CannyParams&, EdgeTerm);   \
  template LossResult<S> mse_canny(const Tensor<S>&, const Tensor<S>&, const LossWeights&, const CannyParams&, \
                                   EdgeTerm);                                                                  \
  template LossResult<S> smoothl1_canny(const Tensor<S>&, const Tensor<S>&, const LossWeights&,               \
                                        const CannyParams&, EdgeTerm);                                         \
  template LossResult<S> mssce(const Tensor<S>&, const Tensor<S>&, const LossWeights&, const CannyParams&,    \
                               EdgeTerm);                                                                      \
  template LossResult<S> iou_loss(const Tensor<S>&, const Tensor<S>&);                                        \
  template double pixel_accuracy(const Tensor<S>&, const Tensor<S>&, double);

PPN_INSTANTIATE_LOSSES(float)
PPN_INSTANTIATE_LOSSES(double)

#undef PPN_INSTANTIATE_LOSSES

}  // namespace ppn
