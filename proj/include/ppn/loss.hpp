#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "ppn/tensor.hpp"

namespace ppn {

struct LossWeights {
  double lambda_weight = 0.85;  // share of the pixel term against the edge term
  double beta_smooth = 1.0;     // SmoothL1 transition point

  void validate() const;
};

struct CannyParams {
  double gaussian_sigma = 1.0;
  int gaussian_radius = 2;
  // Hysteresis thresholds as fractions of the image's peak gradient magnitude.
  double low_threshold = 0.1;
  double high_threshold = 0.2;

  void validate() const;
};

enum class EdgeTerm {
  kCanny,           // value from Canny maps, no gradient
  kSobelSurrogate,  // mean |sobel(pred) - sobel(target)|, differentiable
};

/// Loss value plus its gradient with respect to the prediction.
template <typename Scalar>
struct LossResult {
  Scalar value = 0;
  Tensor<Scalar> grad;
};

using EdgeMap = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Gaussian smoothing, Sobel gradients, non-maximum suppression along the
/// quantized gradient direction, then 8-connected hysteresis. Borders are
/// clamp-extended. Rows are y, columns are x.
EdgeMap canny(const Eigen::ArrayXXd& image, const CannyParams& params = {});

template <typename Scalar>
LossResult<Scalar> mse(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);

template <typename Scalar>
LossResult<Scalar> smooth_l1(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar beta_smooth);

/// Mean |C(target) - C(pred)| over all pixels, Canny run per channel.
template <typename Scalar>
LossResult<Scalar> edge_preserving(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                                   const CannyParams& params, EdgeTerm term = EdgeTerm::kCanny);

template <typename Scalar>
LossResult<Scalar> mse_canny(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& weights,
                             const CannyParams& params, EdgeTerm term = EdgeTerm::kCanny);

template <typename Scalar>
LossResult<Scalar> smoothl1_canny(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                                  const LossWeights& weights, const CannyParams& params,
                                  EdgeTerm term = EdgeTerm::kCanny);

/// mse_canny + smoothl1_canny.
template <typename Scalar>
LossResult<Scalar> mssce(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& weights,
                         const CannyParams& params, EdgeTerm term = EdgeTerm::kCanny);

inline constexpr double kIouEpsilon = 1e-6;

/// Soft IoU loss 1 - (I + eps) / (U + eps).
template <typename Scalar>
LossResult<Scalar> iou_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);

/// Fraction of pixels where (pred > threshold) agrees with (target > 0.5).
template <typename Scalar>
double pixel_accuracy(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, double threshold = 0.5);

}  // namespace ppn
