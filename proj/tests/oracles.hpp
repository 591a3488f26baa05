#pragma once

// Slow reference implementations, written from the definitions and sharing
// no code with the library's fast paths.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ppn/bev.hpp"
#include "ppn/tensor.hpp"

namespace oracle {

using ppn::Index;

inline long voxel_coord(float v, double resolution, Index extent) {
  return static_cast<long>(std::floor(static_cast<double>(v) / resolution + static_cast<double>(extent) / 2.0));
}

/// Max z of the points landing in voxel (vx, vy, vz), found by scanning the
/// whole cloud. NaN when no point lands there.
inline double voxel_max(const ppn::PointCloud& cloud, const ppn::BevConfig& c, Index vx, Index vy, Index vz) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const ppn::LidarPoint& p : cloud.points) {
    if (voxel_coord(p.x, c.resolution, c.width) != vx) continue;
    if (voxel_coord(p.y, c.resolution, c.height) != vy) continue;
    if (voxel_coord(p.z, c.resolution, c.depth_size) != vz) continue;
    if (std::isnan(best) || p.z > best) best = p.z;
  }
  return best;
}

/// Column maxima (x, y) of the occupied voxels, NaN where the column is empty.
/// Point-major: each point is binned independently, then columns are reduced.
inline std::vector<std::vector<double>> column_maxima(const ppn::PointCloud& cloud, const ppn::BevConfig& c) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(c.width),
                                        std::vector<double>(static_cast<std::size_t>(c.height), nan));
  for (const ppn::LidarPoint& p : cloud.points) {
    const long vx = voxel_coord(p.x, c.resolution, c.width);
    const long vy = voxel_coord(p.y, c.resolution, c.height);
    const long vz = voxel_coord(p.z, c.resolution, c.depth_size);
    if (vx < 0 || vx >= c.width || vy < 0 || vy >= c.height || vz < 0 || vz >= c.depth_size) continue;
    double& cell = cols[static_cast<std::size_t>(vx)][static_cast<std::size_t>(vy)];
    if (std::isnan(cell) || p.z > cell) cell = p.z;
  }
  return cols;
}

/// Binary occupancy map, indexed [x][y].
inline std::vector<std::vector<int>> bev(const ppn::PointCloud& cloud, const ppn::BevConfig& c) {
  const auto cols = column_maxima(cloud, c);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& row : cols) {
    for (double v : row) {
      if (std::isnan(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  std::vector<std::vector<int>> out(cols.size(), std::vector<int>(cols.empty() ? 0 : cols[0].size(), 0));
  for (std::size_t x = 0; x < cols.size(); ++x) {
    for (std::size_t y = 0; y < cols[x].size(); ++y) {
      const double v = cols[x][y];
      if (std::isnan(v)) continue;
      const double scaled = hi == lo ? 1.0 : (v - lo) / (hi - lo);
      out[x][y] = scaled > c.threshold ? 1 : 0;
    }
  }
  return out;
}

/// Direct convolution; weights [out, in, kh, kw].
inline ppn::Tensor<double> conv2d(const ppn::Tensor<double>& x, const ppn::Tensor<double>& w,
                                  const ppn::Tensor<double>& b, Index stride, Index pad) {
  const Index co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const Index ho = (x.height() + 2 * pad - kh) / stride + 1;
  const Index wo = (x.width() + 2 * pad - kw) / stride + 1;
  ppn::Tensor<double> y({co, ho, wo});
  for (Index o = 0; o < co; ++o) {
    for (Index i = 0; i < ho; ++i) {
      for (Index j = 0; j < wo; ++j) {
        double acc = b[o];
        for (Index c = 0; c < ci; ++c) {
          for (Index u = 0; u < kh; ++u) {
            for (Index v = 0; v < kw; ++v) {
              const Index r = i * stride + u - pad;
              const Index s = j * stride + v - pad;
              if (r < 0 || s < 0 || r >= x.height() || s >= x.width()) continue;
              acc += w[((o * ci + c) * kh + u) * kw + v] * x(c, r, s);
            }
          }
        }
        y(o, i, j) = acc;
      }
    }
  }
  return y;
}

/// Scatter form of the transposed convolution; weights [in, out, kh, kw].
inline ppn::Tensor<double> conv_transpose2d(const ppn::Tensor<double>& x, const ppn::Tensor<double>& w,
                                            const ppn::Tensor<double>& b, Index stride, Index pad) {
  const Index ci = w.dim(0), co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const Index ho = (x.height() - 1) * stride - 2 * pad + kh;
  const Index wo = (x.width() - 1) * stride - 2 * pad + kw;
  ppn::Tensor<double> y({co, ho, wo});
  for (Index o = 0; o < co; ++o) y.plane(o).setConstant(b[o]);
  for (Index c = 0; c < ci; ++c) {
    for (Index i = 0; i < x.height(); ++i) {
      for (Index j = 0; j < x.width(); ++j) {
        for (Index o = 0; o < co; ++o) {
          for (Index u = 0; u < kh; ++u) {
            for (Index v = 0; v < kw; ++v) {
              const Index r = i * stride + u - pad;
              const Index s = j * stride + v - pad;
              if (r < 0 || s < 0 || r >= ho || s >= wo) continue;
              y(o, r, s) += w[((c * co + o) * kh + u) * kw + v] * x(c, i, j);
            }
          }
        }
      }
    }
  }
  return y;
}

inline ppn::Tensor<double> maxpool2d(const ppn::Tensor<double>& x) {
  ppn::Tensor<double> y({x.channels(), x.height() / 2, x.width() / 2});
  for (Index c = 0; c < y.channels(); ++c) {
    for (Index i = 0; i < y.height(); ++i) {
      for (Index j = 0; j < y.width(); ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (Index u = 0; u < 2; ++u) {
          for (Index v = 0; v < 2; ++v) best = std::max(best, x(c, 2 * i + u, 2 * j + v));
        }
        y(c, i, j) = best;
      }
    }
  }
  return y;
}

}  // namespace oracle
