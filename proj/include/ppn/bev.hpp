#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ppn/tensor.hpp"

namespace ppn {

struct LidarPoint {
  float x = 0.f;  // meters
  float y = 0.f;
  float z = 0.f;
  float intensity = 0.f;
};

struct PointCloud {
  std::vector<LidarPoint> points;
  std::size_t dropped_non_finite = 0;  // records rejected at ingestion

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct BevConfig {
  double resolution = 0.2;  // meters per voxel
  Index width = 1000;
  Index height = 1000;
  Index depth_size = 32;
  double threshold = 0.5;

  /// 64 x 64 grid at 0.5 m, the scale used for desk-size experiments.
  static BevConfig desk() { return {0.5, 64, 64, 32, 0.5}; }

  void validate() const;
};

/// Per-voxel maximum elevation. Unoccupied voxels hold -infinity.
struct ElevationGrid {
  Index width = 0;
  Index height = 0;
  Index depth_size = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> occupied;

  Index index(Index x, Index y, Index z) const { return (x * height + y) * depth_size + z; }
  Index occupied_count() const;
};

/// Binary occupancy grid, addressed cells(x, y) with x along width.
struct BevMap {
  using Cells = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

  Cells cells;
  BevConfig config;

  Index width() const { return cells.rows(); }
  Index height() const { return cells.cols(); }
  Index occupied_count() const { return cells.template cast<Index>().sum(); }
};

/// Frames ordered oldest first; the last frame is the current scan.
struct BevSequence {
  std::vector<BevMap> frames;

  Index t_len() const { return static_cast<Index>(frames.size()); }
};

/// Parses a flat little-endian float32 sweep (point-major, 4 or 5 floats per
/// point). The fifth float, when present, is skipped. Points carrying any
/// non-finite value are dropped and counted.
PointCloud load_pointcloud(std::span<const std::byte> bytes, int floats_per_point);
PointCloud read_pointcloud_file(const std::filesystem::path& path, int floats_per_point);
/// Writes a cloud in the layout load_pointcloud reads; a stride-5 export
/// stores 0 in the ring slot.
void write_pointcloud_file(const std::filesystem::path& path, const PointCloud& cloud, int floats_per_point);

ElevationGrid voxelize(const PointCloud& cloud, const BevConfig& config);

/// Column-wise max over depth, then min-max rescale over non-empty columns.
/// Empty columns read 0; if every non-empty column has the same value, they
/// all read 1. Result is indexed (x, y).
Eigen::ArrayXXd flatten_and_rescale(const ElevationGrid& grid);

BevMap binarize(const Eigen::ArrayXXd& heights, double threshold, const BevConfig& config);
BevMap binarize(const Eigen::ArrayXXd& heights, double threshold);

BevMap pointcloud_to_bev(const PointCloud& cloud, const BevConfig& config);

BevSequence stack_sequence(std::vector<BevMap> maps);

/// T x H x W tensor with channel t = frame t and plane(t)(y, x) = cells(x, y).
template <typename Scalar>
Tensor<Scalar> sequence_tensor(const BevSequence& seq) {
  if (seq.frames.empty()) throw ShapeError("sequence_tensor: empty sequence");
  const Index w = seq.frames.front().width();
  const Index h = seq.frames.front().height();
  Tensor<Scalar> out(Shape{seq.t_len(), h, w});
  for (Index t = 0; t < seq.t_len(); ++t) {
    out.plane(t) = seq.frames[static_cast<std::size_t>(t)].cells.transpose().template cast<Scalar>().matrix();
  }
  return out;
}

/// Binary PGM (P5, maxval 255), y as rows, occupied -> 255.
void write_bev_pgm(const std::filesystem::path& path, const BevMap& map);

}  // namespace ppn
