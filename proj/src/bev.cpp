#include "ppn/bev.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "ppn/image_io.hpp"

namespace ppn {

namespace {

constexpr double kEmpty = -std::numeric_limits<double>::infinity();

float read_le_float(const std::byte* p) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, p, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  float value = 0.f;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

void append_le_float(std::vector<char>& out, float value) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &value, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char raw[4];
  std::memcpy(raw, &bits, sizeof(raw));
  out.insert(out.end(), raw, raw + 4);
}

void check_stride(int floats_per_point) {
  if (floats_per_point != 4 && floats_per_point != 5) {
    throw ConfigError("floats per point must be 4 or 5, got " + std::to_string(floats_per_point));
  }
}

}  // namespace

void BevConfig::validate() const {
  if (!(resolution > 0) || !std::isfinite(resolution)) throw ConfigError("bev: resolution must be > 0");
  if (width < 1 || height < 1 || depth_size < 1) throw ConfigError("bev: width, height, depth_size must be >= 1");
  if (!(threshold > 0 && threshold < 1)) throw ConfigError("bev: threshold must lie in (0, 1)");
}

Index ElevationGrid::occupied_count() const {
  return static_cast<Index>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
}

PointCloud load_pointcloud(std::span<const std::byte> bytes, int floats_per_point) {
  check_stride(floats_per_point);
  const std::size_t record = 4u * static_cast<std::size_t>(floats_per_point);
  if (bytes.size() % record != 0) {
    throw FormatError("length " + std::to_string(bytes.size()) + " not multiple of " + std::to_string(record));
  }
  PointCloud cloud;
  cloud.points.reserve(bytes.size() / record);
  for (std::size_t offset = 0; offset < bytes.size(); offset += record) {
    const std::byte* p = bytes.data() + offset;
    const LidarPoint pt{read_le_float(p), read_le_float(p + 4), read_le_float(p + 8), read_le_float(p + 12)};
    if (std::isfinite(pt.x) && std::isfinite(pt.y) && std::isfinite(pt.z) && std::isfinite(pt.intensity)) {
      cloud.points.push_back(pt);
    } else {
      ++cloud.dropped_non_finite;
    }
  }
  return cloud;
}

PointCloud read_pointcloud_file(const std::filesystem::path& path, int floats_per_point) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return load_pointcloud(std::as_bytes(std::span(raw)), floats_per_point);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_pointcloud_file(const std::filesystem::path& path, const PointCloud& cloud, int floats_per_point) {
  check_stride(floats_per_point);
  std::vector<char> out;
  out.reserve(cloud.size() * 4u * static_cast<std::size_t>(floats_per_point));
  for (const LidarPoint& p : cloud.points) {
    append_le_float(out, p.x);
    append_le_float(out, p.y);
    append_le_float(out, p.z);
    append_le_float(out, p.intensity);
    if (floats_per_point == 5) append_le_float(out, 0.f);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

ElevationGrid voxelize(const PointCloud& cloud, const BevConfig& config) {
  config.validate();
  ElevationGrid grid{config.width, config.height, config.depth_size, {}, {}};
  const auto cells = static_cast<std::size_t>(config.width * config.height * config.depth_size);
  grid.values.assign(cells, kEmpty);
  grid.occupied.assign(cells, 0);

  const double half_w = static_cast<double>(config.width) / 2.0;
  const double half_h = static_cast<double>(config.height) / 2.0;
  const double half_d = static_cast<double>(config.depth_size) / 2.0;
  for (const LidarPoint& p : cloud.points) {
    const double vx = std::floor(p.x / config.resolution + half_w);
    const double vy = std::floor(p.y / config.resolution + half_h);
    const double vz = std::floor(p.z / config.resolution + half_d);
    if (!std::isfinite(vx + vy + vz) || vx < 0 || vy < 0 || vz < 0 || vx >= static_cast<double>(config.width) ||
        vy >= static_cast<double>(config.height) || vz >= static_cast<double>(config.depth_size)) {
      continue;
    }
    const auto i = static_cast<std::size_t>(
        grid.index(static_cast<Index>(vx), static_cast<Index>(vy), static_cast<Index>(vz)));
    grid.values[i] = std::max(grid.values[i], static_cast<double>(p.z));
    grid.occupied[i] = 1;
  }
  return grid;
}

Eigen::ArrayXXd flatten_and_rescale(const ElevationGrid& grid) {
  Eigen::ArrayXXd column_max = Eigen::ArrayXXd::Constant(grid.width, grid.height, kEmpty);
  for (Index x = 0; x < grid.width; ++x) {
    for (Index y = 0; y < grid.height; ++y) {
      for (Index z = 0; z < grid.depth_size; ++z) {
        const auto i = static_cast<std::size_t>(grid.index(x, y, z));
        if (grid.occupied[i]) column_max(x, y) = std::max(column_max(x, y), grid.values[i]);
      }
    }
  }

  const auto non_empty = column_max > kEmpty;
  if (!non_empty.any()) return Eigen::ArrayXXd::Zero(grid.width, grid.height);
  const double lo = non_empty.select(column_max, std::numeric_limits<double>::infinity()).minCoeff();
  const double hi = column_max.maxCoeff();
  if (hi == lo) return non_empty.cast<double>();
  return non_empty.select((column_max - lo) / (hi - lo), 0.0);
}

BevMap binarize(const Eigen::ArrayXXd& heights, double threshold, const BevConfig& config) {
  BevMap map;
  map.cells = (heights > threshold).cast<std::uint8_t>();
  map.config = config;
  return map;
}

BevMap binarize(const Eigen::ArrayXXd& heights, double threshold) {
  BevConfig config;
  config.width = heights.rows();
  config.height = heights.cols();
  config.threshold = threshold;
  return binarize(heights, threshold, config);
}

BevMap pointcloud_to_bev(const PointCloud& cloud, const BevConfig& config) {
  return binarize(flatten_and_rescale(voxelize(cloud, config)), config.threshold, config);
}

BevSequence stack_sequence(std::vector<BevMap> maps) {
  if (maps.empty()) throw ShapeError("stack_sequence: need at least one map");
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (maps[i].width() != maps[0].width() || maps[i].height() != maps[0].height()) {
      throw ShapeError("stack_sequence: map at index " + std::to_string(i) + " is " +
                       std::to_string(maps[i].width()) + "x" + std::to_string(maps[i].height()) +
                       ", expected " + std::to_string(maps[0].width()) + "x" + std::to_string(maps[0].height()));
    }
  }
  return BevSequence{std::move(maps)};
}

void write_bev_pgm(const std::filesystem::path& path, const BevMap& map) {
  Image img{map.width(), map.height(), 1, {}};
  img.bytes.reserve(static_cast<std::size_t>(img.width * img.height));
  for (Index y = 0; y < map.height(); ++y) {
    for (Index x = 0; x < map.width(); ++x) img.bytes.push_back(map.cells(x, y) ? 255 : 0);
  }
  write_pnm(path, img);
}

}  // namespace ppn
