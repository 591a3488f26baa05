#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ppn/tensor.hpp"

namespace ppn {

struct Image {
  Index width = 0;
  Index height = 0;
  int channels = 1;                 // 1 = graymap, 3 = RGB pixmap
  std::vector<std::uint8_t> bytes;  // row-major, interleaved channels
};

// Binary P5 / P6 with maxval 255.
void write_pnm(const std::filesystem::path& path, const Image& image);
Image read_pnm(const std::filesystem::path& path);

/// Maps a [0, 1] plane to bytes via round(v * 255), clamped.
template <typename Scalar>
Image unit_plane_to_image(const Tensor<Scalar>& tensor, Index channel) {
  Image img{tensor.width(), tensor.height(), 1, {}};
  img.bytes.reserve(static_cast<std::size_t>(img.width * img.height));
  const auto plane = tensor.plane(channel);
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      double v = static_cast<double>(plane(y, x));
      v = v < 0 ? 0 : (v > 1 ? 1 : v);
      img.bytes.push_back(static_cast<std::uint8_t>(v * 255.0 + 0.5));
    }
  }
  return img;
}

}  // namespace ppn
