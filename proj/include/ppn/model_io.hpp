#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppn/network.hpp"

namespace ppn {

// Layout (all little-endian):
//   "PPN1"
//   u32 x 7: t_in, base_channels, depth, out_channels, activation (0 sigmoid,
//            1 tanh), skips (0/1), reserved (0)
//   per persisted array, in construction order:
//     u32 rank, u32 dims[rank], float32 payload[prod(dims)]
// The reader rebuilds the topology from the header and requires every shape
// to match and the byte count to be exact.
inline constexpr char kModelMagic[4] = {'P', 'P', 'N', '1'};

template <typename Scalar>
std::vector<std::uint8_t> encode_model(const Network<Scalar>& net);
template <typename Scalar>
Network<Scalar> decode_model(const std::vector<std::uint8_t>& bytes);

template <typename Scalar>
void save_model(const std::filesystem::path& path, const Network<Scalar>& net);
template <typename Scalar>
Network<Scalar> load_model(const std::filesystem::path& path);

/// FNV-1a over the learnable parameters (batchnorm running statistics excluded).
template <typename Scalar>
std::uint64_t weights_hash(const Network<Scalar>& net);

}  // namespace ppn
