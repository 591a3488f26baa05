#include "ppn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace ppn {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError("model: truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                        " more, total " + std::to_string(bytes_.size()) + ")");
    }
  }

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename Scalar>
std::vector<std::uint8_t> encode_model(const Network<Scalar>& net) {
  const NetworkConfig& c = net.config();
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kModelMagic), std::end(kModelMagic));
  w.u32(static_cast<std::uint32_t>(c.t_in));
  w.u32(static_cast<std::uint32_t>(c.base_channels));
  w.u32(static_cast<std::uint32_t>(c.depth));
  w.u32(static_cast<std::uint32_t>(c.out_channels));
  w.u32(static_cast<std::uint32_t>(c.output_activation));
  w.u32(c.skips ? 1u : 0u);
  w.u32(0u);
  net.for_each_state([&w](const Shape& shape, const typename Tensor<Scalar>::Array& values) {
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (Index d : shape) w.u32(static_cast<std::uint32_t>(d));
    for (Index i = 0; i < values.size(); ++i) w.f32(static_cast<float>(values[i]));
  });
  return std::move(w.bytes);
}

template <typename Scalar>
Network<Scalar> decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw FormatError("model: missing PPN1 magic");
  }
  Reader r(bytes);
  r.skip(4);
  NetworkConfig config;
  config.t_in = r.u32();
  config.base_channels = r.u32();
  config.depth = r.u32();
  config.out_channels = r.u32();
  const std::uint32_t activation = r.u32();
  const std::uint32_t skips = r.u32();
  r.u32();  // reserved
  if (activation > 1 || skips > 1) throw FormatError("model: bad activation or skips flag");
  if (config.t_in > 65536 || config.base_channels > 65536 || config.out_channels > 65536 || config.depth > 16) {
    throw FormatError("model: implausible header dimensions");
  }
  config.output_activation = static_cast<Activation>(activation);
  config.skips = skips == 1;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model: invalid header: ") + e.what());
  }

  Network<Scalar> net(config);
  Index stage = 0;
  net.for_each_state([&](const Shape& expected, typename Tensor<Scalar>::Array& values) {
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = r.u32();
    if (shape != expected) {
      throw FormatError("model: array " + std::to_string(stage) + " has shape " + shape_string(shape) +
                        ", expected " + shape_string(expected));
    }
    r.need(static_cast<std::size_t>(values.size()) * 4);
    for (Index i = 0; i < values.size(); ++i) values[i] = static_cast<Scalar>(r.f32());
    ++stage;
  });
  if (r.remaining() != 0) {
    throw FormatError("model: " + std::to_string(r.remaining()) + " trailing bytes after last array");
  }
  return net;
}

template <typename Scalar>
void save_model(const std::filesystem::path& path, const Network<Scalar>& net) {
  const std::vector<std::uint8_t> bytes = encode_model(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

template <typename Scalar>
Network<Scalar> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_model<Scalar>(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template <typename Scalar>
std::uint64_t weights_hash(const Network<Scalar>& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor<Scalar>* p : net.parameters()) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(p->data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(p->size()) * sizeof(Scalar); ++i) {
      h = (h ^ bytes[i]) * 0x100000001b3ULL;
    }
  }
  return h;
}

template std::vector<std::uint8_t> encode_model(const Network<float>&);
template std::vector<std::uint8_t> encode_model(const Network<double>&);
template Network<float> decode_model(const std::vector<std::uint8_t>&);
template Network<double> decode_model(const std::vector<std::uint8_t>&);
template void save_model(const std::filesystem::path&, const Network<float>&);
template void save_model(const std::filesystem::path&, const Network<double>&);
template Network<float> load_model(const std::filesystem::path&);
template Network<double> load_model(const std::filesystem::path&);
template std::uint64_t weights_hash(const Network<float>&);
template std::uint64_t weights_hash(const Network<double>&);

}  // namespace ppn
