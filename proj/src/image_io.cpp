#include "ppn/image_io.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace ppn {

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw FormatError("pnm: channels must be 1 or 3");
  if (static_cast<Index>(image.bytes.size()) != image.width * image.height * image.channels) {
    throw FormatError("pnm: byte count does not match " + std::to_string(image.width) + "x" +
                      std::to_string(image.height) + "x" + std::to_string(image.channels));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.bytes.data()), static_cast<std::streamsize>(image.bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string magic;
  Image img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  if (!in || (magic != "P5" && magic != "P6") || maxval != 255 || img.width <= 0 || img.height <= 0) {
    throw FormatError(path.string() + ": not a binary PNM with maxval 255");
  }
  in.get();  // single whitespace after the header
  img.channels = magic == "P5" ? 1 : 3;
  img.bytes.resize(static_cast<std::size_t>(img.width * img.height * img.channels));
  in.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.bytes.size())) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  return img;
}

}  // namespace ppn
