#include "roverplan/pnm.hpp"

#include <fstream>
#include <string>

#include "roverplan/errors.hpp"

namespace roverplan {

void write_pnm(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw UsageError("pnm: 1 or 3 channels only");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

namespace {

int read_header_int(std::istream& in, const std::string& what) {
  // Skips whitespace and '#' comments.
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in || v < 0) throw FormatError(what + ": bad header");
  return v;
}

}  // namespace

Image8 read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError(path.string() + ": not a binary graymap/pixmap");
  }
  const int w = read_header_int(in, path.string());
  const int h = read_header_int(in, path.string());
  const int maxval = read_header_int(in, path.string());
  if (maxval != 255) throw FormatError(path.string() + ": only maxval 255 is supported");
  in.get();
  Image8 img(h, w, channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
    throw FormatError(path.string() + ": truncated file");
  }
  return img;
}

}  // namespace roverplan
