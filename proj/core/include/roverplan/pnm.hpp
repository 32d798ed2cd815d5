#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace roverplan {

/// 8-bit image, row-major; 1 channel (graymap) or 3 channels (pixmap).
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
                   static_cast<std::size_t>(c),
               fill) {}

  std::uint8_t* at(int row, int col) {
    return pixels.data() + (static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                            static_cast<std::size_t>(col)) *
                               static_cast<std::size_t>(channels);
  }
  const std::uint8_t* at(int row, int col) const { return const_cast<Image8*>(this)->at(row, col); }

  friend bool operator==(const Image8&, const Image8&) = default;
};

/// Binary P5 (1 channel) or P6 (3 channels), maxval 255.
void write_pnm(const std::filesystem::path& path, const Image8& image);
Image8 read_pnm(const std::filesystem::path& path);

}  // namespace roverplan
