#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace affect {

/// 8-bit sRGB raster, interleaved R,G,B, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h);

  bool empty() const { return width <= 0 || height <= 0; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

  std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }

  bool operator==(const RgbImage&) const = default;
};

// Decoding accepts anything OpenCV's imgcodecs reads (PNG and JPEG at least).
RgbImage read_image(const std::filesystem::path& path);
RgbImage decode_image(std::span<const std::uint8_t> encoded);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// Area-averaged downscale so the longer side is at most `max_side`.
RgbImage make_thumbnail(const RgbImage& image, int max_side);

}  // namespace affect
