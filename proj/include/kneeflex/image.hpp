#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace kneeflex {

inline constexpr int kFrameWidth = 200;
inline constexpr int kFrameHeight = 150;

using Rgba = std::array<std::uint8_t, 4>;

/// 8-bit RGBA raster, row-major, origin top-left, y growing downward.
struct ImageRGBA {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 4

  ImageRGBA() = default;
  ImageRGBA(int w, int h, Rgba fill = {0, 0, 0, 0});

  /// Empty 200x150 frame with transparent pixels.
  static ImageRGBA frame() { return ImageRGBA(kFrameWidth, kFrameHeight); }

  bool is_frame() const { return width == kFrameWidth && height == kFrameHeight; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 4; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 4;
  }
  void set(int x, int y, Rgba c);
  Rgba get(int x, int y) const;

  bool operator==(const ImageRGBA&) const = default;
};

// --- codecs ---------------------------------------------------------------

/// Deterministic 8-bit RGBA PNG encoding (fixed compression, no timestamps).
std::vector<std::uint8_t> encode_png(const ImageRGBA& img);
void write_png(const std::filesystem::path& path, const ImageRGBA& img);

/// Decodes PNG or JPEG (sniffed from the leading bytes) into RGBA.
ImageRGBA read_image(const std::filesystem::path& path);
ImageRGBA decode_png(std::span<const std::uint8_t> bytes);
ImageRGBA decode_jpeg(std::span<const std::uint8_t> bytes);

// --- resampling -----------------------------------------------------------

/// Resizes with box averaging when shrinking and bilinear interpolation when
/// enlarging (per axis). Pixel centers sit at integer coordinates.
ImageRGBA resize(const ImageRGBA& src, int width, int height);

/// Largest centered crop with the aspect ratio width:height.
ImageRGBA center_crop_to_aspect(const ImageRGBA& src, int width, int height);

/// Normalized separable Gaussian kernel with radius ceil(3 sigma).
std::vector<float> gaussian_kernel(double sigma);

/// Separable Gaussian blur of a single float plane, clamp-to-edge borders.
void gaussian_blur_plane(std::span<float> plane, int width, int height, double sigma);

/// Gaussian blur of the RGB channels; alpha is left untouched.
ImageRGBA gaussian_blur(const ImageRGBA& src, double sigma);

}  // namespace kneeflex
