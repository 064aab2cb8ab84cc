#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "tinyssd/priors.hpp"
#include "tinyssd/tensor.hpp"

namespace tinyssd {

/// 8-bit RGB image, interleaved, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

  std::uint8_t at(int x, int y, int channel) const noexcept {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
  }
  void set(int x, int y, std::array<std::uint8_t, 3> rgb) noexcept;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary PPM (P6, maxval <= 255). Malformed input throws FormatError with the byte offset.
RgbImage read_ppm(std::istream& in);
RgbImage load_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, std::ostream& out);
void save_ppm(const RgbImage& image, const std::filesystem::path& path);

struct PreprocessOptions {
  int size = 300;
  std::array<float, 3> bgr_means = {104.0f, 117.0f, 123.0f};
};

/// Bilinear resize (half-pixel centers, edge clamp) to size x size, reorder to B,G,R and
/// subtract the per-channel means. Returns a 1x3xsize x size tensor.
Tensor preprocess_image(const RgbImage& image, const PreprocessOptions& options = {});

/// Burns a rectangle outline for a normalized box into the image.
void draw_box_outline(RgbImage& image, const Box& box, std::array<std::uint8_t, 3> color, int thickness = 2);

}  // namespace tinyssd
