#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tinyssd {

/// Extents of a rank-4 NCHW tensor. Every extent is at least 1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  bool valid() const noexcept { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Dense float tensor in (batch, channel, row, column) order, row-major.
class Tensor {
 public:
  /// Zero-filled tensor. Throws ShapeError if any extent is < 1.
  explicit Tensor(Shape shape);
  /// Takes ownership of `data`, which must hold exactly shape.size() values.
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::size_t index(int n, int c, int h, int w) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float at(int n, int c, int h, int w) const noexcept { return data_[index(n, c, h, w)]; }
  float& at(int n, int c, int h, int w) noexcept { return data_[index(n, c, h, w)]; }

  /// Copy of channels [begin, begin + count) for every batch item.
  Tensor slice_channels(int begin, int count) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Row-major 2-D float array; used for per-prior rows (loc offsets, class scores, boxes).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  Matrix(std::size_t r, std::size_t c, std::vector<float> values);

  float operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
  float& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const noexcept {
    return std::span<const float>(data).subspan(r * cols, cols);
  }
  std::span<float> row(std::size_t r) noexcept { return std::span<float>(data).subspan(r * cols, cols); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Raw "TNSR" tensor files: magic, four u32 LE extents (n,c,h,w), then f32 LE payload.
void write_tnsr(const Tensor& tensor, std::ostream& out);
Tensor read_tnsr(std::istream& in);
void save_tnsr(const Tensor& tensor, const std::filesystem::path& path);
Tensor load_tnsr(const std::filesystem::path& path);

}  // namespace tinyssd
