#include "tinyssd/tensor.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "byteio.hpp"
#include "tinyssd/errors.hpp"

namespace tinyssd {

namespace {
constexpr std::string_view kTensorMagic = "TNSR";
}

std::string to_string(const Shape& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w);
}

Tensor::Tensor(Shape shape) : shape_(shape) {
  if (!shape_.valid()) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape_));
  data_.assign(shape_.size(), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (!shape_.valid()) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape_));
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

Tensor Tensor::slice_channels(int begin, int count) const {
  if (begin < 0 || count < 1 || begin + count > shape_.c) {
    throw ShapeError("channel slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + to_string(shape_));
  }
  Tensor out(Shape{shape_.n, count, shape_.h, shape_.w});
  const std::size_t plane = shape_.plane();
  for (int n = 0; n < shape_.n; ++n) {
    auto src = data_.begin() + static_cast<std::ptrdiff_t>(index(n, begin, 0, 0));
    std::copy_n(src, plane * count, out.data_.begin() + static_cast<std::ptrdiff_t>(out.index(n, 0, 0, 0)));
  }
  return out;
}

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<float> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void write_tnsr(const Tensor& tensor, std::ostream& out) {
  std::vector<std::uint8_t> buf;
  buf.reserve(20 + tensor.data().size() * 4);
  detail::put_bytes(buf, kTensorMagic);
  const Shape& s = tensor.shape();
  for (int extent : {s.n, s.c, s.h, s.w}) detail::put_u32(buf, static_cast<std::uint32_t>(extent));
  for (float v : tensor.data()) detail::put_f32(buf, v);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed to write tensor stream");
}

Tensor read_tnsr(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader reader(std::move(bytes));
  if (reader.bytes(4, "magic") != kTensorMagic) throw FormatError("bad tensor magic, expected TNSR", 0);
  Shape s;
  int* extents[] = {&s.n, &s.c, &s.h, &s.w};
  for (int* e : extents) {
    const std::size_t at = reader.offset();
    const std::uint32_t v = reader.u32("tensor extent");
    if (v == 0 || v > (1u << 24)) throw FormatError("invalid tensor extent " + std::to_string(v), at);
    *e = static_cast<int>(v);
  }
  const std::size_t count = s.size();
  reader.require(count * 4, "tensor payload");
  std::vector<float> data(count);
  for (auto& v : data) v = reader.f32("tensor payload");
  if (reader.remaining() != 0) throw FormatError("trailing bytes after tensor payload", reader.offset());
  return Tensor(s, std::move(data));
}

void save_tnsr(const Tensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_tnsr(tensor, out);
}

Tensor load_tnsr(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_tnsr(in);
}

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace detail

}  // namespace tinyssd
