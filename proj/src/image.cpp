#include "tinyssd/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "tinyssd/errors.hpp"

namespace tinyssd {

RgbImage::RgbImage(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
  if (w < 1 || h < 1) throw ShapeError("image extents must be >= 1");
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels.begin() + i);
}

void RgbImage::set(int x, int y, std::array<std::uint8_t, 3> rgb) noexcept {
  std::copy(rgb.begin(), rgb.end(), pixels.begin() + (static_cast<std::size_t>(y) * width + x) * 3);
}

namespace {

// Cursor over the PPM header: integers separated by whitespace and '#' comments.
class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::size_t offset() const { return pos_; }

  int integer(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1 << 24)) throw FormatError(std::string("PPM ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PPM: expected ") + what, start);
    return static_cast<int>(value);
  }

  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("PPM: expected whitespace before pixel data", pos_);
    }
    ++pos_;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_;
};

}  // namespace

RgbImage read_ppm(std::istream& in) {
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("not a binary PPM (P6)", 0);

  HeaderReader header(bytes, 2);
  const std::size_t width_at = header.offset();
  const int width = header.integer("width");
  const int height = header.integer("height");
  if (width < 1 || height < 1) throw FormatError("PPM extents must be >= 1", width_at);
  const std::size_t maxval_at = header.offset();
  const int maxval = header.integer("maxval");
  if (maxval < 1 || maxval > 255) {
    throw FormatError("PPM maxval " + std::to_string(maxval) + " unsupported (8-bit only)", maxval_at);
  }
  header.single_whitespace();

  const std::size_t data_at = header.offset();
  const std::size_t expected = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - data_at < expected) {
    throw FormatError("PPM pixel data truncated: " + std::to_string(bytes.size() - data_at) + " of " +
                          std::to_string(expected) + " bytes",
                      bytes.size());
  }

  RgbImage image(width, height);
  for (std::size_t i = 0; i < expected; ++i) {
    const int v = bytes[data_at + i];
    image.pixels[i] = static_cast<std::uint8_t>(maxval == 255 ? v : std::min(255, (v * 255 + maxval / 2) / maxval));
  }
  return image;
}

RgbImage load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_ppm(in);
}

void write_ppm(const RgbImage& image, std::ostream& out) {
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error("failed to write PPM stream");
}

void save_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_ppm(image, out);
}

Tensor preprocess_image(const RgbImage& image, const PreprocessOptions& options) {
  if (image.width < 1 || image.height < 1) throw ShapeError("image extents must be >= 1");
  const int size = options.size;
  Tensor out(Shape{1, 3, size, size});

  struct Tap {
    int lo, hi;
    double frac;
  };
  auto taps = [size](int src_extent) {
    std::vector<Tap> t(static_cast<std::size_t>(size));
    const double scale = static_cast<double>(src_extent) / size;
    for (int d = 0; d < size; ++d) {
      const double s = std::clamp((d + 0.5) * scale - 0.5, 0.0, static_cast<double>(src_extent - 1));
      const int lo = static_cast<int>(std::floor(s));
      t[d] = {lo, std::min(lo + 1, src_extent - 1), s - lo};
    }
    return t;
  };
  const auto xs = taps(image.width);
  const auto ys = taps(image.height);

  // Output channel k holds B, G, R for k = 0, 1, 2.
  for (int k = 0; k < 3; ++k) {
    const int rgb = 2 - k;
    const double mean = options.bgr_means[k];
    for (int y = 0; y < size; ++y) {
      const Tap& ty = ys[y];
      for (int x = 0; x < size; ++x) {
        const Tap& tx = xs[x];
        const double a = image.at(tx.lo, ty.lo, rgb);
        const double b = image.at(tx.hi, ty.lo, rgb);
        const double c = image.at(tx.lo, ty.hi, rgb);
        const double d = image.at(tx.hi, ty.hi, rgb);
        const double top = a + (b - a) * tx.frac;
        const double bottom = c + (d - c) * tx.frac;
        out.at(0, k, y, x) = static_cast<float>(top + (bottom - top) * ty.frac - mean);
      }
    }
  }
  return out;
}

void draw_box_outline(RgbImage& image, const Box& box, std::array<std::uint8_t, 3> color, int thickness) {
  const Box b = box.clipped();
  auto px = [](float v, int extent) {
    return std::clamp(static_cast<int>(std::lround(v * extent)), 0, extent - 1);
  };
  const int x0 = px(b.xmin, image.width);
  const int x1 = px(b.xmax, image.width);
  const int y0 = px(b.ymin, image.height);
  const int y1 = px(b.ymax, image.height);
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      image.set(x, std::min(y0 + t, image.height - 1), color);
      image.set(x, std::max(y1 - t, 0), color);
    }
    for (int y = y0; y <= y1; ++y) {
      image.set(std::min(x0 + t, image.width - 1), y, color);
      image.set(std::max(x1 - t, 0), y, color);
    }
  }
}

}  // namespace tinyssd
