#include "tinyssd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tinyssd/errors.hpp"
#include "tinyssd/parallel.hpp"

namespace tinyssd {

namespace {

// Division rounding toward -inf / +inf for a positive divisor.
int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

std::string named(std::string_view layer, const std::string& message) {
  return std::string(layer) + ": " + message;
}

}  // namespace

int conv_output_extent(int in, int kernel, int stride, int pad) {
  if (kernel < 1 || stride < 1 || pad < 0) {
    throw GeometryError("invalid convolution geometry (kernel " + std::to_string(kernel) + ", stride " +
                        std::to_string(stride) + ", pad " + std::to_string(pad) + ")");
  }
  const int out = floor_div(in + 2 * pad - kernel, stride) + 1;
  if (out < 1) {
    throw GeometryError("convolution output extent " + std::to_string(out) + " from input " +
                        std::to_string(in));
  }
  return out;
}

int pool_output_extent(int in, int kernel, int stride, Rounding rounding) {
  if (kernel < 1 || stride < 1) {
    throw GeometryError("invalid pooling geometry (kernel " + std::to_string(kernel) + ", stride " +
                        std::to_string(stride) + ")");
  }
  int out = (rounding == Rounding::ceil ? ceil_div(in - kernel, stride) : floor_div(in - kernel, stride)) + 1;
  if (rounding == Rounding::ceil && out >= 1 && (out - 1) * stride >= in) --out;
  if (out < 1) {
    throw GeometryError("pooling output extent " + std::to_string(out) + " from input " + std::to_string(in));
  }
  return out;
}

Tensor conv2d(const Tensor& input, const ConvGeometry& g, std::span<const float> weights,
              std::span<const float> bias, std::string_view layer) {
  const Shape& in = input.shape();
  if (g.out_channels < 1) throw ShapeError(named(layer, "out_channels must be >= 1"));
  const std::size_t per_in_channel = static_cast<std::size_t>(g.out_channels) * g.kernel_h * g.kernel_w;
  if (per_in_channel == 0 || weights.size() != per_in_channel * in.c) {
    throw ShapeError(named(layer, "weights hold " + std::to_string(weights.size()) + " values, expected " +
                                      std::to_string(per_in_channel * in.c) + " for " + std::to_string(in.c) +
                                      " input channels"));
  }
  if (g.has_bias && bias.size() != static_cast<std::size_t>(g.out_channels)) {
    throw ShapeError(named(layer, "bias holds " + std::to_string(bias.size()) + " values, expected " +
                                      std::to_string(g.out_channels)));
  }

  int out_h = 0;
  int out_w = 0;
  try {
    out_h = conv_output_extent(in.h, g.kernel_h, g.stride, g.pad);
    out_w = conv_output_extent(in.w, g.kernel_w, g.stride, g.pad);
  } catch (const GeometryError& e) {
    throw GeometryError(named(layer, e.what()));
  }

  Tensor output(Shape{in.n, g.out_channels, out_h, out_w});
  const float* src_base = input.data().data();
  float* dst_base = output.data().data();
  const std::size_t in_plane = in.plane();
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t kernel_area = static_cast<std::size_t>(g.kernel_h) * g.kernel_w;

  parallel_for(static_cast<std::size_t>(in.n) * g.out_channels, [&](std::size_t job) {
    const int n = static_cast<int>(job / g.out_channels);
    const int oc = static_cast<int>(job % g.out_channels);
    float* dst = dst_base + job * out_plane;
    std::fill(dst, dst + out_plane, g.has_bias ? bias[oc] : 0.0f);

    for (int ic = 0; ic < in.c; ++ic) {
      const float* src = src_base + (static_cast<std::size_t>(n) * in.c + ic) * in_plane;
      const float* w = weights.data() + (static_cast<std::size_t>(oc) * in.c + ic) * kernel_area;
      for (int ky = 0; ky < g.kernel_h; ++ky) {
        const int oy_lo = std::max(0, ceil_div(g.pad - ky, g.stride));
        const int oy_hi = std::min(out_h - 1, floor_div(in.h - 1 + g.pad - ky, g.stride));
        for (int kx = 0; kx < g.kernel_w; ++kx) {
          const float wv = w[ky * g.kernel_w + kx];
          const int ox_lo = std::max(0, ceil_div(g.pad - kx, g.stride));
          const int ox_hi = std::min(out_w - 1, floor_div(in.w - 1 + g.pad - kx, g.stride));
          if (ox_lo > ox_hi) continue;
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const float* src_row = src + static_cast<std::size_t>(oy * g.stride - g.pad + ky) * in.w;
            float* dst_row = dst + static_cast<std::size_t>(oy) * out_w;
            if (g.stride == 1) {
              const float* s = src_row - g.pad + kx;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) dst_row[ox] += wv * s[ox];
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) dst_row[ox] += wv * src_row[ox * g.stride - g.pad + kx];
            }
          }
        }
      }
    }
  });
  return output;
}

Tensor conv2d(const Tensor& input, const ConvParams& p, std::string_view layer) {
  if (input.shape().c != p.in_channels) {
    throw ShapeError(named(layer, "input has " + std::to_string(input.shape().c) + " channels, expected " +
                                      std::to_string(p.in_channels)));
  }
  return conv2d(input, p.geometry, p.weights, p.bias, layer);
}

Tensor maxpool2d(const Tensor& input, const PoolParams& p, std::string_view layer) {
  const Shape& in = input.shape();
  int out_h = 0;
  int out_w = 0;
  try {
    out_h = pool_output_extent(in.h, p.kernel_h, p.stride, p.rounding);
    out_w = pool_output_extent(in.w, p.kernel_w, p.stride, p.rounding);
  } catch (const GeometryError& e) {
    throw GeometryError(named(layer, e.what()));
  }

  Tensor output(Shape{in.n, in.c, out_h, out_w});
  for (int n = 0; n < in.n; ++n) {
    for (int c = 0; c < in.c; ++c) {
      for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = oy * p.stride;
        const int y1 = std::min(y0 + p.kernel_h, in.h);
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = ox * p.stride;
          const int x1 = std::min(x0 + p.kernel_w, in.w);
          float best = -std::numeric_limits<float>::infinity();
          for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) best = std::max(best, input.at(n, c, y, x));
          }
          output.at(n, c, oy, ox) = best;
        }
      }
    }
  }
  return output;
}

Tensor concat_channels(std::span<const Tensor> parts, std::string_view layer) {
  if (parts.empty()) throw ShapeError(named(layer, "nothing to concatenate"));
  const Shape& first = parts.front().shape();
  int channels = 0;
  for (const Tensor& part : parts) {
    const Shape& s = part.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError(named(layer, "cannot concatenate " + to_string(s) + " with " + to_string(first)));
    }
    channels += s.c;
  }

  Tensor output(Shape{first.n, channels, first.h, first.w});
  float* dst = output.data().data();
  for (int n = 0; n < first.n; ++n) {
    for (const Tensor& part : parts) {
      const std::size_t count = static_cast<std::size_t>(part.shape().c) * first.h * first.w;
      const float* src = part.data().data() + static_cast<std::size_t>(n) * count;
      dst = std::copy_n(src, count, dst);
    }
  }
  return output;
}

Tensor relu(Tensor input) {
  for (float& v : input.data()) v = std::max(v, 0.0f);
  return input;
}

Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows, scores.cols);
  std::vector<double> exps(scores.cols);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    const auto row = scores.row(r);
    if (row.empty()) continue;
    const float peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      exps[c] = std::exp(static_cast<double>(row[c]) - peak);
      total += exps[c];
    }
    auto dst = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) dst[c] = static_cast<float>(exps[c] / total);
  }
  return out;
}

}  // namespace tinyssd
