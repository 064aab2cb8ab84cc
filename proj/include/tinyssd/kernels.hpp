#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "tinyssd/tensor.hpp"

namespace tinyssd {

enum class Rounding { floor, ceil };

/// Weight-free description of a 2-D convolution. Input channels come from the input tensor.
struct ConvGeometry {
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int pad = 0;
  bool has_bias = true;

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// A convolution together with its weights, laid out (out_channels, in_channels, kh, kw).
struct ConvParams {
  ConvGeometry geometry;
  int in_channels = 1;
  std::vector<float> weights;
  std::vector<float> bias;
};

struct PoolParams {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  Rounding rounding = Rounding::ceil;

  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

/// floor((in + 2*pad - k) / stride) + 1. Throws GeometryError when the result is < 1.
int conv_output_extent(int in, int kernel, int stride, int pad);

/// Pooling output extent with the given rounding. In ceil mode the last window must
/// start inside the input. Throws GeometryError when the result is < 1.
int pool_output_extent(int in, int kernel, int stride, Rounding rounding);

/// Direct NCHW convolution. `layer` names the layer in error messages.
/// Work is split across output channels; the result does not depend on the thread count.
Tensor conv2d(const Tensor& input, const ConvGeometry& geometry, std::span<const float> weights,
              std::span<const float> bias, std::string_view layer = "conv");
Tensor conv2d(const Tensor& input, const ConvParams& params, std::string_view layer = "conv");

Tensor maxpool2d(const Tensor& input, const PoolParams& params, std::string_view layer = "pool");

/// Concatenates along the channel axis in argument order.
Tensor concat_channels(std::span<const Tensor> parts, std::string_view layer = "concat");

Tensor relu(Tensor input);

/// Row-wise softmax with max subtraction. Accumulates in double.
Matrix softmax_rows(const Matrix& scores);

}  // namespace tinyssd
