#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tinyssd/arch.hpp"
#include "tinyssd/tensor.hpp"
#include "tinyssd/weights.hpp"

namespace tinyssd {

struct FireWeights {
  std::span<const float> squeeze_w, squeeze_b;
  std::span<const float> expand1x1_w, expand1x1_b;
  std::span<const float> expand3x3_w, expand3x3_b;

  /// Looks up `<name>/squeeze/{w,b}`, `<name>/expand1x1/{w,b}`, `<name>/expand3x3/{w,b}`.
  static FireWeights from_store(const WeightStore& store, const std::string& name);
};

/// squeeze 1x1 -> ReLU -> [expand 1x1 -> ReLU | expand 3x3 (pad 1) -> ReLU] -> channel concat.
/// Output has cfg.expand_1x1 + cfg.expand_3x3 channels at the input's spatial size.
Tensor fire_forward(const Tensor& input, const FireConfig& cfg, const FireWeights& weights,
                    std::string_view name = "fire");

/// Raw multibox head outputs. Rows are image-major, then scale (in detection_sources order),
/// then feature row, column and prior within the cell. Confidences are logits.
struct HeadOutput {
  int batch = 1;
  std::size_t priors = 0;  // per image
  Matrix loc;              // (batch * priors) x 4
  Matrix conf;             // (batch * priors) x class_count

  /// Head rows of a single batch item.
  HeadOutput image(int index) const;
};

struct LayerActivation {
  std::string name;
  Tensor output;
};

/// Runs every layer in declaration order and returns each layer's output.
/// `image` must be (n, input_channels, input_size, input_size).
std::vector<LayerActivation> run_layers(const ArchSpec& spec, const WeightStore& store, const Tensor& image);

/// Full forward pass gathered into per-prior loc and conf rows.
HeadOutput forward(const ArchSpec& spec, const WeightStore& store, const Tensor& image);

/// Number of prior rows per image: sum over sources of f_h * f_w * priors_per_cell.
std::size_t prior_count(const ArchSpec& spec);

}  // namespace tinyssd
