#pragma once

#include <string>
#include <variant>
#include <vector>

#include "tinyssd/kernels.hpp"
#include "tinyssd/tensor.hpp"

namespace tinyssd {

/// Name of the implicit network input that the first layer consumes.
inline constexpr const char* kInputName = "data";

/// Filter counts of one Fire module: squeeze 1x1, expand 1x1, expand 3x3.
struct FireConfig {
  int squeeze = 1;
  int expand_1x1 = 1;
  int expand_3x3 = 1;

  int out_channels() const noexcept { return expand_1x1 + expand_3x3; }
  friend bool operator==(const FireConfig&, const FireConfig&) = default;
};

enum class LayerKind { conv, pool, fire };

const char* to_string(LayerKind kind);

struct LayerSpec {
  std::string name;   // identifier, also the blob-name prefix
  std::string title;  // display label in the architecture table, e.g. "Conv1 / s2"
  LayerKind kind = LayerKind::conv;
  std::variant<ConvGeometry, PoolParams, FireConfig> geometry;
  std::vector<std::string> inputs;
  bool relu = true;  // conv layers only; Fire modules always rectify

  const ConvGeometry& conv() const { return std::get<ConvGeometry>(geometry); }
  const PoolParams& pool() const { return std::get<PoolParams>(geometry); }
  const FireConfig& fire() const { return std::get<FireConfig>(geometry); }
};

/// A feature layer feeding a pair of multibox heads.
struct DetectionSource {
  std::string source;
  std::string loc_layer;
  std::string conf_layer;
  int priors_per_cell = 4;
};

struct ArchSpec {
  std::vector<LayerSpec> layers;
  std::vector<DetectionSource> detection_sources;
  int class_count = 21;
  int input_size = 300;
  int input_channels = 3;

  const LayerSpec* find(const std::string& name) const;
  const LayerSpec& at(const std::string& name) const;
};

/// The Tiny SSD graph: Conv1, ten non-uniform Fire modules with interleaved pooling,
/// four auxiliary convolutions and twelve 3x3 multibox heads over six scales.
ArchSpec tiny_ssd_spec();

/// Structural checks valid for any graph: unique names, topological order,
/// positive geometry, head channel counts matching priors_per_cell.
void validate_graph(const ArchSpec& spec);

/// validate_graph plus the Tiny SSD layout: exactly ten Fire modules and six
/// detection sources at 37/18/9/4/2/1 with loc/conf channels
/// (16,84), (24,126), (24,126), (24,126), (24,126), (16,84).
void validate(const ArchSpec& spec);

struct LayerShape {
  std::string name;
  Shape input;
  Shape output;
};

/// Static shape inference for a single image; no weights needed.
std::vector<LayerShape> intermediate_shapes(const ArchSpec& spec, int batch = 1);

struct BlobSpec {
  std::string name;
  std::vector<int> shape;

  std::size_t element_count() const;
  friend bool operator==(const BlobSpec&, const BlobSpec&) = default;
};

/// Every parameter blob the graph needs, in layer order. Conv layers own
/// `<name>/w` and `<name>/b`; Fire modules own `<name>/squeeze/{w,b}`,
/// `<name>/expand1x1/{w,b}` and `<name>/expand3x3/{w,b}`.
std::vector<BlobSpec> parameter_manifest(const ArchSpec& spec);

/// Geometry of each Fire sub-layer.
ConvGeometry fire_squeeze_geometry(const FireConfig& cfg);
ConvGeometry fire_expand1x1_geometry(const FireConfig& cfg);
ConvGeometry fire_expand3x3_geometry(const FireConfig& cfg);

/// Plain-text table with Type / Stride, Filter Shapes and Input Size columns.
std::string describe_table(const ArchSpec& spec);

/// Stable JSON dump of the architecture and its inverse.
std::string arch_to_json(const ArchSpec& spec);
ArchSpec arch_from_json(const std::string& text);

}  // namespace tinyssd
