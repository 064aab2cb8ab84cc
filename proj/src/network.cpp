#include "tinyssd/network.hpp"

#include <map>

#include "tinyssd/errors.hpp"
#include "tinyssd/kernels.hpp"

namespace tinyssd {

FireWeights FireWeights::from_store(const WeightStore& store, const std::string& name) {
  return {store.values(name + "/squeeze/w"),   store.values(name + "/squeeze/b"),
          store.values(name + "/expand1x1/w"), store.values(name + "/expand1x1/b"),
          store.values(name + "/expand3x3/w"), store.values(name + "/expand3x3/b")};
}

Tensor fire_forward(const Tensor& input, const FireConfig& cfg, const FireWeights& w, std::string_view name) {
  const std::string prefix(name);
  const Tensor squeezed =
      relu(conv2d(input, fire_squeeze_geometry(cfg), w.squeeze_w, w.squeeze_b, prefix + "/squeeze"));
  const Tensor parts[] = {
      relu(conv2d(squeezed, fire_expand1x1_geometry(cfg), w.expand1x1_w, w.expand1x1_b, prefix + "/expand1x1")),
      relu(conv2d(squeezed, fire_expand3x3_geometry(cfg), w.expand3x3_w, w.expand3x3_b, prefix + "/expand3x3")),
  };
  return concat_channels(parts, prefix + "/concat");
}

HeadOutput HeadOutput::image(int index) const {
  if (index < 0 || index >= batch) {
    throw ShapeError("batch index " + std::to_string(index) + " out of range for batch " + std::to_string(batch));
  }
  auto rows = [&](const Matrix& m) {
    const auto begin = m.data.begin() + static_cast<std::ptrdiff_t>(index * priors * m.cols);
    return Matrix(priors, m.cols, std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(priors * m.cols)));
  };
  return {1, priors, rows(loc), rows(conf)};
}

std::vector<LayerActivation> run_layers(const ArchSpec& spec, const WeightStore& store, const Tensor& image) {
  const Shape& in = image.shape();
  if (in.c != spec.input_channels || in.h != spec.input_size || in.w != spec.input_size) {
    throw ShapeError("input image is " + to_string(in) + ", expected Nx" + std::to_string(spec.input_channels) +
                     "x" + std::to_string(spec.input_size) + "x" + std::to_string(spec.input_size));
  }

  std::vector<LayerActivation> outputs;
  outputs.reserve(spec.layers.size());
  std::map<std::string, std::size_t> by_name;
  auto input_of = [&](const LayerSpec& layer) -> const Tensor& {
    const std::string& source = layer.inputs.at(0);
    if (source == kInputName) return image;
    auto it = by_name.find(source);
    if (it == by_name.end()) throw LookupError(layer.name + ": input '" + source + "' has not been computed");
    return outputs[it->second].output;
  };

  for (const LayerSpec& layer : spec.layers) {
    if (layer.inputs.size() != 1) throw ConfigError(layer.name + ": expected exactly one input");
    const Tensor& x = input_of(layer);
    switch (layer.kind) {
      case LayerKind::conv: {
        const ConvGeometry& g = layer.conv();
        std::span<const float> bias;
        if (g.has_bias) bias = store.values(layer.name + "/b");
        Tensor y = conv2d(x, g, store.values(layer.name + "/w"), bias, layer.name);
        outputs.push_back({layer.name, layer.relu ? relu(std::move(y)) : std::move(y)});
        break;
      }
      case LayerKind::pool:
        outputs.push_back({layer.name, maxpool2d(x, layer.pool(), layer.name)});
        break;
      case LayerKind::fire:
        outputs.push_back(
            {layer.name, fire_forward(x, layer.fire(), FireWeights::from_store(store, layer.name), layer.name)});
        break;
    }
    by_name[layer.name] = outputs.size() - 1;
  }
  return outputs;
}

std::size_t prior_count(const ArchSpec& spec) {
  std::map<std::string, Shape> shapes;
  for (const LayerShape& s : intermediate_shapes(spec)) shapes[s.name] = s.output;
  std::size_t total = 0;
  for (const DetectionSource& src : spec.detection_sources) {
    const Shape& s = shapes.at(src.source);
    total += static_cast<std::size_t>(s.h) * s.w * src.priors_per_cell;
  }
  return total;
}

HeadOutput forward(const ArchSpec& spec, const WeightStore& store, const Tensor& image) {
  const auto activations = run_layers(spec, store, image);
  std::map<std::string, const Tensor*> by_name;
  for (const LayerActivation& a : activations) by_name[a.name] = &a.output;

  const int batch = image.shape().n;
  HeadOutput out;
  out.batch = batch;
  out.priors = prior_count(spec);
  out.loc = Matrix(batch * out.priors, 4);
  out.conf = Matrix(batch * out.priors, static_cast<std::size_t>(spec.class_count));

  // (n, b*k, h, w) -> rows ordered (h, w, b) with k values per row.
  auto scatter = [&](const Tensor& t, Matrix& dst, std::size_t first_row, int priors_per_cell) {
    const Shape& s = t.shape();
    const int width = static_cast<int>(dst.cols);
    if (s.c != width * priors_per_cell) throw ShapeError("head output channels do not match prior layout");
    for (int n = 0; n < s.n; ++n) {
      const std::size_t image_base = static_cast<std::size_t>(n) * out.priors + first_row;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          for (int p = 0; p < priors_per_cell; ++p) {
            auto row = dst.row(image_base + (static_cast<std::size_t>(y) * s.w + x) * priors_per_cell + p);
            for (int k = 0; k < width; ++k) row[k] = t.at(n, p * width + k, y, x);
          }
        }
      }
    }
  };

  std::size_t first_row = 0;
  for (const DetectionSource& src : spec.detection_sources) {
    const Tensor& loc = *by_name.at(src.loc_layer);
    const Tensor& conf = *by_name.at(src.conf_layer);
    scatter(loc, out.loc, first_row, src.priors_per_cell);
    scatter(conf, out.conf, first_row, src.priors_per_cell);
    first_row += static_cast<std::size_t>(loc.shape().h) * loc.shape().w * src.priors_per_cell;
  }
  return out;
}

}  // namespace tinyssd
