#include "tinyssd/arch.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tinyssd/errors.hpp"

namespace tinyssd {

using nlohmann::json;

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::pool:
      return "pool";
    case LayerKind::fire:
      return "fire";
  }
  return "?";
}

const LayerSpec* ArchSpec::find(const std::string& name) const {
  auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.name == name; });
  return it == layers.end() ? nullptr : &*it;
}

const LayerSpec& ArchSpec::at(const std::string& name) const {
  if (const LayerSpec* layer = find(name)) return *layer;
  throw LookupError("no layer named '" + name + "'");
}

std::size_t BlobSpec::element_count() const {
  std::size_t count = 1;
  for (int extent : shape) count *= static_cast<std::size_t>(extent);
  return count;
}

ConvGeometry fire_squeeze_geometry(const FireConfig& cfg) { return {cfg.squeeze, 1, 1, 1, 0, true}; }
ConvGeometry fire_expand1x1_geometry(const FireConfig& cfg) { return {cfg.expand_1x1, 1, 1, 1, 0, true}; }
ConvGeometry fire_expand3x3_geometry(const FireConfig& cfg) { return {cfg.expand_3x3, 3, 3, 1, 1, true}; }

namespace {

LayerSpec conv_layer(std::string name, std::string title, std::string input, int filters, int stride,
                     int pad, bool relu = true) {
  LayerSpec l;
  l.name = std::move(name);
  l.title = std::move(title);
  l.kind = LayerKind::conv;
  l.geometry = ConvGeometry{filters, 3, 3, stride, pad, true};
  l.inputs = {std::move(input)};
  l.relu = relu;
  return l;
}

LayerSpec pool_layer(std::string name, std::string title, std::string input) {
  LayerSpec l;
  l.name = std::move(name);
  l.title = std::move(title);
  l.kind = LayerKind::pool;
  l.geometry = PoolParams{3, 3, 2, Rounding::ceil};
  l.inputs = {std::move(input)};
  return l;
}

LayerSpec fire_layer(int index, std::string input, FireConfig cfg) {
  LayerSpec l;
  l.name = "fire" + std::to_string(index);
  l.title = "Fire" + std::to_string(index);
  l.kind = LayerKind::fire;
  l.geometry = cfg;
  l.inputs = {std::move(input)};
  return l;
}

// "Conv12-1 / s2" -> "Conv12-1"
std::string base_title(const std::string& title) { return title.substr(0, title.find(" / ")); }

}  // namespace

ArchSpec tiny_ssd_spec() {
  ArchSpec spec;
  auto& L = spec.layers;
  L.push_back(conv_layer("conv1", "Conv1 / s2", kInputName, 57, 2, 0));
  L.push_back(pool_layer("pool1", "Pool1 / s2", "conv1"));
  L.push_back(fire_layer(1, "pool1", {15, 49, 53}));
  L.push_back(fire_layer(2, "fire1", {15, 54, 52}));
  L.push_back(pool_layer("pool3", "Pool3 / s2", "fire2"));
  L.push_back(fire_layer(3, "pool3", {29, 92, 94}));
  L.push_back(fire_layer(4, "fire3", {29, 90, 83}));
  L.push_back(pool_layer("pool5", "Pool5 / s2", "fire4"));
  L.push_back(fire_layer(5, "pool5", {44, 166, 161}));
  L.push_back(fire_layer(6, "fire5", {45, 155, 146}));
  L.push_back(fire_layer(7, "fire6", {49, 163, 171}));
  L.push_back(fire_layer(8, "fire7", {25, 29, 54}));
  L.push_back(pool_layer("pool9", "Pool9 / s2", "fire8"));
  L.push_back(fire_layer(9, "pool9", {37, 45, 56}));
  L.push_back(pool_layer("pool10", "Pool10 / s2", "fire9"));
  L.push_back(fire_layer(10, "pool10", {38, 41, 44}));
  L.push_back(conv_layer("conv12_1", "Conv12-1 / s2", "fire10", 51, 2, 1));
  L.push_back(conv_layer("conv12_2", "Conv12-2", "conv12_1", 46, 1, 1));
  L.push_back(conv_layer("conv13_1", "Conv13-1", "conv12_2", 55, 1, 1));
  L.push_back(conv_layer("conv13_2", "Conv13-2 / s2", "conv13_1", 85, 2, 1));

  // Heads bind to the feature maps at 37, 18, 9, 4, 2 and 1 pixels.
  const std::pair<const char*, int> sources[] = {{"fire4", 4},  {"fire8", 6},    {"fire9", 6},
                                                 {"fire10", 6}, {"conv12_2", 6}, {"conv13_2", 4}};
  for (const auto& [source, priors] : sources) {
    const std::string title = base_title(spec.at(source).title);
    const std::string loc = std::string(source) + "_mbox_loc";
    const std::string conf = std::string(source) + "_mbox_conf";
    L.push_back(conv_layer(loc, title + "-mbox-loc", source, 4 * priors, 1, 1, false));
    L.push_back(conv_layer(conf, title + "-mbox-conf", source, spec.class_count * priors, 1, 1, false));
    spec.detection_sources.push_back({source, loc, conf, priors});
  }
  return spec;
}

void validate_graph(const ArchSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("architecture has no layers");
  if (spec.class_count < 2) throw ConfigError("class_count must be >= 2");
  if (spec.input_size < 1 || spec.input_channels < 1) throw ConfigError("input extents must be >= 1");

  std::set<std::string> declared{kInputName};
  for (const LayerSpec& layer : spec.layers) {
    if (layer.name.empty()) throw ConfigError("layer with empty name");
    if (declared.count(layer.name) != 0) throw ConfigError("duplicate layer name '" + layer.name + "'");
    if (layer.inputs.size() != 1) {
      throw ConfigError(layer.name + ": expected exactly one input, got " + std::to_string(layer.inputs.size()));
    }
    if (declared.count(layer.inputs.front()) == 0) {
      throw ConfigError(layer.name + ": input '" + layer.inputs.front() +
                        "' is not declared before it (cycle or unknown layer)");
    }

    switch (layer.kind) {
      case LayerKind::conv: {
        if (!std::holds_alternative<ConvGeometry>(layer.geometry)) {
          throw ConfigError(layer.name + ": conv layer without conv geometry");
        }
        const ConvGeometry& g = layer.conv();
        if (g.out_channels < 1 || g.kernel_h < 1 || g.kernel_w < 1 || g.stride < 1 || g.pad < 0) {
          throw ConfigError(layer.name + ": invalid convolution geometry");
        }
        break;
      }
      case LayerKind::pool: {
        if (!std::holds_alternative<PoolParams>(layer.geometry)) {
          throw ConfigError(layer.name + ": pool layer without pool geometry");
        }
        const PoolParams& p = layer.pool();
        if (p.kernel_h < 1 || p.kernel_w < 1 || p.stride < 1) {
          throw ConfigError(layer.name + ": invalid pooling geometry");
        }
        break;
      }
      case LayerKind::fire: {
        if (!std::holds_alternative<FireConfig>(layer.geometry)) {
          throw ConfigError(layer.name + ": fire layer without fire config");
        }
        const FireConfig& f = layer.fire();
        if (f.squeeze < 1 || f.expand_1x1 < 1 || f.expand_3x3 < 1) {
          throw ConfigError(layer.name + ": fire filter counts must be >= 1");
        }
        break;
      }
    }
    declared.insert(layer.name);
  }

  std::set<std::string> head_layers;
  for (const DetectionSource& src : spec.detection_sources) {
    if (src.priors_per_cell < 1) throw ConfigError(src.source + ": priors_per_cell must be >= 1");
    if (spec.find(src.source) == nullptr) throw ConfigError("unknown detection source '" + src.source + "'");
    const std::pair<const std::string*, int> heads[] = {{&src.loc_layer, 4},
                                                        {&src.conf_layer, spec.class_count}};
    for (const auto& [head_name, width] : heads) {
      const LayerSpec* head = spec.find(*head_name);
      if (head == nullptr) throw ConfigError("unknown head layer '" + *head_name + "'");
      if (head->kind != LayerKind::conv) throw ConfigError(*head_name + ": head must be a conv layer");
      if (head->inputs.front() != src.source) {
        throw ConfigError(*head_name + ": head must read from its source '" + src.source + "'");
      }
      if (head->conv().out_channels != width * src.priors_per_cell) {
        throw ConfigError(*head_name + ": " + std::to_string(head->conv().out_channels) +
                          " channels, expected " + std::to_string(width * src.priors_per_cell));
      }
      if (!head_layers.insert(*head_name).second) throw ConfigError(*head_name + ": head used twice");
    }
  }
}

void validate(const ArchSpec& spec) {
  validate_graph(spec);

  const auto fires = std::count_if(spec.layers.begin(), spec.layers.end(),
                                   [](const LayerSpec& l) { return l.kind == LayerKind::fire; });
  if (fires != 10) throw ConfigError("expected 10 Fire modules, found " + std::to_string(fires));

  constexpr int kSizes[] = {37, 18, 9, 4, 2, 1};
  constexpr int kPriors[] = {4, 6, 6, 6, 6, 4};
  if (spec.detection_sources.size() != 6) {
    throw ConfigError("expected 6 detection sources, found " + std::to_string(spec.detection_sources.size()));
  }
  if (spec.class_count != 21) throw ConfigError("expected 21 classes");

  std::map<std::string, Shape> shapes;
  for (const LayerShape& s : intermediate_shapes(spec)) shapes[s.name] = s.output;
  for (std::size_t i = 0; i < 6; ++i) {
    const DetectionSource& src = spec.detection_sources[i];
    const Shape& s = shapes.at(src.source);
    if (s.h != kSizes[i] || s.w != kSizes[i]) {
      throw ConfigError("detection source " + std::to_string(i) + " ('" + src.source + "') is " +
                        std::to_string(s.h) + "x" + std::to_string(s.w) + ", expected " +
                        std::to_string(kSizes[i]));
    }
    if (src.priors_per_cell != kPriors[i]) {
      throw ConfigError("detection source '" + src.source + "' has " + std::to_string(src.priors_per_cell) +
                        " priors per cell, expected " + std::to_string(kPriors[i]));
    }
  }
}

std::vector<LayerShape> intermediate_shapes(const ArchSpec& spec, int batch) {
  std::map<std::string, Shape> known{{kInputName, Shape{batch, spec.input_channels, spec.input_size, spec.input_size}}};
  std::vector<LayerShape> result;
  result.reserve(spec.layers.size());

  for (const LayerSpec& layer : spec.layers) {
    if (layer.inputs.size() != 1) throw ConfigError(layer.name + ": expected exactly one input");
    auto it = known.find(layer.inputs.front());
    if (it == known.end()) throw LookupError(layer.name + ": unknown input '" + layer.inputs.front() + "'");
    const Shape in = it->second;
    Shape out = in;
    try {
      switch (layer.kind) {
        case LayerKind::conv: {
          const ConvGeometry& g = layer.conv();
          out.c = g.out_channels;
          out.h = conv_output_extent(in.h, g.kernel_h, g.stride, g.pad);
          out.w = conv_output_extent(in.w, g.kernel_w, g.stride, g.pad);
          break;
        }
        case LayerKind::pool: {
          const PoolParams& p = layer.pool();
          out.h = pool_output_extent(in.h, p.kernel_h, p.stride, p.rounding);
          out.w = pool_output_extent(in.w, p.kernel_w, p.stride, p.rounding);
          break;
        }
        case LayerKind::fire:
          out.c = layer.fire().out_channels();
          break;
      }
    } catch (const GeometryError& e) {
      throw GeometryError(layer.name + ": " + e.what());
    }
    known[layer.name] = out;
    result.push_back({layer.name, in, out});
  }
  return result;
}

std::vector<BlobSpec> parameter_manifest(const ArchSpec& spec) {
  const auto shapes = intermediate_shapes(spec);
  std::vector<BlobSpec> blobs;
  auto add_conv = [&](const std::string& prefix, const ConvGeometry& g, int in_channels) {
    blobs.push_back({prefix + "/w", {g.out_channels, in_channels, g.kernel_h, g.kernel_w}});
    if (g.has_bias) blobs.push_back({prefix + "/b", {g.out_channels}});
  };
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const int in_c = shapes[i].input.c;
    if (layer.kind == LayerKind::conv) {
      add_conv(layer.name, layer.conv(), in_c);
    } else if (layer.kind == LayerKind::fire) {
      const FireConfig& f = layer.fire();
      add_conv(layer.name + "/squeeze", fire_squeeze_geometry(f), in_c);
      add_conv(layer.name + "/expand1x1", fire_expand1x1_geometry(f), f.squeeze);
      add_conv(layer.name + "/expand3x3", fire_expand3x3_geometry(f), f.squeeze);
    }
  }
  return blobs;
}

std::string describe_table(const ArchSpec& spec) {
  const auto shapes = intermediate_shapes(spec);
  std::size_t last_fire = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::fire) last_fire = i;
  }

  std::ostringstream os;
  auto header = [&](const char* caption) {
    os << caption << '\n';
    os << std::left << std::setw(22) << "Type / Stride" << std::setw(28) << "Filter Shapes" << "Input Size\n";
    os << std::string(60, '-') << '\n';
  };
  header("Fire sub-network stack");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (i == last_fire + 1) {
      os << '\n';
      header("Auxiliary convolutional feature layers and multibox heads");
    }
    std::string filters;
    switch (layer.kind) {
      case LayerKind::conv: {
        const ConvGeometry& g = layer.conv();
        filters = std::to_string(g.kernel_h) + "x" + std::to_string(g.kernel_w) + "x" +
                  std::to_string(g.out_channels);
        break;
      }
      case LayerKind::pool:
        filters = std::to_string(layer.pool().kernel_h) + "x" + std::to_string(layer.pool().kernel_w);
        break;
      case LayerKind::fire: {
        const FireConfig& f = layer.fire();
        filters = std::to_string(f.squeeze) + "@S -- " + std::to_string(f.expand_1x1) + "@E1 -- " +
                  std::to_string(f.expand_3x3) + "@E3";
        break;
      }
    }
    const Shape& in = shapes[i].input;
    os << std::left << std::setw(22) << (layer.title.empty() ? layer.name : layer.title) << std::setw(28)
       << filters << in.h << "x" << in.w << '\n';
  }
  return os.str();
}

std::string arch_to_json(const ArchSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& layer : spec.layers) {
    json j;
    j["name"] = layer.name;
    j["title"] = layer.title;
    j["kind"] = to_string(layer.kind);
    j["inputs"] = layer.inputs;
    switch (layer.kind) {
      case LayerKind::conv: {
        const ConvGeometry& g = layer.conv();
        j["conv"] = {{"out_channels", g.out_channels},
                     {"kernel", {g.kernel_h, g.kernel_w}},
                     {"stride", g.stride},
                     {"pad", g.pad},
                     {"bias", g.has_bias},
                     {"relu", layer.relu}};
        break;
      }
      case LayerKind::pool: {
        const PoolParams& p = layer.pool();
        j["pool"] = {{"kernel", {p.kernel_h, p.kernel_w}},
                     {"stride", p.stride},
                     {"rounding", p.rounding == Rounding::ceil ? "ceil" : "floor"}};
        break;
      }
      case LayerKind::fire: {
        const FireConfig& f = layer.fire();
        j["fire"] = {{"squeeze", f.squeeze}, {"expand_1x1", f.expand_1x1}, {"expand_3x3", f.expand_3x3}};
        break;
      }
    }
    layers.push_back(std::move(j));
  }
  json sources = json::array();
  for (const DetectionSource& s : spec.detection_sources) {
    sources.push_back(
        {{"source", s.source}, {"loc", s.loc_layer}, {"conf", s.conf_layer}, {"priors_per_cell", s.priors_per_cell}});
  }
  // nlohmann::json sorts object keys, which keeps the dump stable.
  json root = {{"input_size", spec.input_size},
               {"input_channels", spec.input_channels},
               {"class_count", spec.class_count},
               {"layers", std::move(layers)},
               {"detection_sources", std::move(sources)}};
  return root.dump(2) + "\n";
}

ArchSpec arch_from_json(const std::string& text) {
  ArchSpec spec;
  try {
    const json root = json::parse(text);
    spec.input_size = root.at("input_size").get<int>();
    spec.input_channels = root.at("input_channels").get<int>();
    spec.class_count = root.at("class_count").get<int>();
    for (const json& j : root.at("layers")) {
      LayerSpec layer;
      layer.name = j.at("name").get<std::string>();
      layer.title = j.value("title", std::string{});
      layer.inputs = j.at("inputs").get<std::vector<std::string>>();
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "conv") {
        const json& c = j.at("conv");
        layer.kind = LayerKind::conv;
        layer.geometry = ConvGeometry{c.at("out_channels").get<int>(), c.at("kernel").at(0).get<int>(),
                                      c.at("kernel").at(1).get<int>(), c.at("stride").get<int>(),
                                      c.at("pad").get<int>(),          c.at("bias").get<bool>()};
        layer.relu = c.at("relu").get<bool>();
      } else if (kind == "pool") {
        const json& p = j.at("pool");
        const std::string rounding = p.at("rounding").get<std::string>();
        if (rounding != "ceil" && rounding != "floor") throw ConfigError("unknown rounding '" + rounding + "'");
        layer.kind = LayerKind::pool;
        layer.geometry = PoolParams{p.at("kernel").at(0).get<int>(), p.at("kernel").at(1).get<int>(),
                                    p.at("stride").get<int>(), rounding == "ceil" ? Rounding::ceil : Rounding::floor};
      } else if (kind == "fire") {
        const json& f = j.at("fire");
        layer.kind = LayerKind::fire;
        layer.geometry =
            FireConfig{f.at("squeeze").get<int>(), f.at("expand_1x1").get<int>(), f.at("expand_3x3").get<int>()};
      } else {
        throw ConfigError("unknown layer kind '" + kind + "'");
      }
      spec.layers.push_back(std::move(layer));
    }
    for (const json& s : root.at("detection_sources")) {
      spec.detection_sources.push_back({s.at("source").get<std::string>(), s.at("loc").get<std::string>(),
                                        s.at("conf").get<std::string>(), s.at("priors_per_cell").get<int>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("architecture JSON: ") + e.what());
  }
  validate_graph(spec);
  return spec;
}

}  // namespace tinyssd
