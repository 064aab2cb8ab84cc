#include "tinyssd/priors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tinyssd/errors.hpp"

namespace tinyssd {

namespace {
constexpr float kMinSizes[] = {30, 60, 111, 162, 213, 264};
constexpr float kMaxSizes[] = {60, 111, 162, 213, 264, 315};

std::vector<float> ratios_for(int priors_per_cell) {
  if (priors_per_cell == 6) return {2.0f, 3.0f};
  if (priors_per_cell == 4) return {2.0f};
  throw ConfigError("no aspect-ratio set for " + std::to_string(priors_per_cell) + " priors per cell");
}
}  // namespace

double Box::area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }

Box Box::clipped() const noexcept {
  auto c = [](float v) { return std::clamp(v, 0.0f, 1.0f); };
  return {c(xmin), c(ymin), c(xmax), c(ymax)};
}

double iou(const Box& a, const Box& b) noexcept {
  const double iw = std::min<double>(a.xmax, b.xmax) - std::max<double>(a.xmin, b.xmin);
  const double ih = std::min<double>(a.ymax, b.ymax) - std::max<double>(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

PriorConfig tiny_ssd_prior_config() {
  constexpr int kFeatures[] = {37, 18, 9, 4, 2, 1};
  constexpr int kPriors[] = {4, 6, 6, 6, 6, 4};
  PriorConfig cfg;
  for (int i = 0; i < 6; ++i) {
    cfg.scales.push_back({kFeatures[i], kPriors[i], kMinSizes[i], kMaxSizes[i], ratios_for(kPriors[i])});
  }
  return cfg;
}

PriorConfig prior_config_for(const ArchSpec& spec) {
  if (spec.detection_sources.size() != 6) {
    throw ConfigError("prior sizes are defined for six detection sources, got " +
                      std::to_string(spec.detection_sources.size()));
  }
  std::map<std::string, Shape> shapes;
  for (const LayerShape& s : intermediate_shapes(spec)) shapes[s.name] = s.output;
  PriorConfig cfg;
  cfg.input_size = spec.input_size;
  for (std::size_t i = 0; i < 6; ++i) {
    const DetectionSource& src = spec.detection_sources[i];
    const Shape& s = shapes.at(src.source);
    if (s.h != s.w) throw ConfigError(src.source + ": non-square feature maps are not supported");
    cfg.scales.push_back({s.h, src.priors_per_cell, kMinSizes[i], kMaxSizes[i], ratios_for(src.priors_per_cell)});
  }
  return cfg;
}

void validate(const PriorConfig& cfg) {
  if (cfg.input_size < 1) throw ConfigError("prior input_size must be >= 1");
  if (cfg.scales.empty()) throw ConfigError("prior config has no scales");
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    const PriorScale& s = cfg.scales[i];
    const std::string where = "prior scale " + std::to_string(i);
    if (s.feature_size < 1) throw ConfigError(where + ": feature size must be >= 1");
    if (s.priors_per_cell != 2 + 2 * static_cast<int>(s.aspect_ratios.size())) {
      throw ConfigError(where + ": " + std::to_string(s.priors_per_cell) + " priors per cell inconsistent with " +
                        std::to_string(s.aspect_ratios.size()) + " aspect ratios");
    }
    if (!(s.min_size > 0.0f && s.min_size < s.max_size)) {
      throw ConfigError(where + ": need 0 < min_size < max_size");
    }
    // max_size only enters through the geometric mean, so it may exceed the input.
    const double input = cfg.input_size;
    if (s.min_size > input || std::sqrt(static_cast<double>(s.min_size) * s.max_size) > input) {
      throw ConfigError(where + ": prior side exceeds input_size");
    }
    for (float a : s.aspect_ratios) {
      if (!(a > 1.0f)) throw ConfigError(where + ": aspect ratios must be > 1");
    }
  }
}

PriorSet generate_priors(const PriorConfig& cfg) {
  validate(cfg);
  std::size_t total = 0;
  for (const PriorScale& s : cfg.scales) total += static_cast<std::size_t>(s.feature_size) * s.feature_size * s.priors_per_cell;

  PriorSet set{Matrix(total, 4)};
  std::size_t row = 0;
  const double input = cfg.input_size;
  for (const PriorScale& s : cfg.scales) {
    std::vector<std::pair<double, double>> sizes;  // (w, h), normalized
    sizes.emplace_back(s.min_size / input, s.min_size / input);
    const double mid = std::sqrt(static_cast<double>(s.min_size) * s.max_size) / input;
    sizes.emplace_back(mid, mid);
    for (float a : s.aspect_ratios) {
      const double r = std::sqrt(static_cast<double>(a));
      sizes.emplace_back(s.min_size * r / input, s.min_size / r / input);
      sizes.emplace_back(s.min_size / r / input, s.min_size * r / input);
    }

    for (int i = 0; i < s.feature_size; ++i) {
      for (int j = 0; j < s.feature_size; ++j) {
        const double cx = (j + 0.5) / s.feature_size;
        const double cy = (i + 0.5) / s.feature_size;
        for (const auto& [w, h] : sizes) {
          const Box b = Box{static_cast<float>(cx - w / 2), static_cast<float>(cy - h / 2),
                            static_cast<float>(cx + w / 2), static_cast<float>(cy + h / 2)}
                            .clipped();
          auto dst = set.boxes.row(row++);
          dst[0] = b.xmin;
          dst[1] = b.ymin;
          dst[2] = b.xmax;
          dst[3] = b.ymax;
        }
      }
    }
  }
  return set;
}

Box decode_box(std::span<const float> l, const Box& prior, const Variances& v) noexcept {
  const double pw = prior.width();
  const double ph = prior.height();
  const double pcx = (static_cast<double>(prior.xmin) + prior.xmax) / 2;
  const double pcy = (static_cast<double>(prior.ymin) + prior.ymax) / 2;
  const double cx = pcx + l[0] * v.center * pw;
  const double cy = pcy + l[1] * v.center * ph;
  const double w = pw * std::exp(static_cast<double>(l[2]) * v.size);
  const double h = ph * std::exp(static_cast<double>(l[3]) * v.size);
  return {static_cast<float>(cx - w / 2), static_cast<float>(cy - h / 2), static_cast<float>(cx + w / 2),
          static_cast<float>(cy + h / 2)};
}

DecodedBoxes decode_boxes(const Matrix& loc, const PriorSet& priors, const Variances& v, bool clip) {
  if (loc.cols != 4) throw ShapeError("loc rows must hold 4 offsets, got " + std::to_string(loc.cols));
  if (loc.rows != priors.size()) {
    throw ShapeError("loc has " + std::to_string(loc.rows) + " rows but there are " +
                     std::to_string(priors.size()) + " priors");
  }
  DecodedBoxes out{Matrix(loc.rows, 4), std::vector<std::uint8_t>(loc.rows, 1)};
  for (std::size_t i = 0; i < loc.rows; ++i) {
    const auto offsets = loc.row(i);
    Box b = decode_box(offsets, priors.box(i), v);
    const bool finite = std::all_of(offsets.begin(), offsets.end(), [](float x) { return std::isfinite(x); }) &&
                        std::isfinite(b.xmin) && std::isfinite(b.ymin) && std::isfinite(b.xmax) &&
                        std::isfinite(b.ymax);
    if (!finite) {
      out.valid[i] = 0;
      continue;
    }
    if (clip) b = b.clipped();
    auto dst = out.boxes.row(i);
    dst[0] = b.xmin;
    dst[1] = b.ymin;
    dst[2] = b.xmax;
    dst[3] = b.ymax;
  }
  return out;
}

}  // namespace tinyssd
