#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tinyssd/arch.hpp"
#include "tinyssd/tensor.hpp"

namespace tinyssd {

/// Axis-aligned box in normalized corner form.
struct Box {
  float xmin = 0.0f;
  float ymin = 0.0f;
  float xmax = 0.0f;
  float ymax = 0.0f;

  double width() const noexcept { return static_cast<double>(xmax) - xmin; }
  double height() const noexcept { return static_cast<double>(ymax) - ymin; }
  double area() const noexcept;
  Box clipped() const noexcept;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Intersection over union, computed in double. Zero when the union is empty.
double iou(const Box& a, const Box& b) noexcept;

struct Variances {
  float center = 0.1f;
  float size = 0.2f;
};

struct PriorScale {
  int feature_size = 1;
  int priors_per_cell = 4;
  float min_size = 30.0f;  // input pixels
  float max_size = 60.0f;
  std::vector<float> aspect_ratios;  // each ratio a > 1 yields a box with w/h = a and one with h/w = a
};

struct PriorConfig {
  int input_size = 300;
  Variances variances;
  std::vector<PriorScale> scales;
};

/// Six scales at 37/18/9/4/2/1 with SSD300-style sizes
/// min {30, 60, 111, 162, 213, 264}, max {60, 111, 162, 213, 264, 315}.
PriorConfig tiny_ssd_prior_config();

/// Same sizes, with feature sizes and priors-per-cell read from the architecture's
/// detection sources. Requires six sources.
PriorConfig prior_config_for(const ArchSpec& spec);

/// Throws ConfigError when priors_per_cell != 2 + 2 * |aspect_ratios|, sizes are out of
/// order or exceed input_size, or a feature size is < 1.
void validate(const PriorConfig& cfg);

struct PriorSet {
  Matrix boxes;  // rows x 4, clipped corners

  std::size_t size() const noexcept { return boxes.rows; }
  Box box(std::size_t i) const noexcept { return {boxes(i, 0), boxes(i, 1), boxes(i, 2), boxes(i, 3)}; }
};

/// Per cell (row-major), per scale in config order: a min_size square, a sqrt(min*max)
/// square, then for each aspect ratio the wide box followed by the tall box.
PriorSet generate_priors(const PriorConfig& cfg);

/// Applies SSD center-size offsets to one prior. Not clipped.
Box decode_box(std::span<const float> offsets, const Box& prior, const Variances& v) noexcept;

struct DecodedBoxes {
  Matrix boxes;                     // rows x 4
  std::vector<std::uint8_t> valid;  // 0 where offsets or the decoded box are non-finite
};

DecodedBoxes decode_boxes(const Matrix& loc, const PriorSet& priors, const Variances& v, bool clip = true);

}  // namespace tinyssd
