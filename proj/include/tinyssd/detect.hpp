#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tinyssd/network.hpp"
#include "tinyssd/priors.hpp"

namespace tinyssd {

/// The twenty PASCAL VOC categories; class id k (1..20) names entry k-1. Id 0 is background.
const std::array<std::string_view, 20>& voc_class_names();
/// Class id for a VOC name, or 0 when the name is unknown.
int voc_class_id(std::string_view name);
std::string class_name(int class_id);

struct ScoredBox {
  float score = 0.0f;
  Box box;
};

/// Greedy NMS. Visits boxes by descending score (lower index first on ties) and keeps a box
/// iff its IoU with every kept box is <= iou_threshold. Returns kept indices in visit order.
std::vector<std::size_t> nms_per_class(std::span<const ScoredBox> candidates, float iou_threshold);

struct Detection {
  int class_id = 0;
  float score = 0.0f;
  Box box;
  std::size_t prior_index = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectOptions {
  float conf_threshold = 0.5f;
  float iou_threshold = 0.45f;
  int top_k = 200;  // negative disables the cap
  Variances variances;
};

/// Softmax over each conf row, then per foreground class: keep scores >= conf_threshold,
/// decode (clipped), NMS. The union is ordered by descending score, then class, then prior
/// index, and truncated to top_k. `head` must hold a single image.
std::vector<Detection> detect(const HeadOutput& head, const PriorSet& priors, const DetectOptions& options);

/// `image_id class_name score xmin ymin xmax ymax`, six decimals.
std::string format_detection_line(std::string_view image_id, const Detection& d);

struct DetectionRecord {
  std::string image_id;
  std::string class_name;
  float score = 0.0f;
  Box box;
};

/// Parses one emission line. Throws ParseError (with line number) on malformed fields or
/// an unknown class name.
DetectionRecord parse_detection_line(std::string_view line, std::size_t line_number = 0);
/// Reads every non-blank line of a detection stream.
std::vector<DetectionRecord> read_detection_lines(std::istream& in);

}  // namespace tinyssd
