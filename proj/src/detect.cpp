#include "tinyssd/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <sstream>

#include "tinyssd/errors.hpp"
#include "tinyssd/kernels.hpp"

namespace tinyssd {

const std::array<std::string_view, 20>& voc_class_names() {
  static constexpr std::array<std::string_view, 20> kNames = {
      "aeroplane", "bicycle", "bird",  "boat",      "bottle", "bus",         "car",
      "cat",       "chair",   "cow",   "diningtable", "dog",  "horse",       "motorbike",
      "person",    "pottedplant", "sheep", "sofa",   "train", "tvmonitor"};
  return kNames;
}

int voc_class_id(std::string_view name) {
  const auto& names = voc_class_names();
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? 0 : static_cast<int>(it - names.begin()) + 1;
}

std::string class_name(int class_id) {
  if (class_id >= 1 && class_id <= 20) return std::string(voc_class_names()[class_id - 1]);
  return "class" + std::to_string(class_id);
}

std::vector<std::size_t> nms_per_class(std::span<const ScoredBox> candidates, float iou_threshold) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });

  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou(candidates[i].box, candidates[k].box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<Detection> detect(const HeadOutput& head, const PriorSet& priors, const DetectOptions& options) {
  if (head.batch != 1) throw ShapeError("detect expects a single image, got batch " + std::to_string(head.batch));
  if (head.loc.rows != priors.size() || head.conf.rows != priors.size() || head.loc.cols != 4) {
    throw ShapeError("head has " + std::to_string(head.loc.rows) + " loc rows and " +
                     std::to_string(head.conf.rows) + " conf rows for " + std::to_string(priors.size()) +
                     " priors");
  }

  const Matrix scores = softmax_rows(head.conf);
  std::vector<Detection> result;
  for (std::size_t c = 1; c < scores.cols; ++c) {
    std::vector<ScoredBox> candidates;
    std::vector<std::size_t> prior_of;
    for (std::size_t i = 0; i < scores.rows; ++i) {
      const float s = scores(i, c);
      if (!(s >= options.conf_threshold)) continue;
      const auto offsets = head.loc.row(i);
      if (!std::all_of(offsets.begin(), offsets.end(), [](float x) { return std::isfinite(x); })) continue;
      const Box b = decode_box(offsets, priors.box(i), options.variances);
      if (!std::isfinite(b.xmin) || !std::isfinite(b.ymin) || !std::isfinite(b.xmax) || !std::isfinite(b.ymax)) {
        continue;
      }
      candidates.push_back({s, b.clipped()});
      prior_of.push_back(i);
    }
    for (std::size_t k : nms_per_class(candidates, options.iou_threshold)) {
      result.push_back({static_cast<int>(c), candidates[k].score, candidates[k].box, prior_of[k]});
    }
  }

  std::sort(result.begin(), result.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return a.prior_index < b.prior_index;
  });
  if (options.top_k >= 0 && result.size() > static_cast<std::size_t>(options.top_k)) {
    result.resize(static_cast<std::size_t>(options.top_k));
  }
  return result;
}

std::string format_detection_line(std::string_view image_id, const Detection& d) {
  char buf[160];
  std::snprintf(buf, sizeof buf, " %s %.6f %.6f %.6f %.6f %.6f", class_name(d.class_id).c_str(), d.score,
                d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax);
  return std::string(image_id) + buf;
}

DetectionRecord parse_detection_line(std::string_view line, std::size_t line_number) {
  const std::string where = "detection line " + std::to_string(line_number) + ": ";
  std::istringstream in{std::string(line)};
  DetectionRecord r;
  std::string fields[7];
  for (auto& f : fields) {
    if (!(in >> f)) throw ParseError(where + "expected 7 fields");
  }
  std::string extra;
  if (in >> extra) throw ParseError(where + "unexpected trailing field '" + extra + "'");

  r.image_id = fields[0];
  r.class_name = fields[1];
  if (voc_class_id(r.class_name) == 0) throw ParseError(where + "unknown class '" + r.class_name + "'");
  float values[5];
  for (int i = 0; i < 5; ++i) {
    try {
      std::size_t used = 0;
      values[i] = std::stof(fields[i + 2], &used);
      if (used != fields[i + 2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(where + "invalid number '" + fields[i + 2] + "'");
    }
  }
  r.score = values[0];
  r.box = {values[1], values[2], values[3], values[4]};
  return r;
}

std::vector<DetectionRecord> read_detection_lines(std::istream& in) {
  std::vector<DetectionRecord> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_detection_line(line, number));
  }
  return records;
}

}  // namespace tinyssd
