#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tinyssd/detect.hpp"
#include "tinyssd/priors.hpp"

namespace tinyssd {

struct GroundTruthBox {
  std::string image_id;
  std::string class_name;
  Box box;  // normalized
  bool difficult = false;
};

/// Reads a VOC-style annotation. Uses annotation/size/{width,height} and every
/// object/{name, difficult, bndbox/{xmin,ymin,xmax,ymax}}. Pixel coordinates are 1-based
/// and inclusive, so xmin maps to (xmin - 1) / width and xmax to xmax / width.
/// `source` names the input in error messages.
std::vector<GroundTruthBox> parse_ground_truth(std::istream& in, const std::string& image_id,
                                               const std::string& source = "annotation");
/// image_id is the file stem.
std::vector<GroundTruthBox> parse_ground_truth(const std::filesystem::path& file);
/// Every *.xml file in the directory, in file-name order.
std::vector<GroundTruthBox> load_annotation_dir(const std::filesystem::path& dir);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ClassEval {
  std::string class_name;
  int ground_truth = 0;  // non-difficult boxes
  int detections = 0;
  int true_positives = 0;
  double ap = 0.0;
  bool evaluated = false;  // false when the class has no non-difficult ground truth
  std::vector<PrPoint> curve;
};

struct EvalResult {
  std::vector<ClassEval> classes;  // the 20 VOC classes in canonical order
  double map = 0.0;               // mean AP over evaluated classes, 0 when none
  int evaluated_classes = 0;
};

struct EvalOptions {
  double iou_match = 0.5;
};

/// Eleven-point interpolated AP: mean over r in {0, 0.1, ..., 1} of the best precision at recall >= r.
double voc07_average_precision(std::span<const PrPoint> curve);

/// VOC2007 matching. Per class, detections are visited by descending score (input order on
/// ties). Each is compared with every ground-truth box of its class in its image; if the best
/// IoU is >= iou_match and that box is difficult the detection is ignored, if it is unmatched
/// the detection is a true positive, otherwise a false positive. Below the threshold it is a
/// false positive.
EvalResult evaluate(std::span<const DetectionRecord> detections, std::span<const GroundTruthBox> truths,
                    const EvalOptions& options = {});

std::string format_eval_report(const EvalResult& result);
/// `class,recall,precision` rows for every evaluated class.
std::string format_pr_csv(const EvalResult& result);

}  // namespace tinyssd
