#include "tinyssd/voc_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

#include "tinyssd/errors.hpp"

namespace tinyssd {

namespace {

// Element tree for the small XML subset VOC annotations use.
struct XmlNode {
  std::string name;
  std::string text;
  int line = 0;
  std::vector<XmlNode> children;

  const XmlNode* child(std::string_view tag) const {
    for (const XmlNode& c : children) {
      if (c.name == tag) return &c;
    }
    return nullptr;
  }
};

class XmlReader {
 public:
  XmlReader(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {}

  XmlNode parse_document() {
    skip_misc();
    if (pos_ >= text_.size()) fail("empty document");
    XmlNode root = parse_element(0);
    skip_misc();
    if (pos_ < text_.size()) fail("content after the root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(source_ + ":" + std::to_string(line_) + ": " + message);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  bool starts_with(std::string_view s) const { return text_.compare(pos_, s.size(), s) == 0; }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_++] == '\n') ++line_;
    }
  }

  void skip_until(std::string_view terminator) {
    while (pos_ < text_.size() && !starts_with(terminator)) advance();
    if (pos_ >= text_.size()) fail("unterminated markup, expected '" + std::string(terminator) + "'");
    advance(terminator.size());
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  // Whitespace, <?...?>, <!-- ... --> and <!DOCTYPE ...>.
  void skip_misc() {
    for (;;) {
      skip_space();
      if (starts_with("<?")) {
        skip_until("?>");
      } else if (starts_with("<!--")) {
        skip_until("-->");
      } else if (starts_with("<!")) {
        skip_until(">");
      } else {
        return;
      }
    }
  }

  std::string parse_name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = peek();
      if (std::isspace(static_cast<unsigned char>(c)) || c == '>' || c == '/' || c == '<') break;
      advance();
    }
    if (pos_ == start) fail("expected a tag name");
    return text_.substr(start, pos_ - start);
  }

  void append_text(std::string& out, std::string_view raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out += raw[i];
        continue;
      }
      static const std::pair<std::string_view, char> kEntities[] = {
          {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
      bool matched = false;
      for (const auto& [entity, ch] : kEntities) {
        if (raw.substr(i, entity.size()) == entity) {
          out += ch;
          i += entity.size() - 1;
          matched = true;
          break;
        }
      }
      if (!matched) fail("unsupported character reference");
    }
  }

  XmlNode parse_element(int depth) {
    if (depth > 64) fail("elements nested too deeply");
    if (peek() != '<') fail("expected '<'");
    XmlNode node;
    node.line = line_;
    advance();
    node.name = parse_name();
    // Attributes are not needed; skip to the end of the start tag.
    char quote = '\0';
    while (pos_ < text_.size()) {
      const char c = peek();
      if (quote) {
        if (c == quote) quote = '\0';
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '>' || c == '/') {
        break;
      }
      advance();
    }
    if (starts_with("/>")) {
      advance(2);
      return node;
    }
    if (peek() != '>') fail("unterminated start tag <" + node.name + ">");
    advance();

    for (;;) {
      if (pos_ >= text_.size()) fail("missing </" + node.name + "> for element opened on line " +
                                     std::to_string(node.line));
      if (starts_with("</")) {
        advance(2);
        const std::string closing = parse_name();
        if (closing != node.name) {
          fail("mismatched </" + closing + ">, expected </" + node.name + ">");
        }
        skip_space();
        if (peek() != '>') fail("unterminated end tag");
        advance();
        break;
      }
      if (starts_with("<!--")) {
        skip_until("-->");
      } else if (starts_with("<![CDATA[")) {
        advance(9);
        const std::size_t start = pos_;
        skip_until("]]>");
        node.text.append(text_, start, pos_ - start - 3);
      } else if (peek() == '<') {
        node.children.push_back(parse_element(depth + 1));
      } else {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && peek() != '<') advance();
        append_text(node.text, std::string_view(text_).substr(start, pos_ - start));
      }
    }
    const auto first = node.text.find_first_not_of(" \t\r\n");
    const auto last = node.text.find_last_not_of(" \t\r\n");
    node.text = first == std::string::npos ? std::string{} : node.text.substr(first, last - first + 1);
    return node;
  }

  std::string text_;
  std::string source_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

const XmlNode& require(const XmlNode& parent, std::string_view tag, const std::string& source) {
  if (const XmlNode* c = parent.child(tag)) return *c;
  throw ParseError(source + ":" + std::to_string(parent.line) + ": <" + parent.name + "> is missing required tag <" +
                   std::string(tag) + ">");
}

double number(const XmlNode& node, const std::string& source) {
  try {
    std::size_t used = 0;
    const double v = std::stod(node.text, &used);
    if (used != node.text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(source + ":" + std::to_string(node.line) + ": <" + node.name + "> is not a number: '" +
                     node.text + "'");
  }
}

}  // namespace

std::vector<GroundTruthBox> parse_ground_truth(std::istream& in, const std::string& image_id,
                                               const std::string& source) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const XmlNode root = XmlReader(std::move(text), source).parse_document();
  if (root.name != "annotation") {
    throw ParseError(source + ":" + std::to_string(root.line) + ": root element is <" + root.name +
                     ">, expected <annotation>");
  }

  std::vector<GroundTruthBox> boxes;
  if (root.child("object") == nullptr) return boxes;

  const XmlNode& size = require(root, "size", source);
  const double width = number(require(size, "width", source), source);
  const double height = number(require(size, "height", source), source);
  if (!(width >= 1 && height >= 1)) {
    throw ParseError(source + ":" + std::to_string(size.line) + ": image size must be positive");
  }

  for (const XmlNode& object : root.children) {
    if (object.name != "object") continue;
    const XmlNode& name = require(object, "name", source);
    if (voc_class_id(name.text) == 0) {
      throw ParseError(source + ":" + std::to_string(name.line) + ": unknown class '" + name.text + "'");
    }
    const XmlNode& bndbox = require(object, "bndbox", source);
    const double xmin = number(require(bndbox, "xmin", source), source);
    const double ymin = number(require(bndbox, "ymin", source), source);
    const double xmax = number(require(bndbox, "xmax", source), source);
    const double ymax = number(require(bndbox, "ymax", source), source);
    if (xmax < xmin || ymax < ymin) {
      throw ParseError(source + ":" + std::to_string(bndbox.line) + ": inverted box corners");
    }
    bool difficult = false;
    if (const XmlNode* d = object.child("difficult")) difficult = number(*d, source) != 0.0;

    GroundTruthBox gt;
    gt.image_id = image_id;
    gt.class_name = name.text;
    gt.box = {static_cast<float>((xmin - 1) / width), static_cast<float>((ymin - 1) / height),
              static_cast<float>(xmax / width), static_cast<float>(ymax / height)};
    gt.difficult = difficult;
    boxes.push_back(std::move(gt));
  }
  return boxes;
}

std::vector<GroundTruthBox> parse_ground_truth(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  return parse_ground_truth(in, file.stem().string(), file.string());
}

std::vector<GroundTruthBox> load_annotation_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<GroundTruthBox> all;
  for (const auto& f : files) {
    auto boxes = parse_ground_truth(f);
    all.insert(all.end(), std::make_move_iterator(boxes.begin()), std::make_move_iterator(boxes.end()));
  }
  return all;
}

double voc07_average_precision(std::span<const PrPoint> curve) {
  double sum = 0.0;
  for (int t = 0; t <= 10; ++t) {
    const double r = t / 10.0;
    double best = 0.0;
    for (const PrPoint& p : curve) {
      if (p.recall >= r) best = std::max(best, p.precision);
    }
    sum += best;
  }
  return sum / 11.0;
}

EvalResult evaluate(std::span<const DetectionRecord> detections, std::span<const GroundTruthBox> truths,
                    const EvalOptions& options) {
  for (const DetectionRecord& d : detections) {
    if (voc_class_id(d.class_name) == 0) throw ParseError("detection with unknown class '" + d.class_name + "'");
  }
  for (const GroundTruthBox& g : truths) {
    if (voc_class_id(g.class_name) == 0) throw ParseError("ground truth with unknown class '" + g.class_name + "'");
  }

  EvalResult result;
  double ap_sum = 0.0;
  for (std::string_view cls : voc_class_names()) {
    ClassEval ce;
    ce.class_name = std::string(cls);

    std::map<std::string, std::vector<std::size_t>> gt_by_image;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      if (truths[i].class_name != cls) continue;
      gt_by_image[truths[i].image_id].push_back(i);
      if (!truths[i].difficult) ++ce.ground_truth;
    }

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < detections.size(); ++i) {
      if (detections[i].class_name == cls) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });
    ce.detections = static_cast<int>(order.size());

    std::vector<char> matched(truths.size(), 0);
    int tp = 0;
    int fp = 0;
    for (std::size_t di : order) {
      const DetectionRecord& d = detections[di];
      double best = -1.0;
      std::size_t best_gt = 0;
      if (auto it = gt_by_image.find(d.image_id); it != gt_by_image.end()) {
        for (std::size_t gi : it->second) {
          const double overlap = iou(d.box, truths[gi].box);
          if (overlap > best) {
            best = overlap;
            best_gt = gi;
          }
        }
      }
      if (best >= options.iou_match) {
        if (truths[best_gt].difficult) continue;
        if (!matched[best_gt]) {
          matched[best_gt] = 1;
          ++tp;
        } else {
          ++fp;
        }
      } else {
        ++fp;
      }
      if (ce.ground_truth > 0) {
        ce.curve.push_back({static_cast<double>(tp) / ce.ground_truth, static_cast<double>(tp) / (tp + fp)});
      }
    }
    ce.true_positives = tp;
    ce.evaluated = ce.ground_truth > 0;
    if (ce.evaluated) {
      ce.ap = voc07_average_precision(ce.curve);
      ap_sum += ce.ap;
      ++result.evaluated_classes;
    }
    result.classes.push_back(std::move(ce));
  }
  result.map = result.evaluated_classes ? ap_sum / result.evaluated_classes : 0.0;
  return result;
}

std::string format_eval_report(const EvalResult& result) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-14s %6s %6s %6s %9s\n", "class", "gt", "dets", "tp", "AP");
  os << line;
  for (const ClassEval& c : result.classes) {
    if (c.evaluated) {
      std::snprintf(line, sizeof line, "%-14s %6d %6d %6d %9.6f\n", c.class_name.c_str(), c.ground_truth,
                    c.detections, c.true_positives, c.ap);
    } else {
      std::snprintf(line, sizeof line, "%-14s %6d %6d %6d %9s\n", c.class_name.c_str(), c.ground_truth,
                    c.detections, c.true_positives, "-");
    }
    os << line;
  }
  std::snprintf(line, sizeof line, "mAP: %.6f\nevaluated_classes: %d\n", result.map, result.evaluated_classes);
  os << line;
  return os.str();
}

std::string format_pr_csv(const EvalResult& result) {
  std::ostringstream os;
  os << "class,recall,precision\n";
  char line[96];
  for (const ClassEval& c : result.classes) {
    for (const PrPoint& p : c.curve) {
      std::snprintf(line, sizeof line, "%s,%.6f,%.6f\n", c.class_name.c_str(), p.recall, p.precision);
      os << line;
    }
  }
  return os.str();
}

}  // namespace tinyssd
