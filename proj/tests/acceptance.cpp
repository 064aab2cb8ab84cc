// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tinyssd/accountant.hpp"
#include "tinyssd/arch.hpp"
#include "tinyssd/detect.hpp"
#include "tinyssd/kernels.hpp"
#include "tinyssd/model_io.hpp"
#include "tinyssd/network.hpp"
#include "tinyssd/priors.hpp"
#include "tinyssd/voc_eval.hpp"

using namespace tinyssd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

oracle::Rect rect(const Box& b) { return {b.xmin, b.ymin, b.xmax, b.ymax}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const PriorSet& priors() {
  static const PriorSet p = generate_priors(prior_config_for(tiny_ssd_spec()));
  return p;
}

Outcome shape_chain() {
  Outcome o;
  const auto start = Clock::now();
  const ArchSpec spec = tiny_ssd_spec();
  std::map<std::string, LayerShape> s;
  for (const LayerShape& l : intermediate_shapes(spec)) s[l.name] = l;
  const std::vector<std::pair<std::string, int>> inputs{
      {"conv1", 300}, {"pool1", 149}, {"fire1", 74}, {"fire2", 74}, {"pool3", 74}, {"fire3", 37},
      {"fire4", 37},  {"pool5", 37},  {"fire5", 18}, {"fire6", 18}, {"fire7", 18}, {"fire8", 18},
      {"pool9", 18},  {"fire9", 9},   {"pool10", 9}, {"fire10", 4}, {"conv12_1", 4}};
  for (const auto& [name, size] : inputs) {
    const Shape& in = s.at(name).input;
    o.require(in.h == size && in.w == size, name + " input " + std::to_string(in.h) + " != " + std::to_string(size));
  }
  const int head_sizes[] = {37, 18, 9, 4, 2, 1};
  for (std::size_t i = 0; i < spec.detection_sources.size() && i < 6; ++i) {
    const DetectionSource& d = spec.detection_sources[i];
    for (const std::string& head : {d.loc_layer, d.conf_layer}) {
      const Shape& in = s.at(head).input;
      o.require(in.h == head_sizes[i] && in.w == head_sizes[i], head + " input " + std::to_string(in.h));
    }
  }
  o.require(spec.detection_sources.size() == 6, "six detection sources");
  const double t = seconds_since(start);
  o.require(t < 1.0, "runtime " + fmt("%.3f s", t));
  o.detail = o.pass ? "17 backbone inputs and 12 head inputs match, " + fmt("%.4f s", t) : o.detail;
  return o;
}

Outcome dimensionality() {
  Outcome o;
  const ArchSpec spec = tiny_ssd_spec();
  const WeightStore store = init_random(spec, 2024);
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-123.0f, 151.0f);
  std::vector<float> px(3 * 300 * 300);
  for (float& v : px) v = u(rng);
  const Tensor image({1, 3, 300, 300}, std::move(px));

  const auto start = Clock::now();
  const HeadOutput h = forward(spec, store, image);
  const double t = seconds_since(start);

  std::size_t expected = 0;
  const int f[] = {37, 18, 9, 4, 2, 1};
  const int b[] = {4, 6, 6, 6, 6, 4};
  for (int i = 0; i < 6; ++i) expected += static_cast<std::size_t>(f[i]) * f[i] * b[i];
  o.require(expected == 8030, "prior oracle gives " + std::to_string(expected));
  o.require(h.loc.rows == expected && h.conf.rows == expected, "rows " + std::to_string(h.loc.rows));
  o.require(priors().size() == expected, "prior set size " + std::to_string(priors().size()));
  o.require(h.loc.cols == 4, "loc width " + std::to_string(h.loc.cols));
  o.require(h.conf.cols == 21, "conf width " + std::to_string(h.conf.cols));
  bool finite = true;
  for (float v : h.loc.data) finite = finite && std::isfinite(v);
  for (float v : h.conf.data) finite = finite && std::isfinite(v);
  o.require(finite, "non-finite head output");
  o.require(t < 10.0, "forward pass " + fmt("%.2f s", t));
  if (o.pass) o.detail = "8030 x 4 loc, 8030 x 21 conf, forward pass " + fmt("%.3f s", t);
  return o;
}

Outcome parameter_audit(const AuditReport& r) {
  Outcome o;
  const double dp = (static_cast<double>(r.total_params) - 1.13e6) / 1.13e6;
  const double ds = (r.fp16_mb() - 2.3) / 2.3;
  o.require(std::fabs(dp) <= 0.06, "params deviation " + fmt("%+.4f", dp));
  o.require(std::fabs(ds) <= 0.06, "fp16 size deviation " + fmt("%+.4f", ds));
  const std::string table = format_audit_table(r);
  o.require(table.find("fire5") != std::string::npos && table.find("conv13_2_mbox_conf") != std::string::npos,
            "per-layer report incomplete");
  if (o.pass) {
    o.detail = "params " + std::to_string(r.total_params) + " (" + fmt("%+.2f%%", 100 * dp) + "), fp16 " +
               std::to_string(r.fp16_bytes) + " bytes (" + fmt("%+.2f%%", 100 * ds) + ")";
  }
  return o;
}

Outcome mac_audit(const AuditReport& r) {
  Outcome o;
  const double dm = (static_cast<double>(r.total_macs) - 571.09e6) / 571.09e6;
  o.require(std::fabs(dm) <= 0.10, "MAC deviation " + fmt("%+.4f", dm));
  if (o.pass) o.detail = "MACs " + std::to_string(r.total_macs) + " (" + fmt("%+.3f%%", 100 * dm) + ")";
  return o;
}

Outcome kernel_oracles() {
  Outcome o;
  std::mt19937 rng(555);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f), unit(0.0f, 1.0f);
  std::uniform_int_distribution<int> ext(1, 8), ker(1, 3), str(1, 3), pad(0, 2);

  int conv_done = 0;
  double conv_err = 0.0;
  while (conv_done < 200) {
    const Shape s{ext(rng), ext(rng), ext(rng), ext(rng)};
    const ConvGeometry g{ext(rng), ker(rng), ker(rng), str(rng), pad(rng), conv_done % 3 != 0};
    if (s.h + 2 * g.pad < g.kernel_h || s.w + 2 * g.pad < g.kernel_w) continue;
    std::vector<float> in(s.size()), w(static_cast<std::size_t>(g.out_channels) * s.c * g.kernel_h * g.kernel_w),
        b(g.has_bias ? g.out_channels : 0);
    for (float& v : in) v = u(rng);
    for (float& v : w) v = u(rng);
    for (float& v : b) v = u(rng);
    const Tensor out = conv2d(Tensor(s, in), g, w, b);
    int oh = 0, ow = 0;
    const auto ref = oracle::conv2d(in, s.n, s.c, s.h, s.w, w, b, g.out_channels, g.kernel_h, g.kernel_w, g.stride,
                                    g.pad, oh, ow);
    if (out.shape() != Shape{s.n, g.out_channels, oh, ow}) {
      o.require(false, "conv shape mismatch in instance " + std::to_string(conv_done));
    } else {
      for (std::size_t i = 0; i < ref.size(); ++i) conv_err = std::max(conv_err, std::fabs(out.data()[i] - ref[i]));
    }
    ++conv_done;
  }
  o.require(conv_err <= 1e-5, "conv max error " + fmt("%.3g", conv_err));

  std::uniform_int_distribution<int> count(1, 100);
  int nms_mismatch = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = count(rng);
    std::vector<ScoredBox> cand;
    std::vector<float> scores;
    std::vector<oracle::Rect> rects;
    for (int i = 0; i < n; ++i) {
      float s = unit(rng);
      if (t % 4 == 0) s = std::round(s * 5) / 5;  // force ties
      const float x = unit(rng) * 0.8f, y = unit(rng) * 0.8f;
      const Box b{x, y, x + 0.02f + unit(rng) * 0.3f, y + 0.02f + unit(rng) * 0.3f};
      cand.push_back({s, b});
      scores.push_back(s);
      rects.push_back(rect(b));
    }
    const float thr = t % 2 ? 0.45f : 0.3f;
    nms_mismatch += nms_per_class(cand, thr) != oracle::nms(scores, rects, thr);
  }
  o.require(nms_mismatch == 0, std::to_string(nms_mismatch) + " NMS mismatches");

  const char* names[] = {"bus", "horse", "sheep"};
  std::uniform_int_distribution<int> three(0, 2), gt_n(1, 8), det_n(0, 20);
  double ap_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<GroundTruthBox> gt;
    std::vector<oracle::Truth> ogt;
    const int n_gt = gt_n(rng);
    for (int i = 0; i < n_gt; ++i) {
      const int img = three(rng), cls = three(rng);
      const float x = unit(rng) * 0.6f, y = unit(rng) * 0.6f;
      const Box b{x, y, x + 0.1f + unit(rng) * 0.3f, y + 0.1f + unit(rng) * 0.3f};
      const bool diff = unit(rng) < 0.1f;
      gt.push_back({std::to_string(img), names[cls], b, diff});
      ogt.push_back({img, cls, rect(b), diff});
    }
    std::vector<DetectionRecord> dets;
    std::vector<oracle::Det> odets;
    const int n_det = det_n(rng);
    for (int i = 0; i < n_det; ++i) {
      const int img = three(rng), cls = three(rng);
      Box b;
      if (unit(rng) < 0.6f) {
        const Box& g = gt[std::uniform_int_distribution<std::size_t>(0, gt.size() - 1)(rng)].box;
        b = {g.xmin + u(rng) * 0.03f, g.ymin + u(rng) * 0.03f, g.xmax + u(rng) * 0.03f, g.ymax + u(rng) * 0.03f};
      } else {
        const float x = unit(rng) * 0.6f, y = unit(rng) * 0.6f;
        b = {x, y, x + 0.1f + unit(rng) * 0.3f, y + 0.1f + unit(rng) * 0.3f};
      }
      const float score = unit(rng);
      dets.push_back({std::to_string(img), names[cls], score, b});
      odets.push_back({img, cls, score, rect(b)});
    }
    const EvalResult r = evaluate(dets, gt);
    double sum = 0.0;
    int evaluated = 0;
    for (int c = 0; c < 3; ++c) {
      const double ref = oracle::average_precision(odets, ogt, c);
      for (const ClassEval& ce : r.classes) {
        if (ce.class_name != names[c] || !ce.evaluated) continue;
        ap_err = std::max(ap_err, std::fabs(ce.ap - ref));
        sum += ref;
        ++evaluated;
      }
    }
    if (evaluated) ap_err = std::max(ap_err, std::fabs(r.map - sum / evaluated));
  }
  o.require(ap_err <= 1e-9, "mAP max error " + fmt("%.3g", ap_err));
  if (o.pass) {
    o.detail = "200 conv (max err " + fmt("%.2g", conv_err) + "), 100 NMS exact, 100 mAP (max err " +
               fmt("%.2g", ap_err) + ")";
  }
  return o;
}

Outcome decode_inverse() {
  Outcome o;
  std::mt19937 rng(77);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  std::uniform_int_distribution<std::size_t> pick(0, priors().size() - 1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::array<float, 4> l{u(rng), u(rng), u(rng), u(rng)};
    const Box prior = priors().box(pick(rng));
    const auto back = oracle::encode(rect(decode_box(l, prior, Variances{})), rect(prior));
    for (int k = 0; k < 4; ++k) worst = std::max(worst, std::fabs(back[k] - l[k]));
  }
  o.require(worst <= 1e-5, "max round-trip error " + fmt("%.3g", worst));
  if (o.pass) o.detail = "1000 offset vectors, max error " + fmt("%.3g", worst);
  return o;
}

Outcome fp16_roundtrip() {
  Outcome o;
  const ArchSpec spec = tiny_ssd_spec();
  const WeightStore store = init_random(spec, 31337);
  const auto dir = oracle::scratch_dir("accept");
  save_model(store, dir / "model.tssd", DType::f16);
  const WeightStore loaded = load_model(dir / "model.tssd", parameter_manifest(spec));
  std::filesystem::remove_all(dir);
  const WeightStore q = quantize_fp16(store);
  std::size_t diff = 0, values = 0;
  if (loaded.size() != q.size()) {
    o.require(false, "blob count differs");
  } else {
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto& a = loaded.blobs()[i];
      const auto& b = q.blobs()[i];
      o.require(a.name == b.name && a.shape == b.shape, "blob " + b.name + " header differs");
      if (a.data.size() != b.data.size()) continue;
      values += a.data.size();
      diff += std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) != 0;
    }
  }
  o.require(diff == 0, std::to_string(diff) + " blobs differ bitwise");
  o.require(quantize_fp16(q) == q, "quantize is not idempotent");
  if (o.pass) o.detail = std::to_string(values) + " values bit-exact, quantize idempotent";
  return o;
}

Outcome property_substitution() {
  Outcome o;
  // (a) oracle and null detectors on a three-image fixture
  const auto dir = oracle::scratch_dir("fixture");
  oracle::write_text(dir / "a.xml", oracle::annotation_xml(300, 300, {{"dog", {20, 30, 140, 200}}, {"person", {150, 10, 290, 290}}}));
  oracle::write_text(dir / "b.xml", oracle::annotation_xml(500, 375, {{"car", {1, 100, 250, 300}}, {"car", {260, 90, 500, 280}}}));
  oracle::write_text(dir / "c.xml", oracle::annotation_xml(200, 400, {{"bird", {50, 50, 150, 120}}, {"dog", {10, 200, 190, 390}}}, {false, true}));
  const auto truths = load_annotation_dir(dir);
  std::filesystem::remove_all(dir);
  std::string lines;
  for (const GroundTruthBox& g : truths) {
    Detection d;
    d.class_id = voc_class_id(g.class_name);
    d.score = 1.0f;
    d.box = g.box;
    lines += format_detection_line(g.image_id, d) + "\n";
  }
  std::istringstream in(lines);
  const double oracle_map = evaluate(read_detection_lines(in), truths).map;
  const double null_map = evaluate({}, truths).map;
  o.require(oracle_map == 1.0, "oracle detector mAP " + fmt("%.6f", oracle_map));
  o.require(null_map == 0.0, "null detector mAP " + fmt("%.6f", null_map));

  // (b) planted objects through softmax, decode, NMS and back through the evaluator
  const std::size_t rows = priors().size();
  HeadOutput head;
  head.priors = rows;
  head.loc = Matrix(rows, 4);
  head.conf = Matrix(rows, 21);
  for (std::size_t r = 0; r < rows; ++r) head.conf(r, 0) = 9.0f;
  struct Plant {
    std::size_t prior;
    int cls;
    Box box;
  };
  const std::size_t s18 = 37 * 37 * 4, s4 = s18 + 18 * 18 * 6 + 9 * 9 * 6, s2 = s4 + 4 * 4 * 6;
  const std::vector<Plant> plants{{s18 + 100, 8, {0.12f, 0.18f, 0.33f, 0.41f}},
                                  {s4 + 30, 15, {0.55f, 0.05f, 0.95f, 0.60f}},
                                  {s2 + 7, 2, {0.05f, 0.52f, 0.48f, 0.97f}}};
  std::vector<GroundTruthBox> planted_truth;
  for (const Plant& p : plants) {
    const auto l = oracle::encode(rect(p.box), rect(priors().box(p.prior)));
    for (int k = 0; k < 4; ++k) head.loc(p.prior, k) = static_cast<float>(l[k]);
    head.conf(p.prior, 0) = 0.0f;
    head.conf(p.prior, p.cls) = 9.0f;
    planted_truth.push_back({"planted", class_name(p.cls), p.box, false});
  }
  const auto dets = detect(head, priors(), DetectOptions{});
  o.require(dets.size() == plants.size(), std::to_string(dets.size()) + " detections for 3 planted objects");
  const double score = std::exp(9.0) / (std::exp(9.0) + 20.0);
  for (const Plant& p : plants) {
    bool found = false;
    for (const Detection& d : dets) {
      if (d.prior_index != p.prior) continue;
      found = d.class_id == p.cls && std::fabs(d.score - score) < 1e-6 && std::fabs(d.box.xmin - p.box.xmin) < 1e-5 &&
              std::fabs(d.box.ymin - p.box.ymin) < 1e-5 && std::fabs(d.box.xmax - p.box.xmax) < 1e-5 &&
              std::fabs(d.box.ymax - p.box.ymax) < 1e-5;
    }
    o.require(found, "planted prior " + std::to_string(p.prior) + " not recovered");
  }
  std::string emitted;
  for (const Detection& d : dets) emitted += format_detection_line("planted", d) + "\n";
  std::istringstream emitted_in(emitted);
  const double planted_map = evaluate(read_detection_lines(emitted_in), planted_truth).map;
  o.require(planted_map == 1.0, "planted mAP " + fmt("%.6f", planted_map));
  if (o.pass) o.detail = "oracle mAP 1, null mAP 0, 3 planted objects recovered exactly";
  return o;
}

}  // namespace

int main() {
  const AuditReport report = audit(tiny_ssd_spec());
  std::cout << format_audit_table(report) << '\n';

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 shape chain", shape_chain},
      {"2 prior/output dimensionality", dimensionality},
      {"3 parameter and fp16 size audit", [&] { return parameter_audit(report); }},
      {"4 MAC audit", [&] { return mac_audit(report); }},
      {"5 kernel oracle equivalence", kernel_oracles},
      {"6 decode/encode inverse", decode_inverse},
      {"7 fp16 round trip", fp16_roundtrip},
      {"8 property substitution", property_substitution},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << '\n';
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << '\n';
  return failures ? 1 : 0;
}
