#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tinyssd/accountant.hpp"
#include "tinyssd/arch.hpp"
#include "tinyssd/cli.hpp"
#include "tinyssd/detect.hpp"
#include "tinyssd/errors.hpp"
#include "tinyssd/fp16.hpp"
#include "tinyssd/image.hpp"
#include "tinyssd/model_io.hpp"
#include "tinyssd/network.hpp"
#include "tinyssd/priors.hpp"
#include "tinyssd/voc_eval.hpp"

namespace py = pybind11;
using namespace tinyssd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray to_array(const Matrix& m) {
  FloatArray a({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
  std::copy(m.data.begin(), m.data.end(), a.mutable_data());
  return a;
}

Matrix to_matrix(const FloatArray& a, std::size_t cols, const char* what) {
  if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(1)) != cols) {
    throw py::value_error(std::string(what) + " must have shape (rows, " + std::to_string(cols) + ")");
  }
  const auto rows = static_cast<std::size_t>(a.shape(0));
  return Matrix(rows, cols, std::vector<float>(a.data(), a.data() + rows * cols));
}

const ArchSpec& spec() {
  static const ArchSpec s = tiny_ssd_spec();
  return s;
}

const PriorSet& priors() {
  static const PriorSet p = generate_priors(prior_config_for(spec()));
  return p;
}

py::tuple shape_tuple(const Shape& s) { return py::make_tuple(s.n, s.c, s.h, s.w); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tiny SSD inference engine and resource auditor.";

  py::register_exception<Error>(m, "TinySsdError", PyExc_RuntimeError);

  py::class_<WeightStore>(m, "WeightStore")
      .def("names",
           [](const WeightStore& s) {
             std::vector<std::string> names;
             for (const Blob& b : s.blobs()) names.push_back(b.name);
             return names;
           })
      .def("get",
           [](const WeightStore& s, const std::string& name) {
             const Blob& b = s.at(name);
             std::vector<py::ssize_t> shape(b.shape.begin(), b.shape.end());
             FloatArray a(shape);
             std::copy(b.data.begin(), b.data.end(), a.mutable_data());
             return a;
           })
      .def("element_count", &WeightStore::element_count)
      .def("__len__", &WeightStore::size)
      .def("__eq__", [](const WeightStore& a, const WeightStore& b) { return a == b; });

  m.def("describe", [] { return describe_table(spec()); }, "Architecture tables as text.");
  m.def("spec_json", [] { return arch_to_json(spec()); }, "Architecture as JSON.");

  m.def("intermediate_shapes", [] {
    py::list out;
    for (const LayerShape& s : intermediate_shapes(spec())) {
      out.append(py::make_tuple(s.name, shape_tuple(s.input), shape_tuple(s.output)));
    }
    return out;
  });

  m.def("audit", [] {
    const AuditReport r = audit(spec());
    const AuditComparison cmp = compare(r);
    py::list layers;
    for (const LayerAudit& l : r.layers) {
      layers.append(py::make_tuple(l.name, l.param_count, l.mac_count, shape_tuple(l.output_shape)));
    }
    py::dict deviations;
    for (const MetricDeviation& d : cmp.metrics) deviations[py::str(d.metric)] = d.relative_deviation;
    py::dict out;
    out["total_params"] = r.total_params;
    out["total_macs"] = r.total_macs;
    out["fp16_bytes"] = r.fp16_bytes;
    out["fp32_bytes"] = r.fp32_bytes;
    out["layers"] = layers;
    out["deviations"] = deviations;
    out["pass"] = cmp.pass;
    return out;
  });

  m.def("init_random", [](std::uint64_t seed) { return init_random(spec(), seed); }, py::arg("seed"));
  m.def(
      "save_model",
      [](const WeightStore& s, const std::string& path, const std::string& dtype) {
        save_model(s, path, parse_dtype(dtype));
      },
      py::arg("store"), py::arg("path"), py::arg("dtype") = "f16");
  m.def("load_model", [](const std::string& path) { return load_model(path, parameter_manifest(spec())); });
  m.def("quantize_fp16", [](const WeightStore& s) {
    QuantizeStats stats;
    WeightStore q = quantize_fp16(s, &stats);
    py::dict d;
    d["values"] = stats.values;
    d["clamped"] = stats.clamped;
    d["max_abs_error"] = stats.max_abs_error;
    d["mean_abs_error"] = stats.mean_abs_error;
    return py::make_tuple(std::move(q), d);
  });
  m.def("round_to_half", [](const FloatArray& a) {
    FloatArray out(std::vector<py::ssize_t>(a.shape(), a.shape() + a.ndim()));
    for (py::ssize_t i = 0; i < a.size(); ++i) out.mutable_data()[i] = round_to_half(a.data()[i]);
    return out;
  });

  m.def(
      "forward",
      [](const WeightStore& store, const FloatArray& image) {
        if (image.ndim() != 4) throw py::value_error("image must have shape (n, 3, 300, 300)");
        const Shape s{static_cast<int>(image.shape(0)), static_cast<int>(image.shape(1)),
                      static_cast<int>(image.shape(2)), static_cast<int>(image.shape(3))};
        Tensor input(s, std::vector<float>(image.data(), image.data() + image.size()));
        HeadOutput head;
        {
          py::gil_scoped_release release;
          head = forward(spec(), store, input);
        }
        return py::make_tuple(to_array(head.loc), to_array(head.conf));
      },
      py::arg("store"), py::arg("image"), "Returns (loc, conf) with one row per prior and batch item.");

  m.def("preprocess_image", [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> rgb) {
    if (rgb.ndim() != 3 || rgb.shape(2) != 3) throw py::value_error("image must have shape (h, w, 3)");
    RgbImage img(static_cast<int>(rgb.shape(1)), static_cast<int>(rgb.shape(0)));
    std::copy(rgb.data(), rgb.data() + rgb.size(), img.pixels.begin());
    const Tensor t = preprocess_image(img);
    FloatArray out({1, 3, t.shape().h, t.shape().w});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
  });

  m.def("generate_priors", [] { return to_array(priors().boxes); });
  m.def(
      "decode_boxes",
      [](const FloatArray& loc, bool clip) {
        const DecodedBoxes d = decode_boxes(to_matrix(loc, 4, "loc"), priors(), Variances{}, clip);
        return to_array(d.boxes);
      },
      py::arg("loc"), py::arg("clip") = true);
  m.def(
      "nms",
      [](const std::vector<float>& scores, const FloatArray& boxes, float threshold) {
        const Matrix b = to_matrix(boxes, 4, "boxes");
        if (b.rows != scores.size()) throw py::value_error("scores and boxes differ in length");
        std::vector<ScoredBox> candidates;
        for (std::size_t i = 0; i < b.rows; ++i) candidates.push_back({scores[i], {b(i, 0), b(i, 1), b(i, 2), b(i, 3)}});
        return nms_per_class(candidates, threshold);
      },
      py::arg("scores"), py::arg("boxes"), py::arg("iou_threshold") = 0.45f);
  m.def(
      "detect",
      [](const FloatArray& loc, const FloatArray& conf, float conf_threshold, float iou_threshold, int top_k) {
        HeadOutput head;
        head.loc = to_matrix(loc, 4, "loc");
        head.conf = to_matrix(conf, static_cast<std::size_t>(spec().class_count), "conf");
        head.priors = head.loc.rows;
        DetectOptions opts;
        opts.conf_threshold = conf_threshold;
        opts.iou_threshold = iou_threshold;
        opts.top_k = top_k;
        py::list out;
        for (const Detection& d : detect(head, priors(), opts)) {
          out.append(py::make_tuple(d.class_id, class_name(d.class_id), d.score,
                                    py::make_tuple(d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax)));
        }
        return out;
      },
      py::arg("loc"), py::arg("conf"), py::arg("conf_threshold") = 0.5f, py::arg("iou_threshold") = 0.45f,
      py::arg("top_k") = 200);

  m.def("evaluate", [](const std::string& detection_lines, const std::string& annotation_dir) {
    std::istringstream in(detection_lines);
    const auto dets = read_detection_lines(in);
    const EvalResult r = evaluate(dets, load_annotation_dir(annotation_dir));
    py::dict aps;
    for (const ClassEval& c : r.classes) {
      if (c.evaluated) aps[py::str(c.class_name)] = c.ap;
    }
    py::dict out;
    out["map"] = r.map;
    out["ap"] = aps;
    out["evaluated_classes"] = r.evaluated_classes;
    return out;
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
