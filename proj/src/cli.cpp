#include "tinyssd/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tinyssd/accountant.hpp"
#include "tinyssd/arch.hpp"
#include "tinyssd/detect.hpp"
#include "tinyssd/errors.hpp"
#include "tinyssd/image.hpp"
#include "tinyssd/model_io.hpp"
#include "tinyssd/network.hpp"
#include "tinyssd/parallel.hpp"
#include "tinyssd/priors.hpp"
#include "tinyssd/voc_eval.hpp"

namespace tinyssd {

namespace {

// Invalid flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ArchSpec load_arch(const std::string& path) {
  if (path.empty()) return tiny_ssd_spec();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return arch_from_json(text.str());
}

bool has_tensor_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string_view(magic, 4) == "TNSR";
}

std::array<std::uint8_t, 3> class_color(int class_id) {
  // Spread hues over the 20 classes.
  const std::uint32_t h = static_cast<std::uint32_t>(class_id) * 2654435761u;
  return {static_cast<std::uint8_t>(64 + (h >> 8) % 192), static_cast<std::uint8_t>(64 + (h >> 16) % 192),
          static_cast<std::uint8_t>(64 + (h >> 24) % 192)};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tiny SSD inference engine and resource auditor", "tinyssd"};
  app.require_subcommand(1);

  std::string describe_format = "text";
  std::string describe_arch;
  auto* describe = app.add_subcommand("describe", "Print the architecture tables");
  describe->add_option("--format", describe_format, "text or struct (JSON)")
      ->check(CLI::IsMember({"text", "struct"}));
  describe->add_option("--arch", describe_arch, "Architecture JSON (default: built-in Tiny SSD)");

  bool audit_check = false;
  std::string audit_arch;
  AuditReference ref;
  AuditTolerance tol;
  auto* audit_cmd = app.add_subcommand("audit", "Count parameters, MACs and model size");
  audit_cmd->add_flag("--check", audit_check, "Exit 3 when any metric is outside its tolerance");
  audit_cmd->add_option("--arch", audit_arch, "Architecture JSON (default: built-in Tiny SSD)");
  audit_cmd->add_option("--ref-params", ref.params, "Reference parameter count")->capture_default_str();
  audit_cmd->add_option("--ref-macs", ref.macs, "Reference MAC count")->capture_default_str();
  audit_cmd->add_option("--ref-size-mb", ref.fp16_mb, "Reference fp16 model size in MB (1e6 bytes)")
      ->capture_default_str();
  audit_cmd->add_option("--tol-params", tol.params, "Relative tolerance on parameters")->capture_default_str();
  audit_cmd->add_option("--tol-macs", tol.macs, "Relative tolerance on MACs")->capture_default_str();
  audit_cmd->add_option("--tol-size", tol.fp16_mb, "Relative tolerance on fp16 size")->capture_default_str();

  std::string model_path, image_path, detect_out = "lines", annotated_path, image_id;
  DetectOptions detect_opts;
  auto* detect_cmd = app.add_subcommand("detect", "Run detection on one image");
  detect_cmd->add_option("--model", model_path, "TSSD model file")->required();
  detect_cmd->add_option("--image", image_path, "PPM (P6) image or 1x3x300x300 TNSR tensor")->required();
  detect_cmd->add_option("--conf", detect_opts.conf_threshold, "Confidence threshold")->capture_default_str();
  detect_cmd->add_option("--iou", detect_opts.iou_threshold, "NMS IoU threshold")->capture_default_str();
  detect_cmd->add_option("--top-k", detect_opts.top_k, "Maximum detections per image")->capture_default_str();
  detect_cmd->add_option("--out", detect_out, "lines or annotated-ppm")
      ->check(CLI::IsMember({"lines", "annotated-ppm"}));
  detect_cmd->add_option("--annotated", annotated_path, "Where to write the annotated PPM");
  detect_cmd->add_option("--image-id", image_id, "Identifier in emitted lines (default: image file stem)");

  std::string detections_path, annotations_dir, pr_csv_path;
  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "VOC2007 11-point mAP of detection lines");
  eval_cmd->add_option("--detections", detections_path, "Detection lines file")->required();
  eval_cmd->add_option("--annotations", annotations_dir, "Directory of VOC XML annotations")->required();
  eval_cmd->add_option("--iou", eval_opts.iou_match, "Match IoU threshold")->capture_default_str();
  eval_cmd->add_option("--pr-csv", pr_csv_path, "Write PR curve points as CSV");

  std::string quant_in, quant_out;
  auto* quantize_cmd = app.add_subcommand("quantize", "Convert a model to fp16");
  quantize_cmd->add_option("--in", quant_in, "Input model")->required();
  quantize_cmd->add_option("--out", quant_out, "Output fp16 model")->required();

  std::uint64_t seed = 0;
  std::string init_out, init_dtype = "f16";
  auto* init_cmd = app.add_subcommand("init-random", "Write a seeded random Tiny SSD model");
  init_cmd->add_option("--seed", seed, "RNG seed")->required();
  init_cmd->add_option("--out", init_out, "Output model")->required();
  init_cmd->add_option("--dtype", init_dtype, "f16 or f32")->check(CLI::IsMember({"f16", "f32"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  configure_threads_from_env();
  try {
    if (*describe) {
      const ArchSpec spec = load_arch(describe_arch);
      if (describe_format == "struct") {
        out << arch_to_json(spec);
      } else {
        validate_graph(spec);
        out << describe_table(spec);
      }
      return kExitOk;
    }

    if (*audit_cmd) {
      const ArchSpec spec = load_arch(audit_arch);
      const AuditReport report = audit(spec);
      const AuditComparison cmp = compare(report, ref, tol);
      out << format_audit_table(report) << '\n' << format_audit_summary(report, cmp);
      if (audit_check && !cmp.pass) {
        err << "audit check failed\n";
        return kExitCheckFailed;
      }
      return kExitOk;
    }

    if (*detect_cmd) {
      if (detect_out == "annotated-ppm" && annotated_path.empty()) {
        throw UsageError("--out annotated-ppm requires --annotated PATH");
      }
      const ArchSpec spec = tiny_ssd_spec();
      const WeightStore store = load_model(model_path, parameter_manifest(spec));

      const bool tensor_input = has_tensor_magic(image_path);
      if (tensor_input && detect_out == "annotated-ppm") {
        throw UsageError("annotated output needs a PPM image, not a raw tensor");
      }
      RgbImage rgb;
      const Tensor input = [&] {
        if (tensor_input) return load_tnsr(image_path);
        rgb = load_ppm(image_path);
        return preprocess_image(rgb);
      }();

      const auto start = std::chrono::steady_clock::now();
      const HeadOutput head = forward(spec, store, input);
      const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
      err << "forward pass: " << static_cast<long>(elapsed.count()) << " ms\n";

      const PriorSet priors = generate_priors(prior_config_for(spec));
      const auto detections = detect(head, priors, detect_opts);
      const std::string id = image_id.empty() ? std::filesystem::path(image_path).stem().string() : image_id;
      for (const Detection& d : detections) out << format_detection_line(id, d) << '\n';

      if (detect_out == "annotated-ppm") {
        for (const Detection& d : detections) draw_box_outline(rgb, d.box, class_color(d.class_id), 2);
        save_ppm(rgb, annotated_path);
      }
      return kExitOk;
    }

    if (*eval_cmd) {
      std::ifstream in(detections_path);
      if (!in) throw Error("cannot open " + detections_path);
      const auto detections = read_detection_lines(in);
      const auto truths = load_annotation_dir(annotations_dir);
      const EvalResult result = evaluate(detections, truths, eval_opts);
      out << format_eval_report(result);
      if (!pr_csv_path.empty()) {
        std::ofstream csv(pr_csv_path);
        if (!csv) throw Error("cannot open " + pr_csv_path + " for writing");
        csv << format_pr_csv(result);
      }
      return kExitOk;
    }

    if (*quantize_cmd) {
      QuantizeStats stats;
      const WeightStore quantized = quantize_fp16(load_model(quant_in), &stats);
      save_model(quantized, quant_out, DType::f16);
      char buf[96];
      out << "values: " << stats.values << '\n';
      out << "clamped: " << stats.clamped << '\n';
      std::snprintf(buf, sizeof buf, "max_abs_error: %.9g\nmean_abs_error: %.9g\n", stats.max_abs_error,
                    stats.mean_abs_error);
      out << buf;
      if (stats.clamped > 0) err << "warning: " << stats.clamped << " values clamped to +/-65504\n";
      return kExitOk;
    }

    if (*init_cmd) {
      const DType dtype = parse_dtype(init_dtype);
      const WeightStore store = init_random(tiny_ssd_spec(), seed);
      save_model(store, init_out, dtype);
      out << "blobs: " << store.size() << '\n';
      out << "params: " << store.element_count() << '\n';
      out << "dtype: " << to_string(dtype) << '\n';
      out << "bytes: " << std::filesystem::file_size(init_out) << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace tinyssd
