#include "tinyssd/accountant.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "tinyssd/model_io.hpp"

namespace tinyssd {

namespace {

struct ConvCost {
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

ConvCost conv_cost(const ConvGeometry& g, int in_channels, int out_h, int out_w) {
  const std::int64_t weights = static_cast<std::int64_t>(in_channels) * g.kernel_h * g.kernel_w * g.out_channels;
  return {weights + (g.has_bias ? g.out_channels : 0), weights * out_h * out_w};
}

}  // namespace

AuditReport audit(const ArchSpec& spec) {
  validate_graph(spec);
  const auto shapes = intermediate_shapes(spec);

  AuditReport report;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const Shape& in = shapes[i].input;
    const Shape& out = shapes[i].output;
    LayerAudit entry{layer.name, 0, 0, out};
    if (layer.kind == LayerKind::conv) {
      const ConvCost c = conv_cost(layer.conv(), in.c, out.h, out.w);
      entry.param_count = c.params;
      entry.mac_count = c.macs;
    } else if (layer.kind == LayerKind::fire) {
      const FireConfig& f = layer.fire();
      for (const ConvCost& c : {conv_cost(fire_squeeze_geometry(f), in.c, out.h, out.w),
                                conv_cost(fire_expand1x1_geometry(f), f.squeeze, out.h, out.w),
                                conv_cost(fire_expand3x3_geometry(f), f.squeeze, out.h, out.w)}) {
        entry.param_count += c.params;
        entry.mac_count += c.macs;
      }
    }
    report.total_params += entry.param_count;
    report.total_macs += entry.mac_count;
    report.layers.push_back(std::move(entry));
  }

  const auto manifest = parameter_manifest(spec);
  report.fp16_bytes = model_file_size(manifest, DType::f16);
  report.fp32_bytes = model_file_size(manifest, DType::f32);
  return report;
}

AuditComparison compare(const AuditReport& report, const AuditReference& ref, const AuditTolerance& tol) {
  auto metric = [](std::string name, double measured, double reference, double tolerance) {
    MetricDeviation m{std::move(name), measured, reference, 0.0, tolerance, false};
    m.relative_deviation = reference != 0.0 ? (measured - reference) / reference : (measured == 0.0 ? 0.0 : INFINITY);
    m.pass = std::fabs(m.relative_deviation) <= tolerance;
    return m;
  };
  AuditComparison out;
  out.metrics.push_back(metric("params", static_cast<double>(report.total_params), ref.params, tol.params));
  out.metrics.push_back(metric("macs", static_cast<double>(report.total_macs), ref.macs, tol.macs));
  out.metrics.push_back(metric("fp16_mb", report.fp16_mb(), ref.fp16_mb, tol.fp16_mb));
  out.pass = true;
  for (const MetricDeviation& m : out.metrics) out.pass = out.pass && m.pass;
  return out;
}

std::string format_audit_table(const AuditReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "layer" << std::right << std::setw(12) << "params" << std::setw(16) << "MACs"
     << "  " << std::left << "output\n";
  os << std::string(64, '-') << '\n';
  for (const LayerAudit& l : report.layers) {
    const Shape& s = l.output_shape;
    os << std::left << std::setw(20) << l.name << std::right << std::setw(12) << l.param_count << std::setw(16)
       << l.mac_count << "  " << std::left << s.c << "x" << s.h << "x" << s.w << '\n';
  }
  os << std::string(64, '-') << '\n';
  os << std::left << std::setw(20) << "total" << std::right << std::setw(12) << report.total_params
     << std::setw(16) << report.total_macs << '\n';
  return os.str();
}

std::string format_audit_summary(const AuditReport& report, const AuditComparison& comparison) {
  std::ostringstream os;
  char buf[64];
  os << "total_params: " << report.total_params << '\n';
  os << "total_macs: " << report.total_macs << '\n';
  os << "fp16_bytes: " << report.fp16_bytes << '\n';
  os << "fp32_bytes: " << report.fp32_bytes << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", report.fp16_mb());
  os << "fp16_mb: " << buf << '\n';
  for (const MetricDeviation& m : comparison.metrics) {
    std::snprintf(buf, sizeof buf, "%.6g", m.reference);
    os << m.metric << "_reference: " << buf << '\n';
    std::snprintf(buf, sizeof buf, "%+.6f", m.relative_deviation);
    os << m.metric << "_deviation: " << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.6f", m.tolerance);
    os << m.metric << "_tolerance: " << buf << '\n';
    os << m.metric << "_pass: " << (m.pass ? "true" : "false") << '\n';
  }
  os << "pass: " << (comparison.pass ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace tinyssd
