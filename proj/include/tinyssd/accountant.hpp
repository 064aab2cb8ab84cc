#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tinyssd/arch.hpp"

namespace tinyssd {

struct LayerAudit {
  std::string name;
  std::int64_t param_count = 0;
  std::int64_t mac_count = 0;  // one multiply-accumulate per weight use, one image
  Shape output_shape;
};

struct AuditReport {
  std::vector<LayerAudit> layers;
  std::int64_t total_params = 0;
  std::int64_t total_macs = 0;
  std::size_t fp16_bytes = 0;  // exact model file size
  std::size_t fp32_bytes = 0;

  double fp16_mb() const noexcept { return static_cast<double>(fp16_bytes) / 1e6; }
};

/// Counts parameters (weights + biases) and MACs per layer for one input image.
/// Bias additions, activations, pooling and post-processing cost nothing.
AuditReport audit(const ArchSpec& spec);

struct AuditReference {
  double params = 1.13e6;
  double macs = 571.09e6;
  double fp16_mb = 2.3;
};

struct AuditTolerance {
  double params = 0.06;
  double macs = 0.10;
  double fp16_mb = 0.06;
};

struct MetricDeviation {
  std::string metric;
  double measured = 0.0;
  double reference = 0.0;
  double relative_deviation = 0.0;  // (measured - reference) / reference
  double tolerance = 0.0;
  bool pass = false;
};

struct AuditComparison {
  std::vector<MetricDeviation> metrics;
  bool pass = false;
};

AuditComparison compare(const AuditReport& report, const AuditReference& reference = {},
                        const AuditTolerance& tolerance = {});

/// Aligned per-layer table (layer, params, MACs, output shape) followed by totals.
std::string format_audit_table(const AuditReport& report);
/// `key: value` lines with totals and per-metric deviations.
std::string format_audit_summary(const AuditReport& report, const AuditComparison& comparison);

}  // namespace tinyssd
