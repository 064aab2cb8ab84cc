#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tinyssd/arch.hpp"
#include "tinyssd/weights.hpp"

namespace tinyssd {

enum class DType : std::uint8_t { f32 = 0, f16 = 1 };

const char* to_string(DType dtype);
DType parse_dtype(const std::string& text);

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct QuantizeStats {
  std::size_t values = 0;
  std::size_t clamped = 0;  // magnitudes above 65504
  double max_abs_error = 0.0;
  double mean_abs_error = 0.0;
};

/// Rounds every value through binary16 and back. Idempotent.
WeightStore quantize_fp16(const WeightStore& store, QuantizeStats* stats = nullptr);

// TSSD model file, all integers little-endian, no padding:
//   "TSSD" | u32 version | u32 blob_count
//   per blob: u32 name_len | name | u8 dtype (0 = f32, 1 = f16) | u32 rank | u32 extent[rank] | payload
std::vector<std::uint8_t> serialize_model(const WeightStore& store, DType dtype);
WeightStore deserialize_model(std::vector<std::uint8_t> bytes,
                              const std::vector<BlobSpec>* manifest = nullptr);

void save_model(const WeightStore& store, const std::filesystem::path& path, DType dtype);
WeightStore load_model(const std::filesystem::path& path);
/// Also checks blob names, order and shapes against `manifest`.
WeightStore load_model(const std::filesystem::path& path, const std::vector<BlobSpec>& manifest);

/// Exact byte size of a model file holding the given blobs.
std::size_t model_file_size(const std::vector<BlobSpec>& manifest, DType dtype);

/// Throws LookupError for a missing blob and ShapeError for a shape mismatch.
void check_against_manifest(const WeightStore& store, const std::vector<BlobSpec>& manifest);

/// Seeded He-normal weights (std = sqrt(2 / fan_in)) and zero biases, in manifest order.
/// Bit-identical across runs for a given seed.
WeightStore init_random(const ArchSpec& spec, std::uint64_t seed);

}  // namespace tinyssd
