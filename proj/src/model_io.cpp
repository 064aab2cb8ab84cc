#include "tinyssd/model_io.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "byteio.hpp"
#include "tinyssd/errors.hpp"
#include "tinyssd/fp16.hpp"

namespace tinyssd {

namespace {

constexpr std::string_view kModelMagic = "TSSD";
constexpr std::uint32_t kMaxBlobs = 1u << 20;
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;

std::size_t dtype_size(DType dtype) { return dtype == DType::f16 ? 2 : 4; }

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

}  // namespace

const char* to_string(DType dtype) { return dtype == DType::f16 ? "f16" : "f32"; }

DType parse_dtype(const std::string& text) {
  if (text == "f16") return DType::f16;
  if (text == "f32") return DType::f32;
  throw ConfigError("unknown dtype '" + text + "' (expected f16 or f32)");
}

void WeightStore::add(std::string name, std::vector<int> shape, std::vector<float> data) {
  std::size_t count = 1;
  for (int extent : shape) {
    if (extent < 1) throw ConfigError(name + ": blob extents must be >= 1");
    count *= static_cast<std::size_t>(extent);
  }
  if (count != data.size()) {
    throw ConfigError(name + ": " + std::to_string(data.size()) + " values for shape " + shape_string(shape));
  }
  if (!index_.emplace(name, blobs_.size()).second) throw ConfigError("duplicate blob '" + name + "'");
  blobs_.push_back({std::move(name), std::move(shape), std::move(data)});
}

const Blob* WeightStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &blobs_[it->second];
}

const Blob& WeightStore::at(const std::string& name) const {
  if (const Blob* blob = find(name)) return *blob;
  throw LookupError("missing weight blob '" + name + "'");
}

std::size_t WeightStore::element_count() const {
  std::size_t total = 0;
  for (const Blob& b : blobs_) total += b.data.size();
  return total;
}

WeightStore quantize_fp16(const WeightStore& store, QuantizeStats* stats) {
  WeightStore out = store;
  QuantizeStats local;
  double error_sum = 0.0;
  for (Blob& blob : out.mutable_blobs()) {
    for (float& v : blob.data) {
      const float original = v;
      if (std::fabs(original) > kHalfMax) ++local.clamped;
      v = round_to_half(original);
      const double err = std::fabs(static_cast<double>(v) - original);
      local.max_abs_error = std::max(local.max_abs_error, err);
      error_sum += err;
      ++local.values;
    }
  }
  local.mean_abs_error = local.values ? error_sum / static_cast<double>(local.values) : 0.0;
  if (stats) *stats = local;
  return out;
}

std::vector<std::uint8_t> serialize_model(const WeightStore& store, DType dtype) {
  std::vector<std::uint8_t> buf;
  buf.reserve(12 + store.element_count() * dtype_size(dtype) + store.size() * 64);
  detail::put_bytes(buf, kModelMagic);
  detail::put_u32(buf, kModelFormatVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(store.size()));
  for (const Blob& blob : store.blobs()) {
    detail::put_u32(buf, static_cast<std::uint32_t>(blob.name.size()));
    detail::put_bytes(buf, blob.name);
    detail::put_u8(buf, static_cast<std::uint8_t>(dtype));
    detail::put_u32(buf, static_cast<std::uint32_t>(blob.shape.size()));
    for (int extent : blob.shape) detail::put_u32(buf, static_cast<std::uint32_t>(extent));
    if (dtype == DType::f16) {
      for (float v : blob.data) detail::put_u16(buf, float_to_half(v));
    } else {
      for (float v : blob.data) detail::put_f32(buf, v);
    }
  }
  return buf;
}

WeightStore deserialize_model(std::vector<std::uint8_t> bytes, const std::vector<BlobSpec>* manifest) {
  detail::ByteReader in(std::move(bytes));
  if (in.bytes(4, "magic") != kModelMagic) throw FormatError("bad model magic, expected TSSD", 0);
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version), version_at);
  }
  const std::size_t count_at = in.offset();
  const std::uint32_t count = in.u32("blob count");
  if (count > kMaxBlobs) throw FormatError("implausible blob count " + std::to_string(count), count_at);

  WeightStore store;
  std::set<std::string> seen;
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::size_t record_at = in.offset();
    const std::uint32_t name_length = in.u32("blob name length");
    if (name_length == 0 || name_length > kMaxNameLength) {
      throw FormatError("invalid blob name length " + std::to_string(name_length), record_at);
    }
    std::string name = in.bytes(name_length, "blob name");
    if (!seen.insert(name).second) throw FormatError("duplicate blob '" + name + "'", record_at);

    const std::size_t dtype_at = in.offset();
    const std::uint8_t tag = in.u8("dtype tag");
    if (tag > 1) throw FormatError(name + ": unknown dtype tag " + std::to_string(tag), dtype_at);
    const auto dtype = static_cast<DType>(tag);

    const std::size_t rank_at = in.offset();
    const std::uint32_t rank = in.u32("rank");
    if (rank > kMaxRank) throw FormatError(name + ": implausible rank " + std::to_string(rank), rank_at);
    std::vector<int> shape(rank);
    std::size_t elements = 1;
    for (auto& extent : shape) {
      const std::size_t extent_at = in.offset();
      const std::uint32_t v = in.u32("extent");
      if (v == 0 || v > (1u << 28)) throw FormatError(name + ": invalid extent " + std::to_string(v), extent_at);
      extent = static_cast<int>(v);
      elements *= v;
      if (elements > (std::size_t{1} << 32)) throw FormatError(name + ": blob too large", extent_at);
    }

    in.require(elements * dtype_size(dtype), name + " payload");
    std::vector<float> data(elements);
    if (dtype == DType::f16) {
      for (auto& v : data) v = half_to_float(in.u16("payload"));
    } else {
      for (auto& v : data) v = in.f32("payload");
    }
    store.add(std::move(name), std::move(shape), std::move(data));
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after last blob", in.offset());
  if (manifest) check_against_manifest(store, *manifest);
  return store;
}

void save_model(const WeightStore& store, const std::filesystem::path& path, DType dtype) {
  detail::write_file_bytes(path, serialize_model(store, dtype));
}

WeightStore load_model(const std::filesystem::path& path) {
  return deserialize_model(detail::read_file_bytes(path));
}

WeightStore load_model(const std::filesystem::path& path, const std::vector<BlobSpec>& manifest) {
  return deserialize_model(detail::read_file_bytes(path), &manifest);
}

std::size_t model_file_size(const std::vector<BlobSpec>& manifest, DType dtype) {
  std::size_t size = kModelMagic.size() + 4 + 4;
  for (const BlobSpec& blob : manifest) {
    size += 4 + blob.name.size() + 1 + 4 + 4 * blob.shape.size() + blob.element_count() * dtype_size(dtype);
  }
  return size;
}

void check_against_manifest(const WeightStore& store, const std::vector<BlobSpec>& manifest) {
  for (const BlobSpec& expected : manifest) {
    const Blob& blob = store.at(expected.name);
    if (blob.shape != expected.shape) {
      throw ShapeError(expected.name + ": shape " + shape_string(blob.shape) + " does not match expected " +
                       shape_string(expected.shape));
    }
  }
  if (store.size() != manifest.size()) {
    for (const Blob& blob : store.blobs()) {
      bool known = false;
      for (const BlobSpec& expected : manifest) known = known || expected.name == blob.name;
      if (!known) throw LookupError("unexpected weight blob '" + blob.name + "'");
    }
  }
}

WeightStore init_random(const ArchSpec& spec, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  // 53-bit uniform in (0, 1]; std::*_distribution output is implementation-defined.
  auto uniform = [&engine] { return (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53; };

  WeightStore store;
  for (const BlobSpec& blob : parameter_manifest(spec)) {
    std::vector<float> data(blob.element_count(), 0.0f);
    const bool is_bias = blob.shape.size() == 1;
    if (!is_bias) {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < blob.shape.size(); ++i) fan_in *= static_cast<std::size_t>(blob.shape[i]);
      const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < data.size(); i += 2) {
        // Box-Muller, two normals per draw.
        const double radius = std::sqrt(-2.0 * std::log(uniform()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        data[i] = static_cast<float>(scale * radius * std::cos(angle));
        if (i + 1 < data.size()) data[i + 1] = static_cast<float>(scale * radius * std::sin(angle));
      }
    }
    store.add(blob.name, blob.shape, std::move(data));
  }
  return store;
}

}  // namespace tinyssd
