#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace tinyssd {

struct Blob {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;

  friend bool operator==(const Blob&, const Blob&) = default;
};

/// Named full-precision parameter blobs, kept in insertion (layer) order.
class WeightStore {
 public:
  /// Appends a blob. Throws ConfigError on a duplicate name or a data/shape length mismatch.
  void add(std::string name, std::vector<int> shape, std::vector<float> data);

  const Blob* find(const std::string& name) const;
  /// Throws LookupError when the blob is absent.
  const Blob& at(const std::string& name) const;
  std::span<const float> values(const std::string& name) const { return at(name).data; }

  const std::vector<Blob>& blobs() const noexcept { return blobs_; }
  std::vector<Blob>& mutable_blobs() noexcept { return blobs_; }
  std::size_t size() const noexcept { return blobs_.size(); }
  std::size_t element_count() const;

  friend bool operator==(const WeightStore& a, const WeightStore& b) { return a.blobs_ == b.blobs_; }

 private:
  std::vector<Blob> blobs_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace tinyssd
