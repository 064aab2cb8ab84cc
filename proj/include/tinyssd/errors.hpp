#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tinyssd {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A convolution or pooling window produces a non-positive output extent.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// A named blob or layer is missing.
class LookupError : public Error {
 public:
  using Error::Error;
};

// An architecture or prior configuration violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Binary file content is malformed. Carries the byte offset where reading failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Text input (annotations, detection lines, image headers) is malformed.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace tinyssd
