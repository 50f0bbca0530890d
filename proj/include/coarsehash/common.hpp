#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace coarsehash {

/// Bad caller input: shape mismatches, out-of-range parameters, malformed configs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The data itself cannot support the requested model (zero variance, too few
/// distinct values, rank deficiency).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A persisted file is corrupt or truncated. `offset()` is the byte position at
/// which decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Filesystem failure (unwritable directory, missing file).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using RefIndex = std::uint32_t;
using HashAddress = std::uint64_t;

}  // namespace coarsehash
