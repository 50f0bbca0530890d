#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coarsehash {

/// Row-major N x D matrix of 32-bit descriptors, one row per place.
///
/// Construction rejects empty shapes and non-finite values. Metadata travels
/// with the matrix into its JSON sidecar.
class DescriptorMatrix {
 public:
  DescriptorMatrix(std::size_t rows, std::size_t dims, std::vector<float> data,
                   std::string source_tag = {});

  /// rows x dims of zeros; callers fill it through mutable_row().
  static DescriptorMatrix zeros(std::size_t rows, std::size_t dims, std::string source_tag = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dims() const noexcept { return dims_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dims_, dims_};
  }
  std::span<float> mutable_row(std::size_t i) { return {data_.data() + i * dims_, dims_}; }

  float operator()(std::size_t i, std::size_t j) const { return data_[i * dims_ + j]; }
  float& operator()(std::size_t i, std::size_t j) { return data_[i * dims_ + j]; }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> mutable_values() noexcept { return data_; }

  /// Copy of rows [begin, end).
  DescriptorMatrix slice_rows(std::size_t begin, std::size_t end) const;

  /// Throws InvalidArgument if any value is NaN or infinite.
  void check_finite() const;

  std::string source_tag;
  /// First row of the second part when this matrix is a concatenation.
  std::optional<std::size_t> boundary_index;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const DescriptorMatrix&, const DescriptorMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t dims_;
  std::vector<float> data_;
};

/// Per-column sample mean.
std::vector<double> column_means(const DescriptorMatrix& m);
/// Per-column sample standard deviation (n - 1 denominator; 0 for one row).
std::vector<double> column_stds(const DescriptorMatrix& m);

/// Writes `<stem>.desc` (little-endian float32, row-major) and `<stem>.json`
/// ({rows, dims, source_tag, boundary_index, seed}).
void save_descriptors(const DescriptorMatrix& m, const std::filesystem::path& stem);

/// Reads a matrix written by save_descriptors. `path` may be the stem or
/// either of the two files.
DescriptorMatrix load_descriptors(const std::filesystem::path& path);

}  // namespace coarsehash
