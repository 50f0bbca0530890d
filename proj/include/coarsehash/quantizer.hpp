#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "coarsehash/common.hpp"
#include "coarsehash/descriptor.hpp"

namespace coarsehash {

/// Per-dimension bin indices, each in [0, K). Index 0 is the lowest center.
using QuantVector = std::vector<std::uint32_t>;

struct QuantizerFitOptions {
  /// Train on a seeded random subsample of this many rows; 0 uses every row.
  std::size_t max_samples = 0;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

/// Scalar quantizer with K sorted centers per dimension and the base-K
/// address mapping built on top of it.
class Quantizer {
 public:
  /// centers is d x K row-major; every row must be strictly increasing.
  Quantizer(std::size_t dims, std::size_t k, std::vector<double> centers);

  std::size_t dims() const noexcept { return dims_; }
  std::size_t k() const noexcept { return k_; }
  /// K^d
  std::uint64_t address_space() const noexcept { return address_space_; }

  std::span<const double> centers(std::size_t dim) const {
    return {centers_.data() + dim * k_, k_};
  }
  double center(std::size_t dim, std::uint32_t bin) const { return centers_[dim * k_ + bin]; }
  std::span<const double> all_centers() const noexcept { return centers_; }

  /// Nearest center per dimension, ties to the lower index.
  template <typename T>
  QuantVector quantize(std::span<const T> v) const;
  template <typename T>
  void quantize_into(std::span<const T> v, std::span<std::uint32_t> out) const;

  /// sum_j K^(d-1-j) q_j, dimension 0 most significant.
  HashAddress hash(std::span<const std::uint32_t> q) const;
  QuantVector unhash(HashAddress h) const;
  void unhash_into(HashAddress h, std::span<std::uint32_t> out) const;

  /// sum_j min_k |v_j - c_jk|
  template <typename T>
  double quantization_error(std::span<const T> v) const;

  friend bool operator==(const Quantizer&, const Quantizer&) = default;

 private:
  template <typename T>
  void check_length(std::span<const T> v) const;
  std::uint32_t nearest(std::size_t dim, double x) const;

  std::size_t dims_;
  std::size_t k_;
  std::vector<double> centers_;
  std::uint64_t address_space_;
};

/// 1-D K-means per column of `refs`. K = 2 is solved exactly by scanning every
/// split of the sorted column; larger K runs quantile-initialised Lloyd
/// iterations until no center moves by more than the tolerance.
///
/// Throws DegenerateInput naming the dimension when a column has fewer than K
/// distinct values, and InvalidArgument for K < 2, K > N or K^d > 2^63.
Quantizer fit_quantizer(const DescriptorMatrix& refs, std::size_t k, std::uint64_t seed,
                        const QuantizerFitOptions& opts = {});

/// K^d, or throws InvalidArgument when it exceeds 2^63.
std::uint64_t checked_address_space(std::size_t k, std::size_t dims);

/// `<stem>.bin` (float64 centers) and `<stem>.json` ({K, d}).
void save_quantizer(const Quantizer& qz, const std::filesystem::path& stem);
Quantizer load_quantizer(const std::filesystem::path& stem);

// ---------------------------------------------------------------------------

template <typename T>
void Quantizer::check_length(std::span<const T> v) const {
  if (v.size() != dims_) {
    throw InvalidArgument("vector has " + std::to_string(v.size()) + " entries, quantizer has " +
                          std::to_string(dims_) + " dims");
  }
}

inline std::uint32_t Quantizer::nearest(std::size_t dim, double x) const {
  const double* c = centers_.data() + dim * k_;
  std::uint32_t best = 0;
  double best_dist = std::abs(x - c[0]);
  for (std::uint32_t b = 1; b < k_; ++b) {
    const double dist = std::abs(x - c[b]);
    if (dist < best_dist) {
      best_dist = dist;
      best = b;
    }
  }
  return best;
}

template <typename T>
void Quantizer::quantize_into(std::span<const T> v, std::span<std::uint32_t> out) const {
  check_length(v);
  if (out.size() != dims_) throw InvalidArgument("quantize output has wrong length");
  for (std::size_t j = 0; j < dims_; ++j) out[j] = nearest(j, static_cast<double>(v[j]));
}

template <typename T>
QuantVector Quantizer::quantize(std::span<const T> v) const {
  QuantVector q(dims_);
  quantize_into(v, std::span<std::uint32_t>(q));
  return q;
}

template <typename T>
double Quantizer::quantization_error(std::span<const T> v) const {
  check_length(v);
  double err = 0.0;
  for (std::size_t j = 0; j < dims_; ++j) {
    const double x = static_cast<double>(v[j]);
    err += std::abs(x - center(j, nearest(j, x)));
  }
  return err;
}

}  // namespace coarsehash
