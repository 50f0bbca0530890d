#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "coarsehash/descriptor.hpp"

namespace coarsehash {

/// Principal-component projection D -> d.
///
/// `components` is d x D row-major with orthonormal rows ordered by
/// non-increasing variance. Each row's largest-magnitude entry is positive.
struct PcaModel {
  std::size_t input_dims = 0;   // D
  std::size_t output_dims = 0;  // d
  std::vector<double> mean;
  std::vector<double> components;
  std::vector<double> variances;
  std::size_t trained_on = 0;

  std::span<const double> component(std::size_t k) const {
    return {components.data() + k * input_dims, input_dims};
  }

  /// components * (x - mean), written to out (length d).
  void project_row(std::span<const float> x, std::span<double> out) const;

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

/// max(1024, 4 d)
std::size_t default_pca_batch(std::size_t d);

/// Streams `data` in mini-batches of `batch` rows, merging batch means and
/// scatter matrices exactly, then eigendecomposes the pooled covariance.
/// batch == 0 selects default_pca_batch(d).
///
/// Throws InvalidArgument if d is 0 or exceeds min(N, D) or batch < d, and
/// DegenerateInput (naming the achievable rank) when the data spans fewer
/// than d directions.
PcaModel fit_incremental(const DescriptorMatrix& data, std::size_t d, std::size_t batch = 0);

/// Row-wise projection; output is N x d.
DescriptorMatrix project(const PcaModel& model, const DescriptorMatrix& m);

/// Binary payload (mean, components, variances as float64) plus JSON header
/// {D, d, trained_on}: `<stem>.bin` and `<stem>.json`.
void save_pca(const PcaModel& model, const std::filesystem::path& stem);
PcaModel load_pca(const std::filesystem::path& stem);

}  // namespace coarsehash
