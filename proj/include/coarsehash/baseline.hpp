#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "coarsehash/common.hpp"
#include "coarsehash/descriptor.hpp"

namespace coarsehash {

struct BaselineMatch {
  RefIndex best = 0;
  double score = 0.0;
  std::size_t candidates = 0;
  /// Shortlisted references, ascending.
  std::vector<RefIndex> shortlist;
  /// Unitary operations spent on the linear candidate scan: 3 * d_b * N_x.
  std::uint64_t retrieval_ops = 0;
};

/// Sequence matcher over low-dimensional projected references with a linear
/// candidate scan.
///
/// The `cap` references nearest (Euclidean) to the window's centre frame are
/// shortlisted, then each is scored by the summed Euclidean distance of the
/// L frames along a constant-velocity diagonal with reference offsets clamped
/// to [0, N). Ties go to the lower reference index.
BaselineMatch baseline_match(const DescriptorMatrix& refs, const DescriptorMatrix& query_window,
                             std::size_t length, std::size_t cap);

/// Storage of the baseline's stored descriptors in bytes (float32).
inline std::uint64_t baseline_storage_bytes(std::size_t ref_count, std::size_t dims) {
  return static_cast<std::uint64_t>(ref_count) * dims * sizeof(float);
}

}  // namespace coarsehash
