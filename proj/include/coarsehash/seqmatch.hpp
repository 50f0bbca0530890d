#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "coarsehash/hashindex.hpp"
#include "coarsehash/quantizer.hpp"

namespace coarsehash {

/// Center-gap table |c_j,a - c_j,b| for every dimension j and bin pair (a, b).
///
/// Gaps are held as integer multiples of a power-of-two unit chosen so that
/// one full-vector distance stays below 2^40 units. Sequence scores are sums of
/// these integers, so every summation order gives the same total.
class SdcTable {
 public:
  explicit SdcTable(const Quantizer& qz);

  std::size_t dims() const noexcept { return dims_; }
  std::size_t k() const noexcept { return k_; }
  /// Real value of one score unit (a power of two).
  double unit() const noexcept { return unit_; }

  std::int64_t gap_units(std::size_t dim, std::uint32_t a, std::uint32_t b) const {
    return gaps_[(dim * k_ + a) * k_ + b];
  }
  std::int64_t distance_units(std::span<const std::uint32_t> qa,
                              std::span<const std::uint32_t> qb) const;
  double to_real(std::int64_t units) const { return static_cast<double>(units) * unit_; }
  /// Fixed-point encoding of a non-negative real gap.
  std::int64_t to_units(double gap) const;

 private:
  std::size_t dims_;
  std::size_t k_;
  double unit_;
  std::vector<std::int64_t> gaps_;
};

/// Symmetric distance between two quantization vectors: sum of center gaps.
double sdc_distance(const Quantizer& qz, std::span<const std::uint32_t> qa,
                    std::span<const std::uint32_t> qb);

struct SequenceMatch {
  RefIndex best = 0;
  double score = 0.0;
  std::int64_t score_units = 0;
  /// Unique reference candidates considered (N_r).
  std::size_t candidates_probed = 0;
  /// The window's centre frame landed on an unoccupied address.
  bool center_fallback = false;

  friend bool operator==(const SequenceMatch&, const SequenceMatch&) = default;
};

/// Offset of the centre frame inside an L-frame window: floor(L / 2).
constexpr std::size_t window_center(std::size_t length) { return length / 2; }

/// Batch sequence search over an immutable index.
///
/// A window of L quantized query frames is centred on frame floor(L/2).
/// Candidates are the union of the buckets the frames resolve to; candidate i
/// is scored by pairing reference i + l with the frame at offset l
/// (reference offsets clamped to [0, N)). L = 1 returns the bucket's
/// precomputed single-best match instead.
class SequenceSearch {
 public:
  SequenceSearch(const InvertedIndex& idx, const Quantizer& qz);

  SequenceMatch match(std::span<const QuantVector> window) const;

  /// Sorted, de-duplicated union of the lookup lists of every frame.
  std::vector<RefIndex> candidates(std::span<const QuantVector> window) const;

  /// Distance between the stored vector of reference r and frame q.
  std::int64_t pair_units(RefIndex r, std::span<const std::uint32_t> q) const;

  const InvertedIndex& index() const noexcept { return *idx_; }
  const Quantizer& quantizer() const noexcept { return *qz_; }
  const SdcTable& table() const noexcept { return table_; }

 private:
  const InvertedIndex* idx_;
  const Quantizer* qz_;
  SdcTable table_;
  unsigned digit_bits_ = 0;  // log2 K when K is a power of two
};

/// match_sequence with an explicit length check: window.size() must equal L.
SequenceMatch match_sequence(const InvertedIndex& idx, const Quantizer& qz,
                             std::span<const QuantVector> window, std::size_t length);

/// Online form of SequenceSearch over a stream of query frames.
///
/// Scores are tracked per diagonal (reference index minus query time). When
/// the window slides, each tracked diagonal drops its oldest pair and adds one
/// new pair; only diagonals first needed in this window are scored from
/// scratch. Results equal SequenceSearch::match over the same L frames.
class SequenceMatcher {
 public:
  SequenceMatcher(const InvertedIndex& idx, const Quantizer& qz, std::size_t length);

  /// Adds a frame; returns a match once L frames have been seen.
  std::optional<SequenceMatch> push(std::span<const std::uint32_t> q);

  void reset();
  std::size_t length() const noexcept { return length_; }
  std::size_t frames_seen() const noexcept { return next_time_; }
  /// Reference/query pair distances evaluated so far.
  std::uint64_t pair_evaluations() const noexcept { return pair_evaluations_; }

 private:
  struct Frame {
    QuantVector q;
    std::int64_t time;
    LookupResult lookup;
  };

  std::int64_t pair(std::int64_t ref, std::span<const std::uint32_t> q);

  SequenceSearch search_;
  std::size_t length_;
  std::int64_t next_time_ = 0;
  std::deque<Frame> frames_;
  std::unordered_map<RefIndex, std::uint32_t> candidate_counts_;
  std::unordered_map<std::int64_t, std::int64_t> diagonal_units_;
  std::uint64_t pair_evaluations_ = 0;
};

}  // namespace coarsehash
