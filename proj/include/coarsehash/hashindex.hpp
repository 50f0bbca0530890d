#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "coarsehash/common.hpp"
#include "coarsehash/descriptor.hpp"
#include "coarsehash/quantizer.hpp"

namespace coarsehash {

struct LookupResult {
  HashAddress resolved = 0;
  std::span<const RefIndex> candidates;
  /// True when the queried address was unoccupied and a neighbour was used.
  bool fallback = false;
  /// Comparisons spent searching the occupied-address array.
  std::size_t comparisons = 0;
};

/// Inverted index from hash address to the references stored there.
///
/// Buckets are kept in CSR form: `occupied()` is the sorted key array and
/// bucket k spans entries [offsets[k], offsets[k+1]). Every reference index in
/// [0, N) appears in exactly one bucket, and buckets list their members in
/// ascending order.
class InvertedIndex {
 public:
  /// Quantizes and hashes every row of `refs_projected`. The single-best
  /// member of each bucket minimises quantization error (lowest index on ties).
  static InvertedIndex build(const DescriptorMatrix& refs_projected, const Quantizer& qz);

  std::size_t ref_count() const noexcept { return ref_address_.size(); }
  std::size_t occupied_count() const noexcept { return occupied_.size(); }
  std::size_t k() const noexcept { return k_; }
  std::size_t dims() const noexcept { return dims_; }

  std::span<const HashAddress> occupied() const noexcept { return occupied_; }
  std::span<const RefIndex> bucket_at(std::size_t slot) const {
    return {entries_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }
  RefIndex single_best_at(std::size_t slot) const { return single_best_[slot]; }

  /// Address reference i was stored under.
  HashAddress address_of(RefIndex i) const { return ref_address_[i]; }
  std::span<const HashAddress> ref_addresses() const noexcept { return ref_address_; }

  /// Exact bucket when occupied, else the numerically nearest occupied
  /// address (lower address on ties). O(log H_o).
  LookupResult lookup(HashAddress h) const;

  /// Precomputed best match of the resolved bucket.
  RefIndex query_single(HashAddress h) const;

  std::vector<std::uint8_t> save() const;
  static InvertedIndex load(std::span<const std::uint8_t> bytes);

  void save_file(const std::filesystem::path& path) const;
  static InvertedIndex load_file(const std::filesystem::path& path);

  /// Size in bytes of the serialised bucket section (address, length, members).
  std::uint64_t p1_section_bytes() const;

  friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;

 private:
  InvertedIndex() = default;
  std::size_t resolve_slot(HashAddress h, LookupResult& out) const;
  void derive_ref_addresses();
  void check_invariants(std::size_t offset_hint) const;

  std::size_t k_ = 0;
  std::size_t dims_ = 0;
  std::uint64_t address_space_ = 0;
  std::vector<HashAddress> occupied_;
  std::vector<std::uint64_t> offsets_;
  std::vector<RefIndex> entries_;
  std::vector<RefIndex> single_best_;
  std::vector<HashAddress> ref_address_;
};

}  // namespace coarsehash
