#include "coarsehash/hashindex.hpp"

#include <algorithm>
#include <limits>
#include <nlohmann/json.hpp>

#include "bytes.hpp"

namespace coarsehash {

using nlohmann::json;

namespace {

constexpr char kIndexMagic[] = "CHIDX\0\0\1";
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

InvertedIndex InvertedIndex::build(const DescriptorMatrix& refs, const Quantizer& qz) {
  if (refs.dims() != qz.dims()) {
    throw InvalidArgument("references have " + std::to_string(refs.dims()) +
                          " dims, quantizer expects " + std::to_string(qz.dims()));
  }
  const std::size_t n = refs.rows();
  if (n > std::numeric_limits<RefIndex>::max()) {
    throw InvalidArgument("index supports at most 2^32 - 1 references");
  }

  struct Stored {
    HashAddress address;
    RefIndex ref;
  };
  std::vector<Stored> stored(n);
  std::vector<double> error(n);
  QuantVector q(qz.dims());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = refs.row(i);
    qz.quantize_into(row, std::span<std::uint32_t>(q));
    stored[i] = {qz.hash(q), static_cast<RefIndex>(i)};
    error[i] = qz.quantization_error(row);
  }
  std::sort(stored.begin(), stored.end(), [](const Stored& a, const Stored& b) {
    return a.address != b.address ? a.address < b.address : a.ref < b.ref;
  });

  InvertedIndex idx;
  idx.k_ = qz.k();
  idx.dims_ = qz.dims();
  idx.address_space_ = qz.address_space();
  idx.entries_.resize(n);
  idx.offsets_.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || stored[i].address != stored[i - 1].address) {
      if (i > 0) idx.offsets_.push_back(i);
      idx.occupied_.push_back(stored[i].address);
      idx.single_best_.push_back(stored[i].ref);
    } else if (error[stored[i].ref] < error[idx.single_best_.back()]) {
      idx.single_best_.back() = stored[i].ref;
    }
    idx.entries_[i] = stored[i].ref;
  }
  idx.offsets_.push_back(n);
  idx.derive_ref_addresses();
  return idx;
}

void InvertedIndex::derive_ref_addresses() {
  ref_address_.assign(entries_.size(), 0);
  for (std::size_t slot = 0; slot < occupied_.size(); ++slot) {
    for (RefIndex r : bucket_at(slot)) ref_address_[r] = occupied_[slot];
  }
}

std::size_t InvertedIndex::resolve_slot(HashAddress h, LookupResult& out) const {
  if (h >= address_space_) {
    throw InvalidArgument("hash address " + std::to_string(h) + " outside [0, " +
                          std::to_string(address_space_) + ")");
  }
  // Three-way binary search: one comparison per probe of the occupied array.
  std::size_t lo = 0, hi = occupied_.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    ++out.comparisons;
    const HashAddress probe = occupied_[mid];
    if (probe == h) return mid;
    if (probe < h) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  out.fallback = true;
  if (lo == 0) return 0;
  if (lo == occupied_.size()) return lo - 1;
  ++out.comparisons;
  const HashAddress below = h - occupied_[lo - 1];
  const HashAddress above = occupied_[lo] - h;
  return below <= above ? lo - 1 : lo;
}

LookupResult InvertedIndex::lookup(HashAddress h) const {
  LookupResult out;
  const std::size_t slot = resolve_slot(h, out);
  out.resolved = occupied_[slot];
  out.candidates = bucket_at(slot);
  return out;
}

RefIndex InvertedIndex::query_single(HashAddress h) const {
  LookupResult scratch;
  return single_best_[resolve_slot(h, scratch)];
}

std::uint64_t InvertedIndex::p1_section_bytes() const {
  return occupied_.size() * (sizeof(std::uint64_t) + sizeof(std::uint32_t)) +
         entries_.size() * sizeof(RefIndex);
}

std::vector<std::uint8_t> InvertedIndex::save() const {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kIndexMagic, 8));
  w.put<std::uint32_t>(kIndexVersion);
  const json header = {{"N_x", ref_count()}, {"K", k_}, {"d", dims_}, {"H_o", occupied_.size()}};
  const std::string text = header.dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.put_bytes(text);
  for (std::size_t slot = 0; slot < occupied_.size(); ++slot) {
    const auto bucket = bucket_at(slot);
    w.put<std::uint64_t>(occupied_[slot]);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(bucket.size()));
    w.put_span(bucket);
  }
  for (std::size_t slot = 0; slot < occupied_.size(); ++slot) {
    w.put<std::uint64_t>(occupied_[slot]);
    w.put<std::uint32_t>(single_best_[slot]);
  }
  return w.take();
}

InvertedIndex InvertedIndex::load(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.get_string(8, "index magic") != std::string_view(kIndexMagic, 8)) {
    throw FormatError("not an index file", 0);
  }
  const std::size_t version_at = r.position();
  if (r.get<std::uint32_t>("index version") != kIndexVersion) {
    throw FormatError("unsupported index version", version_at);
  }
  const auto header_len = r.get<std::uint32_t>("header length");
  const std::size_t header_at = r.position();
  json header;
  std::size_t n = 0, h_o = 0;
  InvertedIndex idx;
  try {
    header = json::parse(r.get_string(header_len, "index header"));
    n = header.at("N_x").get<std::size_t>();
    idx.k_ = header.at("K").get<std::size_t>();
    idx.dims_ = header.at("d").get<std::size_t>();
    h_o = header.at("H_o").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("index header: ") + e.what(), header_at);
  }
  try {
    idx.address_space_ = checked_address_space(idx.k_, idx.dims_);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), header_at);
  }
  if (n == 0 || h_o == 0 || h_o > n) throw FormatError("index header has inconsistent counts", header_at);

  // Bound allocations by what the payload can actually hold.
  if (r.remaining() < h_o * 24 + n * sizeof(RefIndex)) {
    r.require(h_o * 24 + n * sizeof(RefIndex), "index sections");
  }
  idx.occupied_.reserve(h_o);
  idx.offsets_.reserve(h_o + 1);
  idx.entries_.reserve(n);
  idx.offsets_.push_back(0);
  for (std::size_t slot = 0; slot < h_o; ++slot) {
    const std::size_t at = r.position();
    const auto address = r.get<std::uint64_t>("bucket address");
    const auto len = r.get<std::uint32_t>("bucket length");
    if (address >= idx.address_space_ || (slot > 0 && address <= idx.occupied_.back())) {
      throw FormatError("bucket addresses must be increasing and below K^d", at);
    }
    if (len == 0 || idx.entries_.size() + len > n) throw FormatError("bad bucket length", at + 8);
    const std::size_t old = idx.entries_.size();
    idx.entries_.resize(old + len);
    r.get_into(std::span<RefIndex>(idx.entries_.data() + old, len), "bucket members");
    idx.occupied_.push_back(address);
    idx.offsets_.push_back(idx.entries_.size());
  }
  if (idx.entries_.size() != n) throw FormatError("bucket members do not cover N_x", r.position());
  idx.single_best_.resize(h_o);
  for (std::size_t slot = 0; slot < h_o; ++slot) {
    const std::size_t at = r.position();
    const auto address = r.get<std::uint64_t>("single-best address");
    const auto best = r.get<std::uint32_t>("single-best index");
    if (address != idx.occupied_[slot]) throw FormatError("single-best address mismatch", at);
    idx.single_best_[slot] = best;
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after index", r.position());
  idx.check_invariants(header_at);
  idx.derive_ref_addresses();
  return idx;
}

void InvertedIndex::check_invariants(std::size_t offset_hint) const {
  const std::size_t n = entries_.size();
  std::vector<bool> seen(n, false);
  for (std::size_t slot = 0; slot < occupied_.size(); ++slot) {
    const auto bucket = bucket_at(slot);
    for (std::size_t k = 0; k < bucket.size(); ++k) {
      const RefIndex r = bucket[k];
      if (r >= n || seen[r]) throw FormatError("bucket members are not a partition of [0, N_x)", offset_hint);
      if (k > 0 && bucket[k] <= bucket[k - 1]) throw FormatError("bucket members not ascending", offset_hint);
      seen[r] = true;
    }
    if (!std::binary_search(bucket.begin(), bucket.end(), single_best_[slot])) {
      throw FormatError("single-best entry is not a member of its bucket", offset_hint);
    }
  }
}

void InvertedIndex::save_file(const std::filesystem::path& path) const {
  const auto bytes = save();
  detail::write_file(path, bytes);
}

InvertedIndex InvertedIndex::load_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return load(bytes);
}

}  // namespace coarsehash
