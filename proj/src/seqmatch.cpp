#include "coarsehash/seqmatch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace coarsehash {

namespace {

constexpr int kUnitBits = 40;

}  // namespace

SdcTable::SdcTable(const Quantizer& qz) : dims_(qz.dims()), k_(qz.k()), unit_(1.0) {
  double max_distance = 0.0;
  for (std::size_t j = 0; j < dims_; ++j) {
    const auto c = qz.centers(j);
    max_distance += c.back() - c.front();
  }
  int exponent = 0;
  std::frexp(max_distance > 0.0 ? max_distance : 1.0, &exponent);
  unit_ = std::ldexp(1.0, exponent - kUnitBits);

  gaps_.resize(dims_ * k_ * k_);
  for (std::size_t j = 0; j < dims_; ++j) {
    for (std::uint32_t a = 0; a < k_; ++a) {
      for (std::uint32_t b = 0; b < k_; ++b) {
        gaps_[(j * k_ + a) * k_ + b] = to_units(std::abs(qz.center(j, a) - qz.center(j, b)));
      }
    }
  }
}

std::int64_t SdcTable::to_units(double gap) const { return std::llround(gap / unit_); }

std::int64_t SdcTable::distance_units(std::span<const std::uint32_t> qa,
                                      std::span<const std::uint32_t> qb) const {
  if (qa.size() != dims_ || qb.size() != dims_) {
    throw InvalidArgument("SDC operands must both have " + std::to_string(dims_) + " entries");
  }
  std::int64_t total = 0;
  for (std::size_t j = 0; j < dims_; ++j) {
    if (qa[j] >= k_ || qb[j] >= k_) throw InvalidArgument("quantization index not below K");
    total += gap_units(j, qa[j], qb[j]);
  }
  return total;
}

double sdc_distance(const Quantizer& qz, std::span<const std::uint32_t> qa,
                    std::span<const std::uint32_t> qb) {
  const SdcTable table(qz);
  return table.to_real(table.distance_units(qa, qb));
}

SequenceSearch::SequenceSearch(const InvertedIndex& idx, const Quantizer& qz)
    : idx_(&idx), qz_(&qz), table_(qz) {
  if (idx.k() != qz.k() || idx.dims() != qz.dims()) {
    throw InvalidArgument("index and quantizer disagree on K or d");
  }
  if (std::has_single_bit(qz.k())) digit_bits_ = static_cast<unsigned>(std::countr_zero(qz.k()));
}

std::int64_t SequenceSearch::pair_units(RefIndex r, std::span<const std::uint32_t> q) const {
  HashAddress h = idx_->address_of(r);
  const std::size_t d = table_.dims();
  std::int64_t total = 0;
  if (digit_bits_ > 0) {
    const HashAddress mask = (HashAddress{1} << digit_bits_) - 1;
    for (std::size_t j = d; j-- > 0;) {
      total += table_.gap_units(j, static_cast<std::uint32_t>(h & mask), q[j]);
      h >>= digit_bits_;
    }
  } else {
    const std::size_t k = table_.k();
    for (std::size_t j = d; j-- > 0;) {
      total += table_.gap_units(j, static_cast<std::uint32_t>(h % k), q[j]);
      h /= k;
    }
  }
  return total;
}

std::vector<RefIndex> SequenceSearch::candidates(std::span<const QuantVector> window) const {
  std::vector<RefIndex> out;
  for (const auto& q : window) {
    const auto lr = idx_->lookup(qz_->hash(q));
    out.insert(out.end(), lr.candidates.begin(), lr.candidates.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SequenceMatch SequenceSearch::match(std::span<const QuantVector> window) const {
  const std::size_t length = window.size();
  if (length == 0) throw InvalidArgument("sequence window is empty");
  for (const auto& q : window) {
    if (q.size() != qz_->dims()) throw InvalidArgument("window frame has wrong dimensionality");
  }
  const std::size_t center = window_center(length);
  SequenceMatch result;

  if (length == 1) {
    const auto lr = idx_->lookup(qz_->hash(window[0]));
    result.best = idx_->query_single(lr.resolved);
    result.score_units = pair_units(result.best, window[0]);
    result.score = table_.to_real(result.score_units);
    result.candidates_probed = lr.candidates.size();
    result.center_fallback = lr.fallback;
    return result;
  }

  const auto cands = candidates(window);
  result.center_fallback = idx_->lookup(qz_->hash(window[center])).fallback;
  result.candidates_probed = cands.size();

  const auto last = static_cast<std::int64_t>(idx_->ref_count()) - 1;
  bool first = true;
  for (const RefIndex i : cands) {
    std::int64_t units = 0;
    for (std::size_t p = 0; p < length; ++p) {
      const std::int64_t ref =
          std::clamp<std::int64_t>(static_cast<std::int64_t>(i) + static_cast<std::int64_t>(p) -
                                       static_cast<std::int64_t>(center),
                                   0, last);
      units += pair_units(static_cast<RefIndex>(ref), window[p]);
    }
    if (first || units < result.score_units) {
      result.score_units = units;
      result.best = i;
      first = false;
    }
  }
  result.score = table_.to_real(result.score_units);
  return result;
}

SequenceMatch match_sequence(const InvertedIndex& idx, const Quantizer& qz,
                             std::span<const QuantVector> window, std::size_t length) {
  if (window.empty()) throw InvalidArgument("sequence window is empty");
  if (window.size() != length) {
    throw InvalidArgument("window holds " + std::to_string(window.size()) + " frames, L is " +
                          std::to_string(length));
  }
  return SequenceSearch(idx, qz).match(window);
}

SequenceMatcher::SequenceMatcher(const InvertedIndex& idx, const Quantizer& qz, std::size_t length)
    : search_(idx, qz), length_(length) {
  if (length == 0) throw InvalidArgument("sequence length must be at least 1");
}

void SequenceMatcher::reset() {
  next_time_ = 0;
  frames_.clear();
  candidate_counts_.clear();
  diagonal_units_.clear();
  pair_evaluations_ = 0;
}

std::int64_t SequenceMatcher::pair(std::int64_t ref, std::span<const std::uint32_t> q) {
  const auto last = static_cast<std::int64_t>(search_.index().ref_count()) - 1;
  ++pair_evaluations_;
  return search_.pair_units(static_cast<RefIndex>(std::clamp<std::int64_t>(ref, 0, last)), q);
}

std::optional<SequenceMatch> SequenceMatcher::push(std::span<const std::uint32_t> q_in) {
  const auto& qz = search_.quantizer();
  const auto& idx = search_.index();
  if (q_in.size() != qz.dims()) throw InvalidArgument("frame has wrong dimensionality");

  Frame frame{QuantVector(q_in.begin(), q_in.end()), next_time_++, {}};
  frame.lookup = idx.lookup(qz.hash(frame.q));

  if (length_ == 1) {
    frames_.clear();
    SequenceMatch m;
    m.best = idx.query_single(frame.lookup.resolved);
    m.score_units = search_.pair_units(m.best, frame.q);
    ++pair_evaluations_;
    m.score = search_.table().to_real(m.score_units);
    m.candidates_probed = frame.lookup.candidates.size();
    m.center_fallback = frame.lookup.fallback;
    return m;
  }

  if (frames_.size() == length_) {
    const Frame& old = frames_.front();
    for (auto& [diag, units] : diagonal_units_) units -= pair(old.time + diag, old.q);
    for (const RefIndex r : old.lookup.candidates) {
      auto it = candidate_counts_.find(r);
      if (--it->second == 0) candidate_counts_.erase(it);
    }
    frames_.pop_front();
    for (auto& [diag, units] : diagonal_units_) units += pair(frame.time + diag, frame.q);
  }
  for (const RefIndex r : frame.lookup.candidates) ++candidate_counts_[r];
  frames_.push_back(std::move(frame));
  if (frames_.size() < length_) return std::nullopt;

  const std::int64_t center_time = frames_[window_center(length_)].time;
  std::unordered_map<std::int64_t, std::int64_t> needed;
  needed.reserve(candidate_counts_.size());
  SequenceMatch m;
  bool first = true;
  for (const auto& [ref, count] : candidate_counts_) {
    const std::int64_t diag = static_cast<std::int64_t>(ref) - center_time;
    std::int64_t units = 0;
    if (auto it = diagonal_units_.find(diag); it != diagonal_units_.end()) {
      units = it->second;
    } else {
      for (const Frame& f : frames_) units += pair(f.time + diag, f.q);
    }
    needed.emplace(diag, units);
    if (first || units < m.score_units || (units == m.score_units && ref < m.best)) {
      m.score_units = units;
      m.best = ref;
      first = false;
    }
  }
  diagonal_units_ = std::move(needed);
  m.score = search_.table().to_real(m.score_units);
  m.candidates_probed = candidate_counts_.size();
  m.center_fallback = frames_[window_center(length_)].lookup.fallback;
  return m;
}

}  // namespace coarsehash
