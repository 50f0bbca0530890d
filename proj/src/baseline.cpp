#include "coarsehash/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "coarsehash/seqmatch.hpp"

namespace coarsehash {

namespace {

double euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - b[j];
    s += diff * diff;
  }
  return std::sqrt(s);
}

}  // namespace

BaselineMatch baseline_match(const DescriptorMatrix& refs, const DescriptorMatrix& query_window,
                             std::size_t length, std::size_t cap) {
  if (length == 0 || query_window.rows() != length) {
    throw InvalidArgument("query window must hold exactly L >= 1 frames");
  }
  if (refs.dims() != query_window.dims()) {
    throw InvalidArgument("baseline references and queries differ in dimensionality");
  }
  if (cap == 0) throw InvalidArgument("candidate cap must be at least 1");
  const std::size_t n = refs.rows();
  const std::size_t center = window_center(length);
  const auto center_frame = query_window.row(center);

  struct Scored {
    double dist;
    RefIndex ref;
    bool operator<(const Scored& o) const { return dist != o.dist ? dist < o.dist : ref < o.ref; }
  };
  std::vector<Scored> scan(n);
  for (std::size_t i = 0; i < n; ++i) {
    scan[i] = {euclidean(refs.row(i), center_frame), static_cast<RefIndex>(i)};
  }
  const std::size_t keep = std::min(cap, n);
  std::partial_sort(scan.begin(), scan.begin() + static_cast<std::ptrdiff_t>(keep), scan.end());
  scan.resize(keep);
  std::sort(scan.begin(), scan.end(), [](const Scored& a, const Scored& b) { return a.ref < b.ref; });

  BaselineMatch out;
  out.candidates = keep;
  out.shortlist.reserve(keep);
  for (const auto& c : scan) out.shortlist.push_back(c.ref);
  out.retrieval_ops = 3ULL * refs.dims() * n;
  const auto last = static_cast<std::int64_t>(n) - 1;
  bool first = true;
  for (const auto& c : scan) {
    double score = 0.0;
    for (std::size_t p = 0; p < length; ++p) {
      const auto ref = std::clamp<std::int64_t>(
          static_cast<std::int64_t>(c.ref) + static_cast<std::int64_t>(p) -
              static_cast<std::int64_t>(center),
          0, last);
      score += euclidean(refs.row(static_cast<std::size_t>(ref)), query_window.row(p));
    }
    if (first || score < out.score) {
      out.score = score;
      out.best = c.ref;
      first = false;
    }
  }
  return out;
}

}  // namespace coarsehash
