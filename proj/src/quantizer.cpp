#include "coarsehash/quantizer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <nlohmann/json.hpp>

#include "bytes.hpp"
#include "coarsehash/rng.hpp"

namespace coarsehash {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t checked_address_space(std::size_t k, std::size_t dims) {
  if (k < 2) throw InvalidArgument("K must be at least 2");
  if (dims == 0) throw InvalidArgument("d must be at least 1");
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 63;
  std::uint64_t space = 1;
  for (std::size_t j = 0; j < dims; ++j) {
    if (space > kLimit / k) {
      throw InvalidArgument("address space K^d = " + std::to_string(k) + "^" +
                            std::to_string(dims) + " exceeds 2^63");
    }
    space *= k;
  }
  return space;
}

Quantizer::Quantizer(std::size_t dims, std::size_t k, std::vector<double> centers)
    : dims_(dims), k_(k), centers_(std::move(centers)), address_space_(checked_address_space(k, dims)) {
  if (centers_.size() != dims_ * k_) throw InvalidArgument("center matrix must be d x K");
  for (std::size_t j = 0; j < dims_; ++j) {
    for (std::size_t b = 0; b < k_; ++b) {
      if (!std::isfinite(centers_[j * k_ + b])) throw InvalidArgument("non-finite center");
      if (b > 0 && !(centers_[j * k_ + b] > centers_[j * k_ + b - 1])) {
        throw InvalidArgument("centers of dimension " + std::to_string(j) +
                              " are not strictly increasing");
      }
    }
  }
}

HashAddress Quantizer::hash(std::span<const std::uint32_t> q) const {
  if (q.size() != dims_) {
    throw InvalidArgument("quantization vector has " + std::to_string(q.size()) +
                          " entries, expected " + std::to_string(dims_));
  }
  HashAddress h = 0;
  for (std::size_t j = 0; j < dims_; ++j) {
    if (q[j] >= k_) {
      throw InvalidArgument("quantization index " + std::to_string(q[j]) + " at dim " +
                            std::to_string(j) + " is not below K=" + std::to_string(k_));
    }
    h = h * k_ + q[j];
  }
  return h;
}

void Quantizer::unhash_into(HashAddress h, std::span<std::uint32_t> out) const {
  if (h >= address_space_) {
    throw InvalidArgument("hash address " + std::to_string(h) + " outside [0, " +
                          std::to_string(address_space_) + ")");
  }
  if (out.size() != dims_) throw InvalidArgument("unhash output has wrong length");
  for (std::size_t j = dims_; j-- > 0;) {
    out[j] = static_cast<std::uint32_t>(h % k_);
    h /= k_;
  }
}

QuantVector Quantizer::unhash(HashAddress h) const {
  QuantVector q(dims_);
  unhash_into(h, std::span<std::uint32_t>(q));
  return q;
}

namespace {

// Globally optimal 2-means of a sorted column: scan every boundary between
// distinct values and keep the one with the smallest within-cluster sum of
// squares (first boundary on ties). Sums are taken about the column mean.
std::vector<double> two_means_1d(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  double mean = 0.0;
  for (double x : sorted) mean += x;
  mean /= static_cast<double>(n);
  double total = 0.0, total_sq = 0.0;
  for (double x : sorted) {
    total += x - mean;
    total_sq += (x - mean) * (x - mean);
  }
  double left = 0.0, left_sq = 0.0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t best_split = 0;
  double best_left = 0.0;
  for (std::size_t s = 1; s < n; ++s) {
    const double x = sorted[s - 1] - mean;
    left += x;
    left_sq += x * x;
    if (sorted[s] == sorted[s - 1]) continue;
    const double nl = static_cast<double>(s), nr = static_cast<double>(n - s);
    const double right = total - left;
    const double cost = (left_sq - left * left / nl) + ((total_sq - left_sq) - right * right / nr);
    if (cost < best_cost) {
      best_cost = cost;
      best_split = s;
      best_left = left;
    }
  }
  const double nl = static_cast<double>(best_split), nr = static_cast<double>(n - best_split);
  return {mean + best_left / nl, mean + (total - best_left) / nr};
}

// Lloyd iterations on one sorted column. Points exactly on a midpoint go to
// the lower cluster, mirroring the lower-index tie rule of quantize().
std::vector<double> kmeans_1d(std::span<const double> sorted, std::size_t k,
                              const QuantizerFitOptions& opts) {
  const std::size_t n = sorted.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sorted[i];

  std::vector<double> centers(k);
  for (std::size_t b = 0; b < k; ++b) {
    const double q = (static_cast<double>(b) + 0.5) / static_cast<double>(k);
    const auto pos = std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)));
    centers[b] = sorted[pos];
  }
  // Heavy ties can collapse quantiles; spread over distinct values instead.
  if (std::adjacent_find(centers.begin(), centers.end(),
                         [](double a, double b) { return !(b > a); }) != centers.end()) {
    std::vector<double> distinct;
    std::unique_copy(sorted.begin(), sorted.end(), std::back_inserter(distinct));
    for (std::size_t b = 0; b < k; ++b) {
      const double q = (static_cast<double>(b) + 0.5) / static_cast<double>(k);
      centers[b] = distinct[std::min(distinct.size() - 1,
                                     static_cast<std::size_t>(q * static_cast<double>(distinct.size())))];
    }
  }

  std::vector<std::size_t> split(k + 1);
  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    split[0] = 0;
    split[k] = n;
    for (std::size_t b = 0; b + 1 < k; ++b) {
      const double mid = 0.5 * (centers[b] + centers[b + 1]);
      split[b + 1] = static_cast<std::size_t>(
          std::upper_bound(sorted.begin(), sorted.end(), mid) - sorted.begin());
    }
    double moved = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      const std::size_t lo = split[b], hi = split[b + 1];
      if (hi <= lo) continue;
      const double next = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
      moved = std::max(moved, std::abs(next - centers[b]));
      centers[b] = next;
    }
    if (moved < opts.tolerance) break;
  }
  return centers;
}

}  // namespace

Quantizer fit_quantizer(const DescriptorMatrix& refs, std::size_t k, std::uint64_t seed,
                        const QuantizerFitOptions& opts) {
  const std::size_t dims = refs.dims();
  checked_address_space(k, dims);
  if (k > refs.rows()) {
    throw InvalidArgument("K=" + std::to_string(k) + " exceeds the " +
                          std::to_string(refs.rows()) + " training rows");
  }

  std::vector<std::size_t> rows(refs.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (opts.max_samples > 0 && opts.max_samples < rows.size()) {
    Rng rng(seed);
    for (std::size_t i = 0; i < opts.max_samples; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (rows.size() - i));
      std::swap(rows[i], rows[j]);
    }
    rows.resize(opts.max_samples);
    std::sort(rows.begin(), rows.end());
  }

  std::vector<double> centers(dims * k);
  std::vector<double> column(rows.size());
  for (std::size_t j = 0; j < dims; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = refs(rows[i], j);
    std::sort(column.begin(), column.end());
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < column.size() && distinct < k; ++i) {
      if (column[i] != column[i - 1]) ++distinct;
    }
    if (distinct < k) {
      throw DegenerateInput("dimension " + std::to_string(j) + " has fewer than K=" +
                            std::to_string(k) + " distinct values");
    }
    const auto c = k == 2 ? two_means_1d(column) : kmeans_1d(column, k, opts);
    for (std::size_t b = 0; b < k; ++b) {
      if (b > 0 && !(c[b] > c[b - 1])) {
        throw DegenerateInput("dimension " + std::to_string(j) +
                              " collapsed to coincident cluster centers");
      }
      centers[j * k + b] = c[b];
    }
  }
  return Quantizer(dims, k, std::move(centers));
}

namespace {

constexpr char kQuantMagic[] = "CHQNT001";

fs::path suffixed(const fs::path& stem, const char* s) { return fs::path(stem.string() + s); }

}  // namespace

void save_quantizer(const Quantizer& qz, const fs::path& stem) {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kQuantMagic, 8));
  w.put_span(qz.all_centers());
  const auto bytes = w.take();
  detail::write_file(suffixed(stem, ".bin"), bytes);
  const json header = {{"K", qz.k()}, {"d", qz.dims()}};
  detail::write_text(suffixed(stem, ".json"), header.dump(2) + "\n");
}

Quantizer load_quantizer(const fs::path& stem) {
  json header;
  try {
    header = json::parse(detail::read_text(suffixed(stem, ".json")));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed quantizer header: ") + e.what(), e.byte);
  }
  std::size_t k = 0, d = 0;
  try {
    k = header.at("K").get<std::size_t>();
    d = header.at("d").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("quantizer header: ") + e.what(), 0);
  }
  const auto bytes = detail::read_file(suffixed(stem, ".bin"));
  detail::ByteReader r(bytes);
  if (r.get_string(8, "quantizer magic") != std::string_view(kQuantMagic, 8)) {
    throw FormatError("not a quantizer file", 0);
  }
  std::vector<double> centers(k * d);
  r.get_into(std::span<double>(centers), "quantizer centers");
  if (r.remaining() != 0) throw FormatError("trailing bytes after quantizer", r.position());
  return Quantizer(d, k, std::move(centers));
}

}  // namespace coarsehash
