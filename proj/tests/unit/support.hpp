#pragma once

// Independent reference implementations used as test oracles. None of these
// share code with the library beyond the public types.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <unistd.h>
#include <vector>

#include "coarsehash/common.hpp"
#include "coarsehash/descriptor.hpp"
#include "coarsehash/quantizer.hpp"
#include "coarsehash/hashindex.hpp"
#include "coarsehash/rng.hpp"
#include "coarsehash/seqmatch.hpp"

namespace testing {

using namespace coarsehash;

inline DescriptorMatrix random_matrix(std::size_t rows, std::size_t dims, std::uint64_t seed,
                                      double scale = 1.0) {
  Rng rng(seed);
  auto m = DescriptorMatrix::zeros(rows, dims, "random");
  for (auto& v : m.mutable_values()) v = static_cast<float>(scale * rng.normal());
  return m;
}

/// Unique scratch directory under the system temp path, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("coarsehash_test_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

/// Full-batch PCA: eigen-decomposition of the sample covariance via SVD of the
/// centred data. Rows of the result are components, largest variance first.
struct BatchPca {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // d x D
  Eigen::VectorXd variances;
};

inline BatchPca batch_pca(const DescriptorMatrix& m, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  const auto dims = static_cast<Eigen::Index>(m.dims());
  Eigen::MatrixXd x(n, dims);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dims; ++j) x(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  BatchPca out;
  out.mean = x.colwise().mean().transpose();
  x.rowwise() -= out.mean.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto dd = static_cast<Eigen::Index>(d);
  out.components = svd.matrixV().leftCols(dd).transpose();
  out.variances = svd.singularValues().head(dd).array().square() / static_cast<double>(n - 1);
  return out;
}

/// Globally optimal 2-means of a 1-D sample by scanning every split of the
/// sorted values. Returns (low center, high center).
inline std::pair<double, double> best_two_means(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  double total = 0.0, total_sq = 0.0;
  for (double x : v) {
    total += x;
    total_sq += x * x;
  }
  double best_cost = std::numeric_limits<double>::infinity();
  std::pair<double, double> best{0.0, 0.0};
  double left = 0.0, left_sq = 0.0;
  for (std::size_t s = 1; s < n; ++s) {
    left += v[s - 1];
    left_sq += v[s - 1] * v[s - 1];
    if (v[s] == v[s - 1]) continue;
    const double nl = static_cast<double>(s), nr = static_cast<double>(n - s);
    const double right = total - left, right_sq = total_sq - left_sq;
    const double cost = (left_sq - left * left / nl) + (right_sq - right * right / nr);
    if (cost < best_cost) {
      best_cost = cost;
      best = {left / nl, right / nr};
    }
  }
  return best;
}

/// Nearest center by exhaustive scan, first minimum wins.
inline std::uint32_t argmin_center(std::span<const double> centers, double x) {
  std::uint32_t best = 0;
  for (std::uint32_t b = 1; b < centers.size(); ++b) {
    if (std::abs(x - centers[b]) < std::abs(x - centers[best])) best = b;
  }
  return best;
}

/// Occupied address nearest to h by linear scan; lower address on ties.
inline HashAddress nearest_occupied(const std::vector<HashAddress>& occupied, HashAddress h) {
  HashAddress best = occupied.front();
  auto dist = [h](HashAddress a) { return a > h ? a - h : h - a; };
  for (HashAddress a : occupied) {
    if (dist(a) < dist(best) || (dist(a) == dist(best) && a < best)) best = a;
  }
  return best;
}

/// Center-gap distance straight from the definition, without any table.
inline double direct_delta(const Quantizer& qz, std::span<const std::uint32_t> a,
                           std::span<const std::uint32_t> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < qz.dims(); ++j) s += std::abs(qz.center(j, a[j]) - qz.center(j, b[j]));
  return s;
}

struct OracleResult {
  RefIndex best = 0;
  std::int64_t units = 0;
  double real = 0.0;
  std::size_t candidates = 0;
};

/// Scores every candidate straight from the sequence-score definition:
/// candidate set from linear-scan nearest lookups, per-dimension center gaps
/// recomputed from the centers, reference vectors recovered from addresses.
inline OracleResult direct_sequence_oracle(const InvertedIndex& idx, const Quantizer& qz,
                                    const std::vector<QuantVector>& window) {
  const SdcTable units_of(qz);
  const std::vector<HashAddress> occupied(idx.occupied().begin(), idx.occupied().end());
  std::vector<RefIndex> cands;
  for (const auto& q : window) {
    HashAddress h = 0;
    for (std::size_t j = 0; j < q.size(); ++j) h = h * qz.k() + q[j];
    const HashAddress resolved = testing::nearest_occupied(occupied, h);
    const auto slot = static_cast<std::size_t>(
        std::find(occupied.begin(), occupied.end(), resolved) - occupied.begin());
    for (RefIndex r : idx.bucket_at(slot)) cands.push_back(r);
  }
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  const auto n = static_cast<std::int64_t>(idx.ref_count());
  const auto half = static_cast<std::int64_t>(window.size() / 2);
  OracleResult out;
  out.candidates = cands.size();
  bool first = true;
  for (RefIndex i : cands) {
    std::int64_t units = 0;
    double real = 0.0;
    for (std::int64_t l = -half; l < static_cast<std::int64_t>(window.size()) - half; ++l) {
      const std::int64_t r = std::clamp<std::int64_t>(static_cast<std::int64_t>(i) + l, 0, n - 1);
      const auto stored = qz.unhash(idx.address_of(static_cast<RefIndex>(r)));
      const auto& q = window[static_cast<std::size_t>(l + half)];
      for (std::size_t j = 0; j < qz.dims(); ++j) {
        const double gap = std::abs(qz.center(j, stored[j]) - qz.center(j, q[j]));
        units += units_of.to_units(gap);
        real += gap;
      }
    }
    if (first || units < out.units) {
      out.best = i;
      out.units = units;
      out.real = real;
      first = false;
    }
  }
  return out;
}

}  // namespace testing
