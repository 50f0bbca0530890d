#include <doctest.h>

#include <cmath>
#include <numeric>

#include "coarsehash/baseline.hpp"
#include "coarsehash/dataset.hpp"
#include "support.hpp"

using namespace coarsehash;
using testing::random_matrix;

namespace {

DescriptorMatrix rows_of(const DescriptorMatrix& m, std::size_t start, std::size_t count) {
  return m.slice_rows(start, start + count);
}

}  // namespace

TEST_SUITE("baseline") {
  TEST_CASE("full cap on a noiseless repeat finds the truth with score zero") {
    const auto [refs, queries] = generate_traverse(800, 3, 0.95, 1);
    for (std::size_t start = 0; start + 20 <= refs.rows(); start += 53) {
      const auto m = baseline_match(refs, rows_of(refs, start, 20), 20, refs.rows());
      CHECK(m.best == start + 10);
      CHECK(m.score == 0.0);
      CHECK(m.candidates == refs.rows());
    }
  }

  TEST_CASE("cap of one is nearest neighbour on the centre frame") {
    const auto refs = random_matrix(500, 2, 2);
    const auto queries = random_matrix(300, 2, 3);
    for (std::size_t start = 0; start + 5 <= queries.rows(); start += 17) {
      const auto window = rows_of(queries, start, 5);
      const auto m = baseline_match(refs, window, 5, 1);
      std::size_t nn = 0;
      double best = INFINITY;
      for (std::size_t i = 0; i < refs.rows(); ++i) {
        const double dx = refs(i, 0) - window(2, 0), dy = refs(i, 1) - window(2, 1);
        const double dist = dx * dx + dy * dy;
        if (dist < best) {
          best = dist;
          nn = i;
        }
      }
      CHECK(m.best == nn);
      CHECK(m.shortlist == std::vector<RefIndex>{static_cast<RefIndex>(nn)});
    }
  }

  TEST_CASE("single frame with full cap is exact 1-D nearest neighbour") {
    const auto refs = random_matrix(1000, 1, 4);
    std::vector<std::size_t> order(refs.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return refs(a, 0) != refs(b, 0) ? refs(a, 0) < refs(b, 0) : a < b;
    });
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
      const float x = static_cast<float>(rng.normal());
      const auto m = baseline_match(refs, DescriptorMatrix(1, 1, {x}), 1, refs.rows());
      auto it = std::lower_bound(order.begin(), order.end(), x,
                                 [&](std::size_t i, float v) { return refs(i, 0) < v; });
      std::size_t nn = it == order.end() ? order.back() : *it;
      if (it != order.begin()) {
        const std::size_t below = *std::prev(it);
        const double db = std::abs(static_cast<double>(x) - refs(below, 0));
        const double da = std::abs(static_cast<double>(refs(nn, 0)) - x);
        if (it == order.end() || db <= da) nn = below;
      }
      CHECK(std::abs(static_cast<double>(refs(m.best, 0)) - x) ==
            doctest::Approx(std::abs(static_cast<double>(refs(nn, 0)) - x)));
    }
  }

  TEST_CASE("shortlist is ascending and capped") {
    const auto refs = random_matrix(400, 1, 6);
    const auto m = baseline_match(refs, random_matrix(9, 1, 7), 9, 37);
    CHECK(m.candidates == 37);
    CHECK(m.shortlist.size() == 37);
    CHECK(std::is_sorted(m.shortlist.begin(), m.shortlist.end()));
    CHECK(std::find(m.shortlist.begin(), m.shortlist.end(), m.best) != m.shortlist.end());
  }

  TEST_CASE("retrieval op count and storage") {
    const auto refs = random_matrix(20'000, 1, 8);
    const auto m = baseline_match(refs, random_matrix(1, 1, 9), 1, 5);
    CHECK(m.retrieval_ops == 60'000);
    CHECK(baseline_storage_bytes(20'000, 1) == 80'000);
  }

  TEST_CASE("argument errors") {
    const auto refs = random_matrix(50, 2, 1);
    CHECK_THROWS_AS(baseline_match(refs, random_matrix(3, 2, 2), 0, 5), InvalidArgument);
    CHECK_THROWS_AS(baseline_match(refs, random_matrix(3, 2, 2), 4, 5), InvalidArgument);
    CHECK_THROWS_AS(baseline_match(refs, random_matrix(3, 1, 2), 3, 5), InvalidArgument);
    CHECK_THROWS_AS(baseline_match(refs, random_matrix(3, 2, 2), 3, 0), InvalidArgument);
  }
}
