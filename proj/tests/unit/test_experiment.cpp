#include <doctest.h>

#include "coarsehash/experiment.hpp"
#include "support.hpp"

using namespace coarsehash;

namespace {

DatasetRecipe small_recipe(std::uint64_t seed = 1) {
  DatasetRecipe r;
  r.ref_count_a = 1500;
  r.ref_count_b = 1500;
  r.query_count_b = 1500;
  r.target_dims = 32;
  r.seed = seed;
  return r;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("planned queries") {
    CHECK(planned_queries(25, 10) == std::vector<std::size_t>{0, 10, 20});
    CHECK(planned_queries(5, 100) == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(planned_queries(0, 10), InvalidArgument);
    CHECK_THROWS_AS(planned_queries(10, 0), InvalidArgument);
  }

  TEST_CASE("window rows clamp inside the part holding the query") {
    const QueryPlan plan{4, 1, 10};
    CHECK(window_rows(0, 20, plan) == std::vector<std::size_t>{0, 0, 0, 1});
    CHECK(window_rows(9, 20, plan) == std::vector<std::size_t>{7, 8, 9, 9});
    CHECK(window_rows(10, 20, plan) == std::vector<std::size_t>{10, 10, 10, 11});
    CHECK(window_rows(19, 20, plan) == std::vector<std::size_t>{17, 18, 19, 19});
    const QueryPlan single{3, 1, 0};
    CHECK(window_rows(10, 20, single) == std::vector<std::size_t>{9, 10, 11});
  }

  TEST_CASE("L=1 evaluation uses the single-best path") {
    const auto ds = build_dataset(small_recipe());
    const auto sys = train_system(ds.reference, 12, 2, 0);
    const auto quantized = quantize_queries(sys, ds.query);
    const auto outcomes = evaluate_proposed(sys, quantized, QueryPlan{1, 7, ds.boundary});
    for (const auto& o : outcomes) {
      CHECK(o.best == sys.index.query_single(sys.quantizer.hash(quantized[o.query])));
    }
  }

  TEST_CASE("in-list recall bounds selected recall") {
    const auto ds = build_dataset(small_recipe(2));
    const auto sys = train_system(ds.reference, 12, 2, 0);
    for (const std::size_t length : {std::size_t{1}, std::size_t{20}}) {
      const auto outcomes = evaluate_proposed(sys, ds.query, QueryPlan{length, 5, ds.boundary});
      const auto selected = recall_curve(selected_pairs(outcomes), 20, {});
      const auto in_list = recall_curve(in_list_pairs(outcomes), 20, {});
      for (std::size_t r = 0; r <= 20; ++r) CHECK(in_list.at(r) >= selected.at(r));
    }
  }

  TEST_CASE("training is deterministic") {
    const auto ds = build_dataset(small_recipe(3));
    const auto a = train_system(ds.reference, 11, 2, 0);
    const auto b = train_system(ds.reference, 11, 2, 0);
    CHECK(a.pca == b.pca);
    CHECK(a.quantizer == b.quantizer);
    CHECK(a.index == b.index);
    CHECK(a.index.occupied_count() <= ds.reference.rows());
  }

  TEST_CASE("bench config parsing") {
    const std::string recipe =
        R"("recipe":{"ref_count_a":200,"ref_count_b":200,"query_count_b":100,"window_w":40,)"
        R"("noise_scale":1,"seed":3,"target_dims":16})";
    const auto cfg = parse_bench_config("{" + recipe + R"(,"d":10,"L":[1,5],"noise_scales":[1,2],)" +
                                        R"("systems":["proposed"],"in_list":true})");
    CHECK(cfg.dims == 10);
    CHECK(cfg.lengths == std::vector<std::size_t>{1, 5});
    CHECK(cfg.proposed);
    CHECK_FALSE(cfg.baseline);
    CHECK(cfg.in_list);
    CHECK_THROWS_AS(parse_bench_config(R"({"d":10})"), InvalidArgument);
    CHECK_THROWS_AS(parse_bench_config("{" + recipe + R"(,"systems":["other"]})"), InvalidArgument);
    CHECK_THROWS_AS(parse_bench_config("{" + recipe + R"(,"d":"ten"})"), InvalidArgument);
  }

  TEST_CASE("bench runs paired systems and enforces storage parity") {
    BenchConfig cfg;
    cfg.recipe = small_recipe(4);
    cfg.dims = 12;
    cfg.lengths = {1, 10};
    cfg.noise_scales = {1.0, 2.0};
    cfg.in_list = true;
    const auto result = run_bench(cfg);
    CHECK(result.curves.size() == 2 * 2 * 3);
    CHECK(result.storage.size() == 1);
    CHECK(result.ops.size() == 2 * 2 * 2);
    for (const auto& c : result.curves) {
      if (c.meta.system == "baseline") CHECK(c.meta.mean_candidates >= 1.0);
    }

    cfg.baseline_dims = 3;
    CHECK_THROWS_AS(run_bench(cfg), InvalidArgument);
  }
}
