#include "coarsehash/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <nlohmann/json.hpp>

#include "coarsehash/baseline.hpp"

namespace coarsehash {

using nlohmann::json;

TrainedSystem train_system(const DescriptorMatrix& reference, std::size_t d, std::size_t k,
                           std::uint64_t seed) {
  checked_address_space(k, d);
  auto pca = fit_incremental(reference, d);
  const auto projected = project(pca, reference);
  auto quantizer = fit_quantizer(projected, k, seed);
  auto index = InvertedIndex::build(projected, quantizer);
  return TrainedSystem{std::move(pca), std::move(quantizer), std::move(index)};
}

BaselineSystem train_baseline(const DescriptorMatrix& reference, std::size_t dims) {
  auto pca = fit_incremental(reference, dims);
  auto refs = project(pca, reference);
  return BaselineSystem{std::move(pca), std::move(refs)};
}

std::vector<std::size_t> planned_queries(std::size_t query_rows, std::size_t stride) {
  if (query_rows == 0) throw InvalidArgument("no query rows to evaluate");
  if (stride == 0) throw InvalidArgument("query stride must be at least 1");
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < query_rows; t += stride) rows.push_back(t);
  return rows;
}

std::vector<std::size_t> window_rows(std::size_t t, std::size_t query_rows, const QueryPlan& plan) {
  std::size_t lo = 0, hi = query_rows;
  if (plan.boundary > 0 && plan.boundary < query_rows) {
    if (t < plan.boundary) {
      hi = plan.boundary;
    } else {
      lo = plan.boundary;
    }
  }
  const std::size_t center = window_center(plan.length);
  std::vector<std::size_t> rows(plan.length);
  for (std::size_t p = 0; p < plan.length; ++p) {
    const auto row = static_cast<std::int64_t>(t) + static_cast<std::int64_t>(p) -
                     static_cast<std::int64_t>(center);
    rows[p] = static_cast<std::size_t>(
        std::clamp<std::int64_t>(row, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi) - 1));
  }
  return rows;
}

std::vector<QuantVector> quantize_queries(const TrainedSystem& sys, const DescriptorMatrix& queries) {
  const auto projected = project(sys.pca, queries);
  std::vector<QuantVector> out(projected.rows());
  for (std::size_t i = 0; i < projected.rows(); ++i) out[i] = sys.quantizer.quantize(projected.row(i));
  return out;
}

namespace {

std::size_t nearest_gap(std::span<const RefIndex> sorted, std::size_t truth) {
  std::size_t best = static_cast<std::size_t>(-1);
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), truth);
  if (it != sorted.end()) best = std::min<std::size_t>(best, *it - truth);
  if (it != sorted.begin()) best = std::min<std::size_t>(best, truth - *std::prev(it));
  return best;
}

}  // namespace

std::vector<QueryOutcome> evaluate_proposed(const TrainedSystem& sys,
                                            const std::vector<QuantVector>& quantized,
                                            const QueryPlan& plan) {
  if (plan.length == 0) throw InvalidArgument("sequence length must be at least 1");
  const SequenceSearch search(sys.index, sys.quantizer);
  std::vector<QueryOutcome> outcomes;
  std::vector<QuantVector> window(plan.length);
  for (const std::size_t t : planned_queries(quantized.size(), plan.stride)) {
    const auto rows = window_rows(t, quantized.size(), plan);
    for (std::size_t p = 0; p < rows.size(); ++p) window[p] = quantized[rows[p]];
    const auto m = search.match(window);

    QueryOutcome o;
    o.query = t;
    o.truth = t;
    o.best = m.best;
    o.score = m.score;
    o.candidates = m.candidates_probed;
    o.fallback = m.center_fallback;
    if (plan.length == 1) {
      const auto lr = sys.index.lookup(sys.quantizer.hash(window[0]));
      o.nearest_candidate_gap = nearest_gap(lr.candidates, t);
    } else {
      o.nearest_candidate_gap = nearest_gap(search.candidates(window), t);
    }
    outcomes.push_back(o);
  }
  return outcomes;
}

std::vector<QueryOutcome> evaluate_proposed(const TrainedSystem& sys, const DescriptorMatrix& queries,
                                            const QueryPlan& plan) {
  return evaluate_proposed(sys, quantize_queries(sys, queries), plan);
}

std::vector<QueryOutcome> evaluate_baseline(const BaselineSystem& sys, const DescriptorMatrix& queries,
                                            const QueryPlan& plan, std::size_t cap) {
  const auto projected = project(sys.pca, queries);
  const std::size_t dims = projected.dims();
  std::vector<QueryOutcome> outcomes;
  for (const std::size_t t : planned_queries(projected.rows(), plan.stride)) {
    const auto rows = window_rows(t, projected.rows(), plan);
    auto window = DescriptorMatrix::zeros(plan.length, dims);
    for (std::size_t p = 0; p < rows.size(); ++p) {
      const auto src = projected.row(rows[p]);
      std::copy(src.begin(), src.end(), window.mutable_row(p).begin());
    }
    const auto m = baseline_match(sys.references, window, plan.length, cap);
    QueryOutcome o;
    o.query = t;
    o.truth = t;
    o.best = m.best;
    o.score = m.score;
    o.candidates = m.candidates;
    o.nearest_candidate_gap = nearest_gap(m.shortlist, t);
    outcomes.push_back(o);
  }
  return outcomes;
}

std::vector<MatchPair> selected_pairs(const std::vector<QueryOutcome>& outcomes) {
  std::vector<MatchPair> pairs;
  pairs.reserve(outcomes.size());
  for (const auto& o : outcomes) pairs.push_back({o.truth, o.best});
  return pairs;
}

std::vector<MatchPair> in_list_pairs(const std::vector<QueryOutcome>& outcomes) {
  std::vector<MatchPair> pairs;
  pairs.reserve(outcomes.size());
  for (const auto& o : outcomes) pairs.push_back({o.truth, o.truth + o.nearest_candidate_gap});
  return pairs;
}

double mean_candidates(const std::vector<QueryOutcome>& outcomes) {
  if (outcomes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& o : outcomes) total += static_cast<double>(o.candidates);
  return total / static_cast<double>(outcomes.size());
}

BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.lengths.empty() || cfg.noise_scales.empty()) {
    throw InvalidArgument("bench needs at least one sequence length and one noise scale");
  }
  if (cfg.baseline) {
    // Baseline stores 4 N d_b bytes of floats; the proposed map stores 8 N.
    if (cfg.baseline_dims == 0 || baseline_storage_bytes(1, cfg.baseline_dims) > 8) {
      throw InvalidArgument("baseline_dims must keep baseline storage within the proposed 8 bytes per place");
    }
    if (!cfg.proposed) throw InvalidArgument("baseline cap is measured from the proposed system");
  }

  BenchResult result;
  for (std::size_t s = 0; s < cfg.noise_scales.size(); ++s) {
    DatasetRecipe recipe = cfg.recipe;
    recipe.noise_scale = cfg.noise_scales[s];
    const auto ds = build_dataset(recipe, cfg.build);
    const auto sys = train_system(ds.reference, cfg.dims, cfg.k, recipe.seed);
    const auto quantized = quantize_queries(sys, ds.query);
    std::optional<BaselineSystem> base;
    if (cfg.baseline) base = train_baseline(ds.reference, cfg.baseline_dims);

    if (s == 0) {
      StorageConfig sc{ds.reference.rows(), ds.reference.dims(), cfg.dims, cfg.k};
      result.storage.push_back(
          {cfg.label, sc, storage_report(sc), measured_storage(sys.index, sys.quantizer, ds.reference.dims())});
    }

    for (const std::size_t length : cfg.lengths) {
      QueryPlan plan{length, cfg.stride, ds.boundary};
      const auto outcomes = evaluate_proposed(sys, quantized, plan);
      const double nr = mean_candidates(outcomes);
      CurveMeta meta{cfg.label, "proposed", length, recipe.noise_scale, cfg.dims, cfg.k, nr};
      result.curves.push_back(recall_curve(selected_pairs(outcomes), cfg.max_radius, meta));
      if (cfg.in_list) {
        meta.system = "proposed-inlist";
        result.curves.push_back(recall_curve(in_list_pairs(outcomes), cfg.max_radius, meta));
      }
      const auto nr_rounded = static_cast<std::uint64_t>(std::max(1.0, std::round(nr)));
      OpConfig oc{ds.reference.dims(), cfg.dims, cfg.k, ds.reference.rows(), nr_rounded, length, cfg.precision};
      result.ops.push_back({cfg.label, System::proposed, oc, op_count(oc, System::proposed)});

      if (base) {
        const auto b = evaluate_baseline(*base, ds.query, plan, nr_rounded);
        CurveMeta bmeta{cfg.label, "baseline", length, recipe.noise_scale, cfg.baseline_dims, 0,
                        static_cast<double>(nr_rounded)};
        result.curves.push_back(recall_curve(selected_pairs(b), cfg.max_radius, bmeta));
        OpConfig bc{ds.reference.dims(), cfg.baseline_dims, cfg.k, ds.reference.rows(), nr_rounded,
                    length, cfg.precision};
        result.ops.push_back({cfg.label, System::baseline, bc, op_count(bc, System::baseline)});
      }
    }
  }
  return result;
}

BenchConfig parse_bench_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("bench config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("bench config must be a JSON object");
  if (!j.contains("recipe")) throw InvalidArgument("bench config field 'recipe' missing");

  BenchConfig cfg;
  cfg.recipe = parse_recipe(j["recipe"].dump());
  try {
    cfg.label = j.value("label", cfg.label);
    cfg.dims = j.value("d", cfg.dims);
    cfg.k = j.value("K", cfg.k);
    cfg.lengths = j.value("L", cfg.lengths);
    cfg.noise_scales = j.value("noise_scales", cfg.noise_scales);
    cfg.stride = j.value("stride", cfg.stride);
    cfg.baseline_dims = j.value("baseline_dims", cfg.baseline_dims);
    cfg.max_radius = j.value("max_radius", cfg.max_radius);
    cfg.in_list = j.value("in_list", cfg.in_list);
    cfg.precision = j.value("precision", cfg.precision);
    cfg.build.rescale_variance = j.value("rescale_variance", cfg.build.rescale_variance);
    if (j.contains("systems")) {
      const auto systems = j["systems"].get<std::vector<std::string>>();
      cfg.proposed = std::find(systems.begin(), systems.end(), "proposed") != systems.end();
      cfg.baseline = std::find(systems.begin(), systems.end(), "baseline") != systems.end();
      for (const auto& name : systems) {
        if (name != "proposed" && name != "baseline") {
          throw InvalidArgument("bench config field 'systems' has unknown system '" + name + "'");
        }
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bench config: ") + e.what());
  }
  if (!cfg.proposed) throw InvalidArgument("bench config field 'systems' must include 'proposed'");
  return cfg;
}

}  // namespace coarsehash
