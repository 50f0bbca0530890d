// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "../unit/support.hpp"
#include "coarsehash/baseline.hpp"
#include "coarsehash/experiment.hpp"

using namespace coarsehash;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

// --- shared 20K-analog fixture ----------------------------------------------

DatasetRecipe recipe_20k() {
  DatasetRecipe r;
  r.ref_count_a = 10'000;
  r.ref_count_b = 10'000;
  r.query_count_b = 10'000;
  r.window_w = 40;
  r.seed = 2024;
  r.target_dims = 96;
  return r;
}

struct Run20K {
  LocalizationDataset qm1;
  DescriptorMatrix qm2_query;
  TrainedSystem sys;
  std::vector<QuantVector> qm1_quantized;
  std::vector<QuantVector> qm2_quantized;
};

constexpr std::size_t kDims20K = 15;
constexpr std::size_t kStride20K = 10;
constexpr std::size_t kMaxRadius = 20;

Run20K& run_20k() {
  static std::optional<Run20K> run;
  if (!run) {
    auto recipe = recipe_20k();
    auto qm1 = build_dataset(recipe);
    recipe.noise_scale = 2.0;
    auto qm2 = build_dataset(recipe);
    if (!(qm2.reference == qm1.reference)) throw std::logic_error("noise scale changed the references");
    auto sys = train_system(qm1.reference, kDims20K, 2, recipe.seed);
    auto q1 = quantize_queries(sys, qm1.query);
    auto q2 = quantize_queries(sys, qm2.query);
    run.emplace(Run20K{std::move(qm1), std::move(qm2.query), std::move(sys), std::move(q1), std::move(q2)});
  }
  return *run;
}

std::vector<QuantVector> window_of(const std::vector<QuantVector>& frames, std::size_t start,
                                   std::size_t length) {
  return {frames.begin() + static_cast<std::ptrdiff_t>(start),
          frames.begin() + static_cast<std::ptrdiff_t>(start + length)};
}

// --- criteria --------------------------------------------------------------

Verdict hash_bijectivity_and_partition() {
  for (std::size_t d = 1; d <= 12; ++d) {
    std::vector<double> c;
    for (std::size_t j = 0; j < d; ++j) c.insert(c.end(), {-1.0, 1.0});
    const Quantizer qz(d, 2, c);
    std::vector<bool> hit(qz.address_space(), false);
    QuantVector q(d);
    for (HashAddress h = 0; h < qz.address_space(); ++h) {
      qz.unhash_into(h, q);
      const HashAddress back = qz.hash(q);
      if (back != h) return {false, fmt("round trip failed at d=%zu h=%llu", d, (unsigned long long)h)};
      // Injectivity from the vector side: every vector maps to a fresh address.
      HashAddress direct = 0;
      for (std::size_t j = 0; j < d; ++j) direct = direct * 2 + q[j];
      if (hit[direct]) return {false, fmt("address %llu produced twice at d=%zu", (unsigned long long)direct, d)};
      hit[direct] = true;
    }
  }

  const std::size_t d = 12;
  const auto refs = testing::random_matrix(10'000, d, 77);
  const auto qz = fit_quantizer(refs, 2, 0);
  const auto idx = InvertedIndex::build(refs, qz);
  std::map<HashAddress, std::vector<RefIndex>> groups;
  for (std::size_t i = 0; i < refs.rows(); ++i) {
    HashAddress h = 0;
    for (std::size_t j = 0; j < d; ++j) h = h * 2 + testing::argmin_center(qz.centers(j), refs(i, j));
    groups[h].push_back(static_cast<RefIndex>(i));
  }
  if (groups.size() != idx.occupied_count()) {
    return {false, fmt("H_o %zu vs oracle %zu", idx.occupied_count(), groups.size())};
  }
  std::size_t slot = 0, total = 0;
  for (const auto& [address, members] : groups) {
    const auto bucket = idx.bucket_at(slot);
    if (idx.occupied()[slot] != address || !std::equal(bucket.begin(), bucket.end(), members.begin(), members.end())) {
      return {false, fmt("bucket %zu differs from the group-by oracle", slot)};
    }
    total += bucket.size();
    ++slot;
  }
  if (total != refs.rows()) return {false, "bucket sizes do not sum to N_x"};
  return {true, fmt("K=2, d=1..12 exhaustive; 10,000 refs in %zu buckets match group-by", groups.size())};
}

Verdict batch_online_equivalence() {
  auto& run = run_20k();
  const auto& frames = run.qm1_quantized;
  const SequenceSearch search(run.sys.index, run.sys.quantizer);
  Rng rng(31);
  std::size_t windows = 0;
  std::uint64_t online_pairs = 0, batch_pairs = 0;
  while (windows < 500) {
    const std::size_t length = 1 + rng.next_u64() % 100;
    const std::size_t emissions = std::min<std::size_t>(25, 500 - windows);
    const std::size_t start = rng.next_u64() % (frames.size() - length - emissions);
    SequenceMatcher sm(run.sys.index, run.sys.quantizer, length);
    for (std::size_t t = start; t < start + length - 1; ++t) {
      if (sm.push(frames[t])) return {false, "result emitted before L frames"};
    }
    for (std::size_t e = 0; e < emissions; ++e) {
      const std::size_t end = start + length - 1 + e;
      const auto online = sm.push(frames[end]);
      const auto batch = search.match(window_of(frames, end + 1 - length, length));
      batch_pairs += batch.candidates_probed * length;
      if (!online || !(*online == batch)) {
        return {false, fmt("mismatch at window %zu (L=%zu, start=%zu)", windows, length, end + 1 - length)};
      }
      ++windows;
    }
    online_pairs += sm.pair_evaluations();
  }
  return {true, fmt("500 windows identical; online pair evaluations %.1f%% of batch",
                    100.0 * static_cast<double>(online_pairs) / static_cast<double>(batch_pairs))};
}

Verdict oracle_equivalence() {
  auto& run = run_20k();
  const auto& frames = run.qm1_quantized;
  const SequenceSearch search(run.sys.index, run.sys.quantizer);
  Rng rng(47);
  const std::size_t length = 50;
  for (int w = 0; w < 200; ++w) {
    const std::size_t start = rng.next_u64() % (frames.size() - length);
    const auto window = window_of(frames, start, length);
    const auto m = search.match(window);
    const auto oracle = testing::direct_sequence_oracle(run.sys.index, run.sys.quantizer, window);
    if (m.best != oracle.best || m.score_units != oracle.units || m.candidates_probed != oracle.candidates) {
      return {false, fmt("window at %zu: best %u vs %u, N_r %zu vs %zu", start, m.best, oracle.best,
                         m.candidates_probed, oracle.candidates)};
    }
    if (std::abs(m.score - oracle.real) > 1e-9 * std::max(1.0, oracle.real)) {
      return {false, fmt("window at %zu: score %.12g vs direct %.12g", start, m.score, oracle.real)};
    }
  }
  return {true, "200 windows (L=50, N_x=20,000) match the direct scorer exactly"};
}

Verdict op_count_reproduction() {
  OpConfig cfg;
  cfg.dims = 24;
  cfg.candidates = 32;
  cfg.new_pairs = 50;
  cfg.precision = 64;
  const double seq = op_count(cfg, System::proposed).seq_ops;
  if (seq != 37'400.0) return {false, fmt("seq_ops %.3f, expected 37400", seq)};

  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    OpConfig c;
    c.input_dims = 1 + rng.next_u64() % 512;
    c.dims = 1 + rng.next_u64() % 64;
    c.k = 2 + rng.next_u64() % 15;
    c.ref_count = rng.next_u64() % 20'000'000;
    c.candidates = rng.next_u64() % 5000;
    c.new_pairs = 1 + rng.next_u64() % 200;
    c.precision = rng.uniform() < 0.5 ? 32 : 64;
    const auto p = op_count(c, System::proposed);
    const auto b = op_count(c, System::baseline);
    const double D = static_cast<double>(c.input_dims), d = static_cast<double>(c.dims);
    const double K = static_cast<double>(c.k), Nx = static_cast<double>(c.ref_count);
    const double Nr = static_cast<double>(c.candidates), Lp = static_cast<double>(c.new_pairs);
    const double prec = static_cast<double>(c.precision);
    const bool ok = p.pca_ops == D + d * (2 * D - 1) && p.quant_ops == d * (2 * K - 1) &&
                    p.hash_ops == 2 * d - 1 && b.lookup_ops == 3 * d * Nx &&
                    std::abs(p.seq_ops - Lp * Nr * (d / prec + d - 1)) <= 1e-9 * std::max(1.0, p.seq_ops) &&
                    b.seq_ops == (Nr > 0 ? 3 * Nr - 1 : 0.0) && b.pca_ops == p.pca_ops;
    if (!ok) return {false, fmt("formula mismatch for config %d", t)};
  }
  return {true, fmt("seq_ops = 37400; 1,000 random configs match; %.1f MHz at 1.3 TFLOPs",
                    throughput_hz(1.3e12, op_count(cfg, System::proposed).seq_ops) / 1e6)};
}

Verdict storage_model_reproduction() {
  struct Case {
    std::uint64_t n;
    std::size_t d;
    double paper_mb;
  };
  const Case cases[] = {{20'000, 12, 0.2}, {1'047'781, 20, 8.4}, {10'047'781, 24, 80.4}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const double mb = storage_report({c.n, 96, c.d, 2}).total_megabytes();
    const double rel = std::abs(mb - c.paper_mb) / c.paper_mb;
    ok = ok && rel <= 0.005;
    detail += fmt("%s%.4f MB vs %.1f (%.2f%%)", detail.empty() ? "" : "; ", mb, c.paper_mb, 100 * rel);
  }
  return {ok, detail};
}

struct PairedCurves {
  double proposed_r20 = 0.0;
  double baseline_r20 = 0.0;
  double mean_nr = 0.0;
  std::size_t cap = 0;
};

std::map<std::pair<double, std::size_t>, std::vector<QueryOutcome>>& proposed_outcomes() {
  static std::map<std::pair<double, std::size_t>, std::vector<QueryOutcome>> cache;
  return cache;
}

const std::vector<QueryOutcome>& outcomes_for(double noise, std::size_t length) {
  auto& cache = proposed_outcomes();
  const auto key = std::pair{noise, length};
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto& run = run_20k();
  const auto& frames = noise == 1.0 ? run.qm1_quantized : run.qm2_quantized;
  return cache[key] = evaluate_proposed(run.sys, frames, QueryPlan{length, kStride20K, run.qm1.boundary});
}

Verdict proposed_vs_baseline() {
  auto& run = run_20k();
  const std::size_t length = 50;
  const auto& outcomes = outcomes_for(1.0, length);
  const double nr = mean_candidates(outcomes);
  const auto cap = static_cast<std::size_t>(std::max(1.0, std::round(nr)));
  const auto base = train_baseline(run.qm1.reference, 1);
  if (baseline_storage_bytes(run.qm1.reference.rows(), 1) > storage_report({run.qm1.reference.rows(), 96, kDims20K, 2}).p1_bytes) {
    return {false, "baseline storage exceeds the proposed index"};
  }
  const QueryPlan plan{length, kStride20K, run.qm1.boundary};
  const auto base_outcomes = evaluate_baseline(base, run.qm1.query, plan, cap);
  const double proposed = recall_at(selected_pairs(outcomes), kMaxRadius);
  const double baseline = recall_at(selected_pairs(base_outcomes), kMaxRadius);

  // Traverse-part queries only, for comparison with the paper's 98 vs 1.
  std::vector<MatchPair> prop_b, base_b;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].query >= run.qm1.boundary) {
      prop_b.push_back({outcomes[i].truth, outcomes[i].best});
      base_b.push_back({base_outcomes[i].truth, base_outcomes[i].best});
    }
  }
  const bool ok = proposed >= 5.0 * baseline && proposed > 0.0;
  return {ok, fmt("recall@20 proposed %.3f vs baseline %.3f (ratio %s), cap N_r=%zu; traverse part %.3f vs %.3f",
                  proposed, baseline, baseline > 0 ? fmt("%.1f", proposed / baseline).c_str() : "inf", cap,
                  recall_at(prop_b, kMaxRadius), recall_at(base_b, kMaxRadius))};
}

Verdict length_and_noise_monotonicity() {
  const std::size_t lengths[] = {1, 50, 100};
  std::map<std::pair<double, std::size_t>, RecallCurve> curves;
  for (double noise : {1.0, 2.0}) {
    for (std::size_t length : lengths) {
      curves[{noise, length}] = recall_curve(selected_pairs(outcomes_for(noise, length)), kMaxRadius, {});
    }
  }
  bool ok = true;
  std::string detail;
  for (double noise : {1.0, 2.0}) {
    const double r1 = curves[{noise, 1}].at(kMaxRadius);
    const double r50 = curves[{noise, 50}].at(kMaxRadius);
    const double r100 = curves[{noise, 100}].at(kMaxRadius);
    ok = ok && r100 >= r50 - 0.02 && r50 >= r1 - 0.02;
    detail += fmt("%sQM%d L=1/50/100: %.3f/%.3f/%.3f", detail.empty() ? "" : "; ", noise == 1.0 ? 1 : 2, r1, r50, r100);
  }
  std::size_t violations = 0;
  for (std::size_t length : lengths) {
    for (std::size_t r = 0; r <= kMaxRadius; ++r) {
      if (curves[{2.0, length}].at(r) > curves[{1.0, length}].at(r)) ++violations;
    }
  }
  ok = ok && violations == 0;
  detail += fmt("; QM2 > QM1 at %zu of %zu (L, radius) points", violations, 3 * (kMaxRadius + 1));
  return {ok, detail};
}

Verdict in_list_upper_bound() {
  std::size_t runs = 0;
  double worst_gap = 1.0;
  for (double noise : {1.0, 2.0}) {
    for (std::size_t length : {std::size_t{1}, std::size_t{50}, std::size_t{100}}) {
      const auto& outcomes = outcomes_for(noise, length);
      const auto selected = recall_curve(selected_pairs(outcomes), kMaxRadius, {});
      const auto in_list = recall_curve(in_list_pairs(outcomes), kMaxRadius, {});
      for (std::size_t r = 0; r <= kMaxRadius; ++r) {
        worst_gap = std::min(worst_gap, in_list.at(r) - selected.at(r));
        if (in_list.at(r) < selected.at(r)) {
          return {false, fmt("noise %.0f L=%zu radius %zu: in-list %.4f < selected %.4f", noise, length, r,
                             in_list.at(r), selected.at(r))};
        }
      }
      ++runs;
    }
  }
  return {true, fmt("%zu runs x 21 radii; smallest in-list minus selected gap %.4f", runs, worst_gap)};
}

Verdict cluster_balance_contrast() {
  auto& run = run_20k();
  const auto balanced = cluster_balance(run.sys.index, run.sys.quantizer);

  BuildOptions raw;
  raw.rescale_variance = false;
  const auto unscaled = build_dataset(recipe_20k(), raw);
  const auto sys = train_system(unscaled.reference, kDims20K, 2, recipe_20k().seed);
  const auto skewed = cluster_balance(sys.index, sys.quantizer);

  const double worst = balanced.max_imbalance(10);
  bool contrast = false;
  std::string dims;
  for (std::size_t j = 0; j < 3; ++j) {
    contrast = contrast || skewed.imbalance[j] > balanced.imbalance[j];
    dims += fmt("%s%.3f/%.3f", j ? ", " : "", balanced.imbalance[j], skewed.imbalance[j]);
  }
  return {worst <= 0.15 && contrast,
          fmt("rescaled max imbalance (first 10 dims) %.3f; dims 0-2 rescaled/unscaled %s", worst, dims.c_str())};
}

Verdict sublinear_candidate_growth() {
  struct Scale {
    const char* label;
    DatasetRecipe recipe;
    std::size_t stride;
  };
  auto small = recipe_20k();
  DatasetRecipe large = small;
  large.ref_count_a = 1'000'000;
  large.ref_count_b = 47'781;
  large.query_count_b = 26'638;
  const Scale scales[] = {{"20K", small, 10}, {"1M", large, 100}};

  double nr[2] = {0, 0};
  std::size_t n[2] = {0, 0}, d[2] = {0, 0};
  for (int s = 0; s < 2; ++s) {
    const auto& sc = scales[s];
    auto ds = build_dataset(sc.recipe);
    n[s] = ds.reference.rows();
    d[s] = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n[s])))) + 1;
    const auto sys = train_system(ds.reference, d[s], 2, sc.recipe.seed);
    const auto quantized = quantize_queries(sys, ds.query);
    const std::size_t boundary = ds.boundary;
    ds = LocalizationDataset{DescriptorMatrix(1, 1, {0.0f}), DescriptorMatrix(1, 1, {0.0f}), 0, {}};
    nr[s] = mean_candidates(evaluate_proposed(sys, quantized, QueryPlan{50, sc.stride, boundary}));
  }
  const double nr_ratio = nr[1] / nr[0];
  const double nx_ratio = static_cast<double>(n[1]) / static_cast<double>(n[0]);
  return {nr_ratio < nx_ratio / 10.0,
          fmt("mean N_r (L=50) %.1f at N_x=%zu, d=%zu vs %.1f at N_x=%zu, d=%zu; ratio %.2f < %.2f", nr[0], n[0], d[0],
              nr[1], n[1], d[1], nr_ratio, nx_ratio / 10.0)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> check;
  };
  const Criterion criteria[] = {
      {"hash bijectivity and index partition", hash_bijectivity_and_partition},
      {"batch/online sequence equivalence", batch_online_equivalence},
      {"direct scorer oracle equivalence", oracle_equivalence},
      {"operation count reproduction", op_count_reproduction},
      {"storage model reproduction", storage_model_reproduction},
      {"proposed vs baseline separation", proposed_vs_baseline},
      {"sequence length and noise monotonicity", length_and_noise_monotonicity},
      {"in-list recall upper bound", in_list_upper_bound},
      {"cluster balance contrast", cluster_balance_contrast},
      {"sublinear candidate growth", sublinear_candidate_growth},
  };
  int failures = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", index, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  std::printf("%d of %d criteria passed\n", index - failures, index);
  return failures == 0 ? 0 : 1;
}
