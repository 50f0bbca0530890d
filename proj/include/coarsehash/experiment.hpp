#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "coarsehash/dataset.hpp"
#include "coarsehash/eval.hpp"
#include "coarsehash/hashindex.hpp"
#include "coarsehash/quantizer.hpp"
#include "coarsehash/seqmatch.hpp"
#include "coarsehash/transform.hpp"

namespace coarsehash {

/// PCA + quantizer + inverted index trained on one reference set.
struct TrainedSystem {
  PcaModel pca;
  Quantizer quantizer;
  InvertedIndex index;
};

TrainedSystem train_system(const DescriptorMatrix& reference, std::size_t d, std::size_t k,
                           std::uint64_t seed = 0);

/// Baseline: d_b-dimensional PCA projection of every reference.
struct BaselineSystem {
  PcaModel pca;
  DescriptorMatrix references;
};

BaselineSystem train_baseline(const DescriptorMatrix& reference, std::size_t dims);

struct QueryOutcome {
  std::size_t query = 0;
  std::size_t truth = 0;
  RefIndex best = 0;
  double score = 0.0;
  std::size_t candidates = 0;
  bool fallback = false;
  /// min |c - truth| over the shortlisted candidates.
  std::size_t nearest_candidate_gap = 0;
};

struct QueryPlan {
  std::size_t length = 50;  // L
  std::size_t stride = 10;  // z
  /// Query rows [0, boundary) and [boundary, N_q) are separate sequences;
  /// window frames never cross it. 0 means a single sequence.
  std::size_t boundary = 0;
};

/// Query rows evaluated under `plan`: 0, z, 2z, ... (always at least row 0).
std::vector<std::size_t> planned_queries(std::size_t query_rows, std::size_t stride);

/// Window rows for a centre query t: t + l for l in [-floor(L/2), ceil(L/2) - 1],
/// clamped to the sequence containing t.
std::vector<std::size_t> window_rows(std::size_t t, std::size_t query_rows, const QueryPlan& plan);

/// Quantizes every projected query row once.
std::vector<QuantVector> quantize_queries(const TrainedSystem& sys, const DescriptorMatrix& queries);

/// Runs the proposed pipeline over raw (D-dimensional) queries. Ground truth
/// of query row t is reference row t.
std::vector<QueryOutcome> evaluate_proposed(const TrainedSystem& sys, const DescriptorMatrix& queries,
                                            const QueryPlan& plan);
std::vector<QueryOutcome> evaluate_proposed(const TrainedSystem& sys,
                                            const std::vector<QuantVector>& quantized,
                                            const QueryPlan& plan);

std::vector<QueryOutcome> evaluate_baseline(const BaselineSystem& sys, const DescriptorMatrix& queries,
                                            const QueryPlan& plan, std::size_t cap);

std::vector<MatchPair> selected_pairs(const std::vector<QueryOutcome>& outcomes);
/// Pairs scoring the best candidate in the shortlist, for the in-list upper bound.
std::vector<MatchPair> in_list_pairs(const std::vector<QueryOutcome>& outcomes);
double mean_candidates(const std::vector<QueryOutcome>& outcomes);

/// Paired proposed/baseline evaluation across sequence lengths and noise scales.
struct BenchConfig {
  std::string label = "20K";
  DatasetRecipe recipe{};
  BuildOptions build{};
  std::size_t dims = 15;  // d
  std::size_t k = 2;      // K
  std::vector<std::size_t> lengths{1, 50, 100};
  std::vector<double> noise_scales{1.0, 2.0};
  bool proposed = true;
  bool baseline = true;
  bool in_list = false;
  std::size_t baseline_dims = 1;
  std::size_t stride = 10;
  std::size_t max_radius = 20;
  std::size_t precision = 64;
};

struct BenchResult {
  std::vector<RecallCurve> curves;
  std::vector<StorageReportRow> storage;
  std::vector<OpReportRow> ops;
};

/// Throws InvalidArgument when the baseline would store more than the
/// proposed index (4 N d_b bytes against 8 N).
BenchResult run_bench(const BenchConfig& cfg);

BenchConfig parse_bench_config(const std::string& json_text);

}  // namespace coarsehash
