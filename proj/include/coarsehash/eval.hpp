#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coarsehash/descriptor.hpp"
#include "coarsehash/hashindex.hpp"
#include "coarsehash/quantizer.hpp"

namespace coarsehash {

// --- recall ---------------------------------------------------------------

struct MatchPair {
  std::size_t truth = 0;
  std::size_t returned = 0;
};

/// Fraction of pairs with |returned - truth| <= radius.
double recall_at(std::span<const MatchPair> matches, std::size_t radius);

struct CurveMeta {
  std::string dataset;
  std::string system;
  std::size_t length = 1;  // L
  double noise_scale = 1.0;
  std::size_t dims = 0;    // d
  std::size_t k = 0;       // K
  double mean_candidates = 0.0;
};

/// Recall at radius 0..max_radius frames.
struct RecallCurve {
  std::vector<std::size_t> radii;
  std::vector<double> recall;
  CurveMeta meta;

  double at(std::size_t radius) const { return recall.at(radius); }
};

RecallCurve recall_curve(std::span<const MatchPair> matches, std::size_t max_radius, CurveMeta meta);

// --- storage --------------------------------------------------------------

struct StorageConfig {
  std::uint64_t ref_count = 0;   // N_x
  std::size_t input_dims = 0;    // D
  std::size_t dims = 0;          // d
  std::size_t k = 0;             // K
};

/// Persisted components, 8 bytes per stored number:
///   P1 reference-to-address map  8 N_x
///   P2 cluster centers           8 d K
///   P3 PCA matrix                8 d D
///   P4 mean descriptor           8 D
struct StorageReport {
  std::uint64_t p1_bytes = 0;
  std::uint64_t p2_bytes = 0;
  std::uint64_t p3_bytes = 0;
  std::uint64_t p4_bytes = 0;
  double model_bytes_per_place = 0.0;

  std::uint64_t total_bytes() const { return p1_bytes + p2_bytes + p3_bytes + p4_bytes; }
  double total_megabytes() const { return static_cast<double>(total_bytes()) / 1e6; }
};

StorageReport storage_report(const StorageConfig& cfg);

/// Serialized sizes of the same four parts, for comparison with the model.
struct MeasuredStorage {
  std::uint64_t p1_bytes = 0;  // bucket section of the index file
  std::uint64_t p2_bytes = 0;
  std::uint64_t p3_bytes = 0;
  std::uint64_t p4_bytes = 0;
  std::uint64_t index_file_bytes = 0;
};

MeasuredStorage measured_storage(const InvertedIndex& idx, const Quantizer& qz,
                                 std::size_t input_dims);

// --- operation counts -----------------------------------------------------

enum class System { proposed, baseline };

const char* to_string(System s);

struct OpConfig {
  std::size_t input_dims = 96;      // D
  std::size_t dims = 0;             // d
  std::size_t k = 2;                // K
  std::uint64_t ref_count = 0;      // N_x
  std::uint64_t candidates = 0;     // N_r
  std::uint64_t new_pairs = 1;      // L'
  std::size_t precision = 64;       // p, 32 or 64
};

/// Unitary operations (additions and multiplications) per query frame.
struct OpCount {
  std::uint64_t pca_ops = 0;     // D + d(2D - 1)
  std::uint64_t quant_ops = 0;   // d(2K - 1), proposed only
  std::uint64_t hash_ops = 0;    // 2d - 1, proposed only
  std::uint64_t lookup_ops = 0;  // 3 d N_x for the baseline's linear scan
  double seq_ops = 0.0;          // L' N_r (d/p + d - 1) proposed, 3 N_r - 1 baseline

  double total() const {
    return static_cast<double>(pca_ops + quant_ops + hash_ops + lookup_ops) + seq_ops;
  }
};

OpCount op_count(const OpConfig& cfg, System system);

/// Matches per second a device sustaining `ops_per_second` could serve.
inline double throughput_hz(double ops_per_second, double ops_per_query) {
  return ops_per_second / ops_per_query;
}

// --- cluster balance ------------------------------------------------------

struct ClusterBalance {
  std::size_t k = 0;
  /// fractions[j][b]: share of references in bin b of dimension j.
  std::vector<std::vector<double>> fractions;
  /// max_b |fractions[j][b] - 1/K|
  std::vector<double> imbalance;
  /// Dimension uses a single bin only.
  std::vector<bool> degenerate;

  /// Largest imbalance over the first `dims` dimensions.
  double max_imbalance(std::size_t dims) const;
};

/// Bin occupancy derived from the addresses stored in the index.
ClusterBalance cluster_balance(const InvertedIndex& idx, const Quantizer& qz);
/// Same, recomputed from projected references (must agree with the index).
ClusterBalance cluster_balance(const InvertedIndex& idx, const Quantizer& qz,
                               const DescriptorMatrix& refs_projected);

// --- reports --------------------------------------------------------------

struct OpReportRow {
  std::string label;
  System system = System::proposed;
  OpConfig config;
  OpCount count;
};

struct StorageReportRow {
  std::string label;
  StorageConfig config;
  StorageReport model;
  std::optional<MeasuredStorage> measured;
};

/// Writes recall.csv (dataset,L,noise_scale,d,K,radius,recall,mean_Nr),
/// recall.svg, storage.csv and ops.csv into out_dir. Output bytes depend only
/// on the inputs.
void emit_report(std::span<const RecallCurve> curves, std::span<const StorageReportRow> storage,
                 std::span<const OpReportRow> ops, const std::filesystem::path& out_dir);

std::string recall_csv(std::span<const RecallCurve> curves);
std::string recall_svg(std::span<const RecallCurve> curves);

}  // namespace coarsehash
