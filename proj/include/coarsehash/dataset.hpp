#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "coarsehash/descriptor.hpp"

namespace coarsehash {

/// Shape of the synthetic traverse. Defaults are the values the bundled
/// recipes and benchmarks were tuned with.
struct TraverseOptions {
  /// Per-dimension scale is (j + 1)^-spectrum_decay.
  double spectrum_decay = 0.5;
  /// Quadratic skew applied to the latent walk: u + skew * (u^2 - 1).
  double skew = 0.2;
  /// Query perturbation amplitude relative to each dimension's scale.
  double perturbation = 0.3;
  /// AR(1) coefficient of the query perturbation along the traverse.
  double perturbation_smoothness = 0.8;
};

/// Synthetic traverse pair: reference and a revisit whose row i corresponds to
/// reference row i. Adjacent reference rows follow an AR(1) walk with
/// coefficient `smoothness` in [0, 1).
std::pair<DescriptorMatrix, DescriptorMatrix> generate_traverse(std::size_t count, std::size_t dims,
                                                                double smoothness,
                                                                std::uint64_t seed,
                                                                const TraverseOptions& opts = {});

/// Unordered i.i.d. Gaussian pool with per-dimension scales
/// (j + 1)^-spectrum_decay. Stand-in for a shuffled retrieval corpus.
DescriptorMatrix generate_pool(std::size_t count, std::size_t dims, double spectrum_decay,
                               std::uint64_t seed);

/// Sliding-window mean over w consecutive rows. The window is centred on each
/// row (rows i - w/2 .. i + (w-1)/2 for even w) and shifted inward at the
/// ends so every output row averages exactly w input rows.
DescriptorMatrix homogenize(const DescriptorMatrix& m, std::size_t w);

/// Affine per-column rescale so each column's sample std equals target_std,
/// keeping column means.
DescriptorMatrix rescale_variance(const DescriptorMatrix& src, std::span<const double> target_std);

struct NoiseModel {
  std::vector<double> mean;
  std::vector<double> std;
  double scale = 1.0;
};

/// Mean and standard deviation of ref_b - query_b per dimension. Variance uses
/// the population (1/N) normalisation.
NoiseModel fit_noise_model(const DescriptorMatrix& ref_b, const DescriptorMatrix& query_b,
                           double scale);

/// m + Normal(mean, (scale * std)^2), independently per entry.
DescriptorMatrix apply_noise(const DescriptorMatrix& m, const NoiseModel& nm, std::uint64_t seed);

/// Rows of a then rows of b. The result's boundary_index is a.rows().
DescriptorMatrix concat(const DescriptorMatrix& a, const DescriptorMatrix& b);

/// Construction recipe for a two-part localization dataset: part A is a
/// homogenized unordered pool, part B a sequential traverse.
struct DatasetRecipe {
  std::size_t ref_count_a = 10'000;
  std::size_t ref_count_b = 10'000;
  std::size_t query_count_b = 10'000;
  std::size_t window_w = 40;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t target_dims = 96;

  /// Throws InvalidArgument naming the first offending field.
  void validate() const;
  std::size_t total_references() const { return ref_count_a + ref_count_b; }
};

/// Knobs of the construction that are not part of the recipe file.
struct BuildOptions {
  /// Align part-A column stds with part B before concatenation.
  bool rescale_variance = true;
  double traverse_smoothness = 0.95;
  double pool_spectrum_decay = 0.1;
  TraverseOptions traverse{};
};

struct LocalizationDataset {
  DescriptorMatrix reference;
  DescriptorMatrix query;
  /// First reference (and query) row of part B.
  std::size_t boundary = 0;
  NoiseModel noise;

  /// Query row t is a revisit of reference row t.
  std::size_t truth(std::size_t query_row) const { return query_row; }
  /// [begin, end) of the part containing query row t.
  std::pair<std::size_t, std::size_t> part_of(std::size_t query_row) const {
    return query_row < boundary ? std::pair{std::size_t{0}, boundary}
                                : std::pair{boundary, query.rows()};
  }
};

/// Runs the full construction: pool -> homogenize -> PCA; traverse -> PCA;
/// variance alignment; noise model from the traverse pairs; noisy part-A
/// queries; concatenation. Pure function of (recipe, options).
LocalizationDataset build_dataset(const DatasetRecipe& recipe, const BuildOptions& opts = {});

/// Parses a recipe JSON file; every DatasetRecipe field is required.
DatasetRecipe load_recipe(const std::filesystem::path& path);
DatasetRecipe parse_recipe(const std::string& json_text);

}  // namespace coarsehash
