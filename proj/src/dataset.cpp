#include "coarsehash/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "bytes.hpp"
#include "coarsehash/common.hpp"
#include "coarsehash/rng.hpp"
#include "coarsehash/transform.hpp"

namespace coarsehash {

using nlohmann::json;

namespace {

std::vector<double> spectrum(std::size_t dims, double decay) {
  std::vector<double> s(dims);
  for (std::size_t j = 0; j < dims; ++j) s[j] = std::pow(static_cast<double>(j + 1), -decay);
  return s;
}

void require_positive_shape(std::size_t count, std::size_t dims) {
  if (count == 0) throw InvalidArgument("count must be at least 1");
  if (dims == 0) throw InvalidArgument("dims must be at least 1");
}

}  // namespace

std::pair<DescriptorMatrix, DescriptorMatrix> generate_traverse(std::size_t count, std::size_t dims,
                                                                double smoothness,
                                                                std::uint64_t seed,
                                                                const TraverseOptions& opts) {
  require_positive_shape(count, dims);
  if (!(smoothness >= 0.0 && smoothness < 1.0)) {
    throw InvalidArgument("smoothness must lie in [0, 1)");
  }
  if (!(opts.perturbation_smoothness >= 0.0 && opts.perturbation_smoothness < 1.0)) {
    throw InvalidArgument("perturbation_smoothness must lie in [0, 1)");
  }
  const auto scale = spectrum(dims, opts.spectrum_decay);
  const double innovation = std::sqrt(1.0 - smoothness * smoothness);
  const double p_innovation =
      std::sqrt(1.0 - opts.perturbation_smoothness * opts.perturbation_smoothness);
  const double skew_norm = std::sqrt(1.0 + 2.0 * opts.skew * opts.skew);

  Rng walk_rng(derive_seed(seed, 0));
  Rng perturb_rng(derive_seed(seed, 1));
  std::vector<double> latent(dims), perturb(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    latent[j] = walk_rng.normal();
    perturb[j] = perturb_rng.normal();
  }

  auto ref = DescriptorMatrix::zeros(count, dims, "synthB");
  auto query = DescriptorMatrix::zeros(count, dims, "synthB-query");
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) {
      for (std::size_t j = 0; j < dims; ++j) {
        latent[j] = smoothness * latent[j] + innovation * walk_rng.normal();
        perturb[j] = opts.perturbation_smoothness * perturb[j] + p_innovation * perturb_rng.normal();
      }
    }
    auto r = ref.mutable_row(i);
    auto q = query.mutable_row(i);
    for (std::size_t j = 0; j < dims; ++j) {
      const double u = latent[j];
      const double value = scale[j] * (u + opts.skew * (u * u - 1.0)) / skew_norm;
      r[j] = static_cast<float>(value);
      q[j] = static_cast<float>(value + scale[j] * opts.perturbation * perturb[j]);
    }
  }
  ref.seed = seed;
  query.seed = seed;
  return {std::move(ref), std::move(query)};
}

DescriptorMatrix generate_pool(std::size_t count, std::size_t dims, double spectrum_decay,
                               std::uint64_t seed) {
  require_positive_shape(count, dims);
  const auto scale = spectrum(dims, spectrum_decay);
  Rng rng(seed);
  auto pool = DescriptorMatrix::zeros(count, dims, "synthA");
  for (std::size_t i = 0; i < count; ++i) {
    auto r = pool.mutable_row(i);
    for (std::size_t j = 0; j < dims; ++j) r[j] = static_cast<float>(scale[j] * rng.normal());
  }
  pool.seed = seed;
  return pool;
}

DescriptorMatrix homogenize(const DescriptorMatrix& m, std::size_t w) {
  const std::size_t n = m.rows();
  const std::size_t dims = m.dims();
  if (w == 0) throw InvalidArgument("homogenization window must be at least 1");
  if (w > n) {
    throw InvalidArgument("homogenization window " + std::to_string(w) + " exceeds " +
                          std::to_string(n) + " rows");
  }
  auto out = DescriptorMatrix::zeros(n, dims, m.source_tag);
  out.boundary_index = m.boundary_index;
  out.seed = m.seed;

  auto window_start = [&](std::size_t i) {
    const std::size_t back = w / 2;
    const std::size_t start = i >= back ? i - back : 0;
    return std::min(start, n - w);
  };

  std::vector<double> sum(dims, 0.0);
  auto refill = [&](std::size_t start) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t k = start; k < start + w; ++k) {
      const auto r = m.row(k);
      for (std::size_t j = 0; j < dims; ++j) sum[j] += r[j];
    }
  };

  // Running sum, refreshed periodically to stop rounding drift.
  constexpr std::size_t kRefresh = 4096;
  std::size_t start = window_start(0);
  refill(start);
  const double inv = 1.0 / static_cast<double>(w);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t next = window_start(i);
    if (next != start) {
      if (i % kRefresh == 0) {
        refill(next);
      } else {
        for (std::size_t s = start; s < next; ++s) {
          const auto leave = m.row(s);
          const auto enter = m.row(s + w);
          for (std::size_t j = 0; j < dims; ++j) sum[j] += static_cast<double>(enter[j]) - leave[j];
        }
      }
      start = next;
    }
    auto o = out.mutable_row(i);
    for (std::size_t j = 0; j < dims; ++j) o[j] = static_cast<float>(sum[j] * inv);
  }
  return out;
}

DescriptorMatrix rescale_variance(const DescriptorMatrix& src, std::span<const double> target_std) {
  if (target_std.size() != src.dims()) {
    throw InvalidArgument("target std has " + std::to_string(target_std.size()) +
                          " entries for " + std::to_string(src.dims()) + " dims");
  }
  const auto mean = column_means(src);
  const auto stds = column_stds(src);
  std::vector<double> gain(src.dims());
  for (std::size_t j = 0; j < src.dims(); ++j) {
    if (!(stds[j] > 0.0)) {
      throw DegenerateInput("column " + std::to_string(j) + " has zero variance");
    }
    if (!(target_std[j] >= 0.0)) throw InvalidArgument("target std must be non-negative");
    gain[j] = target_std[j] / stds[j];
  }
  DescriptorMatrix out = src;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.mutable_row(i);
    for (std::size_t j = 0; j < out.dims(); ++j) {
      r[j] = static_cast<float>(mean[j] + (static_cast<double>(r[j]) - mean[j]) * gain[j]);
    }
  }
  return out;
}

NoiseModel fit_noise_model(const DescriptorMatrix& ref_b, const DescriptorMatrix& query_b,
                           double scale) {
  if (ref_b.rows() != query_b.rows() || ref_b.dims() != query_b.dims()) {
    throw InvalidArgument("noise model needs paired matrices of equal shape");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("noise scale must be positive");
  const std::size_t n = ref_b.rows();
  const std::size_t dims = ref_b.dims();
  NoiseModel nm;
  nm.scale = scale;
  nm.mean.assign(dims, 0.0);
  nm.std.assign(dims, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = ref_b.row(i);
    const auto y = query_b.row(i);
    for (std::size_t j = 0; j < dims; ++j) nm.mean[j] += static_cast<double>(x[j]) - y[j];
  }
  for (double& v : nm.mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = ref_b.row(i);
    const auto y = query_b.row(i);
    for (std::size_t j = 0; j < dims; ++j) {
      const double dv = static_cast<double>(x[j]) - y[j] - nm.mean[j];
      nm.std[j] += dv * dv;
    }
  }
  for (double& v : nm.std) v = std::sqrt(v / static_cast<double>(n));
  return nm;
}

DescriptorMatrix apply_noise(const DescriptorMatrix& m, const NoiseModel& nm, std::uint64_t seed) {
  if (nm.mean.size() != m.dims() || nm.std.size() != m.dims()) {
    throw InvalidArgument("noise model has " + std::to_string(nm.mean.size()) +
                          " dims, descriptors have " + std::to_string(m.dims()));
  }
  Rng rng(seed);
  DescriptorMatrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.mutable_row(i);
    for (std::size_t j = 0; j < out.dims(); ++j) {
      const double z = rng.normal();
      r[j] = static_cast<float>(static_cast<double>(r[j]) + nm.mean[j] + nm.scale * nm.std[j] * z);
    }
  }
  out.check_finite();
  return out;
}

DescriptorMatrix concat(const DescriptorMatrix& a, const DescriptorMatrix& b) {
  if (a.dims() != b.dims()) {
    throw InvalidArgument("cannot concatenate " + std::to_string(a.dims()) + "-dim and " +
                          std::to_string(b.dims()) + "-dim descriptors");
  }
  std::vector<float> data;
  data.reserve(a.values().size() + b.values().size());
  data.insert(data.end(), a.values().begin(), a.values().end());
  data.insert(data.end(), b.values().begin(), b.values().end());
  DescriptorMatrix out(a.rows() + b.rows(), a.dims(), std::move(data),
                       a.source_tag + "+" + b.source_tag);
  out.boundary_index = a.rows();
  out.seed = a.seed;
  return out;
}

void DatasetRecipe::validate() const {
  if (target_dims == 0) throw InvalidArgument("recipe field 'target_dims' must be positive");
  if (ref_count_a <= target_dims) {
    throw InvalidArgument("recipe field 'ref_count_a' must exceed target_dims");
  }
  if (ref_count_b <= target_dims) {
    throw InvalidArgument("recipe field 'ref_count_b' must exceed target_dims");
  }
  if (query_count_b == 0 || query_count_b > ref_count_b) {
    throw InvalidArgument("recipe field 'query_count_b' must lie in [1, ref_count_b]");
  }
  if (window_w == 0 || window_w > ref_count_a) {
    throw InvalidArgument("recipe field 'window_w' must lie in [1, ref_count_a]");
  }
  if (!(noise_scale > 0.0) || !std::isfinite(noise_scale)) {
    throw InvalidArgument("recipe field 'noise_scale' must be positive");
  }
}

LocalizationDataset build_dataset(const DatasetRecipe& recipe, const BuildOptions& opts) {
  recipe.validate();
  const std::size_t dims = recipe.target_dims;

  DescriptorMatrix part_a = [&] {
    const auto pool = generate_pool(recipe.ref_count_a, dims, opts.pool_spectrum_decay,
                                    derive_seed(recipe.seed, 1));
    const auto smooth = homogenize(pool, recipe.window_w);
    const auto pca = fit_incremental(smooth, dims);
    return project(pca, smooth);
  }();

  auto [ref_b_raw, query_b_raw] = generate_traverse(
      recipe.ref_count_b, dims, opts.traverse_smoothness, derive_seed(recipe.seed, 2), opts.traverse);
  const auto pca_b = fit_incremental(ref_b_raw, dims);
  const auto ref_b = project(pca_b, ref_b_raw);
  const auto query_b = project(pca_b, query_b_raw);

  if (opts.rescale_variance) part_a = rescale_variance(part_a, column_stds(ref_b));

  NoiseModel noise = fit_noise_model(ref_b, query_b, recipe.noise_scale);
  auto query_a = apply_noise(part_a, noise, derive_seed(recipe.seed, 3));

  part_a.source_tag = "synthA";
  query_a.source_tag = "synthA-query";
  auto reference = concat(part_a, ref_b);
  auto query = concat(query_a, query_b.slice_rows(0, recipe.query_count_b));
  reference.seed = recipe.seed;
  query.seed = recipe.seed;
  return LocalizationDataset{std::move(reference), std::move(query), recipe.ref_count_a,
                             std::move(noise)};
}

DatasetRecipe parse_recipe(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("recipe is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("recipe must be a JSON object");

  auto field = [&](const char* name) -> const json& {
    if (!j.contains(name)) throw InvalidArgument(std::string("recipe field '") + name + "' missing");
    return j.at(name);
  };
  auto count = [&](const char* name) -> std::size_t {
    const json& v = field(name);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw InvalidArgument(std::string("recipe field '") + name + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };

  DatasetRecipe r;
  r.ref_count_a = count("ref_count_a");
  r.ref_count_b = count("ref_count_b");
  r.query_count_b = count("query_count_b");
  r.window_w = count("window_w");
  r.target_dims = count("target_dims");
  const json& scale = field("noise_scale");
  if (!scale.is_number()) throw InvalidArgument("recipe field 'noise_scale' must be a number");
  r.noise_scale = scale.get<double>();
  const json& seed = field("seed");
  if (!seed.is_number_integer()) throw InvalidArgument("recipe field 'seed' must be an integer");
  r.seed = seed.get<std::uint64_t>();
  r.validate();
  return r;
}

DatasetRecipe load_recipe(const std::filesystem::path& path) {
  return parse_recipe(detail::read_text(path));
}

}  // namespace coarsehash
