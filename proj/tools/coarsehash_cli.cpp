// coarsehash: dataset generation, training, querying and benchmarking.
//
// Exit codes: 0 success, 2 input error, 3 data degeneracy, 4 I/O failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "coarsehash/dataset.hpp"
#include "coarsehash/eval.hpp"
#include "coarsehash/experiment.hpp"
#include "coarsehash/hashindex.hpp"
#include "coarsehash/quantizer.hpp"
#include "coarsehash/seqmatch.hpp"
#include "coarsehash/transform.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace coarsehash;

namespace {

enum ExitCode { kOk = 0, kInputError = 2, kDegenerate = 3, kIoError = 4 };

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct GenDataArgs {
  std::string recipe;
  std::string out;
  std::optional<double> noise_scale;
  std::optional<std::uint64_t> seed;
  bool no_rescale = false;
};

int cmd_gen_data(const GenDataArgs& a) {
  auto recipe = load_recipe(a.recipe);
  if (a.noise_scale) recipe.noise_scale = *a.noise_scale;
  if (a.seed) recipe.seed = *a.seed;
  recipe.validate();
  BuildOptions opts;
  opts.rescale_variance = !a.no_rescale;
  const auto ds = build_dataset(recipe, opts);

  const fs::path out(a.out);
  ensure_dir(out);
  save_descriptors(ds.reference, out / "reference");
  save_descriptors(ds.query, out / "query");
  write_json(out / "recipe.json", {{"ref_count_a", recipe.ref_count_a},
                                   {"ref_count_b", recipe.ref_count_b},
                                   {"query_count_b", recipe.query_count_b},
                                   {"window_w", recipe.window_w},
                                   {"noise_scale", recipe.noise_scale},
                                   {"seed", recipe.seed},
                                   {"target_dims", recipe.target_dims}});
  write_json(out / "noise_model.json",
             {{"mean", ds.noise.mean}, {"std", ds.noise.std}, {"scale", ds.noise.scale}});
  std::cout << "reference " << ds.reference.rows() << "x" << ds.reference.dims() << ", query "
            << ds.query.rows() << "x" << ds.query.dims() << ", boundary " << ds.boundary << "\n";
  return kOk;
}

struct TrainArgs {
  std::string ref;
  std::size_t d = 15;
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  checked_address_space(a.k, a.d);
  const auto reference = load_descriptors(a.ref);
  const auto sys = train_system(reference, a.d, a.k, a.seed);
  const fs::path out(a.out);
  ensure_dir(out);
  save_pca(sys.pca, out / "pca");
  save_quantizer(sys.quantizer, out / "quantizer");
  sys.index.save_file(out / "index.chix");
  const auto model = storage_report({reference.rows(), reference.dims(), a.d, a.k});
  const auto disk = measured_storage(sys.index, sys.quantizer, reference.dims());
  write_json(out / "train.json", {{"N_x", reference.rows()},
                                  {"D", reference.dims()},
                                  {"d", a.d},
                                  {"K", a.k},
                                  {"H_o", sys.index.occupied_count()},
                                  {"model_total_bytes", model.total_bytes()},
                                  {"disk_p1_bytes", disk.p1_bytes},
                                  {"disk_index_bytes", disk.index_file_bytes}});
  std::cout << "N_x " << reference.rows() << ", occupied addresses " << sys.index.occupied_count()
            << " of " << sys.quantizer.address_space() << "\n";
  return kOk;
}

struct QueryArgs {
  std::string index_dir;
  std::string queries;
  std::size_t length = 50;
  std::size_t stride = 10;
  std::string out;
};

int cmd_query(const QueryArgs& a) {
  const fs::path dir(a.index_dir);
  TrainedSystem sys{load_pca(dir / "pca"), load_quantizer(dir / "quantizer"),
                    InvertedIndex::load_file(dir / "index.chix")};
  const auto queries = load_descriptors(a.queries);
  QueryPlan plan{a.length, a.stride, queries.boundary_index.value_or(0)};
  const auto outcomes = evaluate_proposed(sys, queries, plan);

  std::ostringstream csv;
  csv << "query,truth,best,score,N_r,fallback\n";
  for (const auto& o : outcomes) {
    char score[32];
    std::snprintf(score, sizeof(score), "%.6f", o.score);
    csv << o.query << ',' << o.truth << ',' << o.best << ',' << score << ',' << o.candidates << ','
        << (o.fallback ? 1 : 0) << '\n';
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  std::ofstream f(out);
  if (!f) throw IoError("cannot write " + out.string());
  f << csv.str();

  const auto pairs = selected_pairs(outcomes);
  std::cout << "queries " << outcomes.size() << ", mean N_r " << mean_candidates(outcomes)
            << ", recall@0 " << recall_at(pairs, 0) << ", recall@20 " << recall_at(pairs, 20) << "\n";
  return kOk;
}

struct BenchArgs {
  std::string config;
  std::string out;
  std::optional<std::size_t> d, k, length, stride;
  std::optional<double> noise_scale;
  std::optional<std::uint64_t> seed;
};

int cmd_bench(const BenchArgs& a) {
  auto cfg = parse_bench_config(slurp(a.config));
  if (a.d) cfg.dims = *a.d;
  if (a.k) cfg.k = *a.k;
  if (a.length) cfg.lengths = {*a.length};
  if (a.stride) cfg.stride = *a.stride;
  if (a.noise_scale) cfg.noise_scales = {*a.noise_scale};
  if (a.seed) cfg.recipe.seed = *a.seed;
  const auto result = run_bench(cfg);
  emit_report(result.curves, result.storage, result.ops, a.out);
  for (const auto& c : result.curves) {
    std::cout << c.meta.dataset << ' ' << c.meta.system << " L=" << c.meta.length
              << " noise=" << c.meta.noise_scale << " mean_Nr=" << c.meta.mean_candidates
              << " recall@0=" << c.at(0) << " recall@" << c.radii.back() << "=" << c.recall.back()
              << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse scalar-quantization hashing with sequence-based disambiguation"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Build a synthetic two-part localization dataset");
  gen_cmd->add_option("--recipe", gen.recipe, "Recipe JSON")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--noise-scale", gen.noise_scale, "Override the recipe noise scale");
  gen_cmd->add_option("--seed", gen.seed, "Override the recipe seed");
  gen_cmd->add_flag("--no-rescale", gen.no_rescale, "Skip part-A variance alignment");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit PCA, quantizer and inverted index");
  train_cmd->add_option("--ref", train.ref, "Reference descriptors (.desc/.json stem)")->required();
  train_cmd->add_option("--d", train.d, "Retained PCA components")->capture_default_str();
  train_cmd->add_option("--K", train.k, "Clusters per dimension")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Quantizer seed")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Model directory")->required();

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Match query sequences against a trained index");
  query_cmd->add_option("--index", query.index_dir, "Model directory from `train`")->required();
  query_cmd->add_option("--queries", query.queries, "Query descriptors")->required();
  query_cmd->add_option("--L", query.length, "Sequence length")->capture_default_str();
  query_cmd->add_option("--stride", query.stride, "Evaluate every z-th query")->capture_default_str();
  query_cmd->add_option("--out", query.out, "Match CSV")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Paired proposed/baseline evaluation and report");
  bench_cmd->add_option("--config", bench.config, "Bench config JSON")->required();
  bench_cmd->add_option("--out", bench.out, "Report directory")->required();
  bench_cmd->add_option("--d", bench.d, "Override d");
  bench_cmd->add_option("--K", bench.k, "Override K");
  bench_cmd->add_option("--L", bench.length, "Run a single sequence length");
  bench_cmd->add_option("--stride", bench.stride, "Override query stride");
  bench_cmd->add_option("--noise-scale", bench.noise_scale, "Run a single noise scale");
  bench_cmd->add_option("--seed", bench.seed, "Override the recipe seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(train);
    if (*query_cmd) return cmd_query(query);
    if (*bench_cmd) return cmd_bench(bench);
  } catch (const DegenerateInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
