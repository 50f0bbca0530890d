#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "coarsehash/dataset.hpp"
#include "coarsehash/eval.hpp"
#include "coarsehash/experiment.hpp"
#include "coarsehash/hashindex.hpp"
#include "coarsehash/quantizer.hpp"
#include "coarsehash/seqmatch.hpp"
#include "coarsehash/transform.hpp"

namespace py = pybind11;
using namespace coarsehash;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IndexArray = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

DescriptorMatrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto dims = static_cast<std::size_t>(a.shape(1));
  return DescriptorMatrix(rows, dims, std::vector<float>(a.data(), a.data() + rows * dims));
}

py::array_t<float> to_array(const DescriptorMatrix& m) {
  py::array_t<float> out({m.rows(), m.dims()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<QuantVector> to_quant_rows(const IndexArray& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array of quantization indices");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto dims = static_cast<std::size_t>(a.shape(1));
  std::vector<QuantVector> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i].assign(a.data() + i * dims, a.data() + (i + 1) * dims);
  return out;
}

py::array_t<std::uint32_t> quantize_all(const Quantizer& qz, const FloatArray& a) {
  const auto m = to_matrix(a);
  if (m.dims() != qz.dims()) throw InvalidArgument("array width does not match the quantizer");
  py::array_t<std::uint32_t> out({m.rows(), m.dims()});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    qz.quantize_into(m.row(i), std::span<std::uint32_t>(out.mutable_data() + i * m.dims(), m.dims()));
  }
  return out;
}

py::dict match_dict(const SequenceMatch& m) {
  py::dict d;
  d["best"] = m.best;
  d["score"] = m.score;
  d["candidates"] = m.candidates_probed;
  d["fallback"] = m.center_fallback;
  return d;
}

py::dict curve_dict(const RecallCurve& c) {
  py::dict d;
  d["radii"] = c.radii;
  d["recall"] = c.recall;
  return d;
}

std::vector<MatchPair> to_pairs(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& returned) {
  if (truth.size() != returned.size()) throw InvalidArgument("truth and returned lengths differ");
  std::vector<MatchPair> pairs(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) pairs[i] = MatchPair{truth[i], returned[i]};
  return pairs;
}

}  // namespace

PYBIND11_MODULE(_coarsehash, m) {
  m.doc() = "Coarse scalar-quantization hashing with sequence matching";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DegenerateInput>(m, "DegenerateInput", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "build_dataset",
      [](std::size_t ref_count_a, std::size_t ref_count_b, std::size_t query_count_b, std::size_t window_w,
         double noise_scale, std::uint64_t seed, std::size_t target_dims, bool rescale) {
        DatasetRecipe r;
        r.ref_count_a = ref_count_a;
        r.ref_count_b = ref_count_b;
        r.query_count_b = query_count_b;
        r.window_w = window_w;
        r.noise_scale = noise_scale;
        r.seed = seed;
        r.target_dims = target_dims;
        BuildOptions opts;
        opts.rescale_variance = rescale;
        const auto ds = build_dataset(r, opts);
        py::dict d;
        d["reference"] = to_array(ds.reference);
        d["query"] = to_array(ds.query);
        d["boundary"] = ds.boundary;
        d["noise_mean"] = ds.noise.mean;
        d["noise_std"] = ds.noise.std;
        return d;
      },
      py::arg("ref_count_a"), py::arg("ref_count_b"), py::arg("query_count_b"), py::arg("window_w") = 40,
      py::arg("noise_scale") = 1.0, py::arg("seed") = 0, py::arg("target_dims") = 96,
      py::arg("rescale") = true,
      "Two-part reference/query dataset; query row t revisits reference row t.");

  py::class_<PcaModel>(m, "Pca")
      .def_static(
          "fit",
          [](const FloatArray& data, std::size_t d, std::size_t batch) {
            return fit_incremental(to_matrix(data), d, batch);
          },
          py::arg("data"), py::arg("d"), py::arg("batch") = 0)
      .def("project", [](const PcaModel& p, const FloatArray& a) { return to_array(project(p, to_matrix(a))); })
      .def_readonly("mean", &PcaModel::mean)
      .def_readonly("variances", &PcaModel::variances)
      .def_property_readonly("components",
                             [](const PcaModel& p) {
                               py::array_t<double> out({p.output_dims, p.input_dims});
                               std::copy(p.components.begin(), p.components.end(), out.mutable_data());
                               return out;
                             })
      .def("save", [](const PcaModel& p, const std::filesystem::path& stem) { save_pca(p, stem); })
      .def_static("load", &load_pca);

  py::class_<Quantizer>(m, "Quantizer")
      .def_static(
          "fit",
          [](const FloatArray& data, std::size_t k, std::uint64_t seed) {
            return fit_quantizer(to_matrix(data), k, seed);
          },
          py::arg("data"), py::arg("k") = 2, py::arg("seed") = 0)
      .def_property_readonly("d", &Quantizer::dims)
      .def_property_readonly("k", &Quantizer::k)
      .def_property_readonly("address_space", &Quantizer::address_space)
      .def_property_readonly("centers",
                             [](const Quantizer& q) {
                               py::array_t<double> out({q.dims(), q.k()});
                               std::copy(q.all_centers().begin(), q.all_centers().end(), out.mutable_data());
                               return out;
                             })
      .def("quantize", &quantize_all, "Per-row quantization indices (N x d).")
      .def("hash", [](const Quantizer& q, const QuantVector& v) { return q.hash(v); })
      .def("unhash", [](const Quantizer& q, HashAddress h) { return q.unhash(h); })
      .def("sdc", [](const Quantizer& q, const QuantVector& a, const QuantVector& b) {
        return sdc_distance(q, a, b);
      });

  py::class_<InvertedIndex>(m, "Index")
      .def_static("build", [](const FloatArray& refs, const Quantizer& q) {
        return InvertedIndex::build(to_matrix(refs), q);
      })
      .def_property_readonly("ref_count", &InvertedIndex::ref_count)
      .def_property_readonly("occupied_count", &InvertedIndex::occupied_count)
      .def("lookup",
           [](const InvertedIndex& idx, HashAddress h) {
             const auto r = idx.lookup(h);
             return py::make_tuple(r.resolved, std::vector<RefIndex>(r.candidates.begin(), r.candidates.end()),
                                   r.fallback);
           })
      .def("query_single", &InvertedIndex::query_single)
      .def("save", &InvertedIndex::save_file)
      .def_static("load", &InvertedIndex::load_file);

  m.def(
      "match_sequence",
      [](const InvertedIndex& idx, const Quantizer& q, const IndexArray& window) {
        const auto frames = to_quant_rows(window);
        return match_dict(match_sequence(idx, q, frames, frames.size()));
      },
      py::arg("index"), py::arg("quantizer"), py::arg("window"),
      "Best reference for an L x d window of quantized frames, centred on frame L // 2.");

  py::class_<SequenceMatcher>(m, "SequenceMatcher")
      .def(py::init<const InvertedIndex&, const Quantizer&, std::size_t>(), py::keep_alive<1, 2>(),
           py::keep_alive<1, 3>(), py::arg("index"), py::arg("quantizer"), py::arg("length"))
      .def("push",
           [](SequenceMatcher& sm, const QuantVector& q) -> py::object {
             const auto out = sm.push(q);
             if (!out) return py::none();
             return match_dict(*out);
           })
      .def("reset", &SequenceMatcher::reset)
      .def_property_readonly("frames_seen", &SequenceMatcher::frames_seen);

  py::class_<TrainedSystem>(m, "System")
      .def_static(
          "train",
          [](const FloatArray& refs, std::size_t d, std::size_t k, std::uint64_t seed) {
            return train_system(to_matrix(refs), d, k, seed);
          },
          py::arg("reference"), py::arg("d"), py::arg("k") = 2, py::arg("seed") = 0)
      .def_readonly("pca", &TrainedSystem::pca)
      .def_readonly("quantizer", &TrainedSystem::quantizer)
      .def_readonly("index", &TrainedSystem::index)
      .def(
          "evaluate",
          [](const TrainedSystem& sys, const FloatArray& queries, std::size_t length, std::size_t stride,
             std::size_t boundary) {
            const auto outcomes = evaluate_proposed(sys, to_matrix(queries), QueryPlan{length, stride, boundary});
            py::list out;
            for (const auto& o : outcomes) {
              py::dict d;
              d["query"] = o.query;
              d["truth"] = o.truth;
              d["best"] = o.best;
              d["score"] = o.score;
              d["candidates"] = o.candidates;
              d["fallback"] = o.fallback;
              out.append(d);
            }
            return out;
          },
          py::arg("queries"), py::arg("length") = 50, py::arg("stride") = 10, py::arg("boundary") = 0,
          "Windowed queries at rows 0, stride, 2 stride, ...");

  m.def(
      "recall_at",
      [](const std::vector<std::size_t>& truth, const std::vector<std::size_t>& returned, std::size_t radius) {
        const auto pairs = to_pairs(truth, returned);
        return recall_at(pairs, radius);
      },
      py::arg("truth"), py::arg("returned"), py::arg("radius"));
  m.def(
      "recall_curve",
      [](const std::vector<std::size_t>& truth, const std::vector<std::size_t>& returned, std::size_t max_radius) {
        const auto pairs = to_pairs(truth, returned);
        return curve_dict(recall_curve(pairs, max_radius, {}));
      },
      py::arg("truth"), py::arg("returned"), py::arg("max_radius") = 20);

  m.def(
      "storage_report",
      [](std::uint64_t n, std::size_t input_dims, std::size_t d, std::size_t k) {
        const auto r = storage_report(StorageConfig{n, input_dims, d, k});
        py::dict out;
        out["p1_bytes"] = r.p1_bytes;
        out["p2_bytes"] = r.p2_bytes;
        out["p3_bytes"] = r.p3_bytes;
        out["p4_bytes"] = r.p4_bytes;
        out["total_bytes"] = r.total_bytes();
        out["total_megabytes"] = r.total_megabytes();
        return out;
      },
      py::arg("ref_count"), py::arg("input_dims"), py::arg("d"), py::arg("k") = 2);

  m.def(
      "op_count",
      [](const std::string& system, std::size_t input_dims, std::size_t d, std::size_t k, std::uint64_t ref_count,
         std::uint64_t candidates, std::uint64_t new_pairs, std::size_t precision) {
        System s;
        if (system == "proposed") {
          s = System::proposed;
        } else if (system == "baseline") {
          s = System::baseline;
        } else {
          throw InvalidArgument("system must be 'proposed' or 'baseline'");
        }
        const auto c = op_count(OpConfig{input_dims, d, k, ref_count, candidates, new_pairs, precision}, s);
        py::dict out;
        out["pca"] = c.pca_ops;
        out["quant"] = c.quant_ops;
        out["hash"] = c.hash_ops;
        out["lookup"] = c.lookup_ops;
        out["seq"] = c.seq_ops;
        out["total"] = c.total();
        return out;
      },
      py::arg("system"), py::arg("input_dims"), py::arg("d"), py::arg("k") = 2, py::arg("ref_count") = 0,
      py::arg("candidates") = 0, py::arg("new_pairs") = 1, py::arg("precision") = 64);
}
