#include "coarsehash/transform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "bytes.hpp"
#include "coarsehash/common.hpp"

namespace coarsehash {

namespace fs = std::filesystem;
using nlohmann::json;

void PcaModel::project_row(std::span<const float> x, std::span<double> out) const {
  if (x.size() != input_dims) {
    throw InvalidArgument("projection input has " + std::to_string(x.size()) +
                          " dims, model expects " + std::to_string(input_dims));
  }
  if (out.size() != output_dims) throw InvalidArgument("projection output has wrong length");
  for (std::size_t k = 0; k < output_dims; ++k) {
    const double* c = components.data() + k * input_dims;
    double acc = 0.0;
    for (std::size_t j = 0; j < input_dims; ++j) acc += c[j] * (static_cast<double>(x[j]) - mean[j]);
    out[k] = acc;
  }
}

std::size_t default_pca_batch(std::size_t d) { return std::max<std::size_t>(1024, 4 * d); }

PcaModel fit_incremental(const DescriptorMatrix& data, std::size_t d, std::size_t batch) {
  const std::size_t n = data.rows();
  const std::size_t dims = data.dims();
  if (d == 0) throw InvalidArgument("PCA needs at least one component");
  if (d > dims) {
    throw InvalidArgument("requested " + std::to_string(d) + " components from " +
                          std::to_string(dims) + "-dimensional data");
  }
  if (d > n) {
    throw InvalidArgument("requested " + std::to_string(d) + " components from " +
                          std::to_string(n) + " rows");
  }
  if (batch == 0) batch = default_pca_batch(d);
  if (batch < d) throw InvalidArgument("PCA batch size must be at least d");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims));
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims),
                                                  static_cast<Eigen::Index>(dims));
  double seen = 0.0;

  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t rows = std::min(batch, n - start);
    Eigen::Map<const RowMajorF> block(data.row(start).data(), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(dims));
    Eigen::MatrixXd centered = block.cast<double>();
    const Eigen::VectorXd batch_mean = centered.colwise().mean().transpose();
    centered.rowwise() -= batch_mean.transpose();
    Eigen::MatrixXd batch_scatter = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims),
                                                          static_cast<Eigen::Index>(dims));
    batch_scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    batch_scatter = batch_scatter.selfadjointView<Eigen::Lower>();

    // Chan et al. pairwise merge of (count, mean, scatter).
    const double nb = static_cast<double>(rows);
    const double total = seen + nb;
    const Eigen::VectorXd delta = batch_mean - mean;
    scatter += batch_scatter + (delta * delta.transpose()) * (seen * nb / total);
    mean += delta * (nb / total);
    seen = total;
  }

  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Eigen::MatrixXd cov = scatter / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateInput("PCA eigendecomposition failed");

  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const double largest = std::max(evals(evals.size() - 1), 0.0);
  const double floor = largest * 1e-10;
  std::size_t rank = 0;
  for (Eigen::Index k = 0; k < evals.size(); ++k) {
    if (largest > 0.0 && evals(k) > floor) ++rank;
  }
  if (rank < d) {
    throw DegenerateInput("data supports only " + std::to_string(rank) +
                          " principal components (achievable rank " + std::to_string(rank) +
                          "), requested " + std::to_string(d));
  }

  PcaModel model;
  model.input_dims = dims;
  model.output_dims = d;
  model.trained_on = n;
  model.mean.assign(mean.data(), mean.data() + dims);
  model.components.resize(d * dims);
  model.variances.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const Eigen::Index src = evals.size() - 1 - static_cast<Eigen::Index>(k);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    std::copy(v.data(), v.data() + dims, model.components.begin() + static_cast<std::ptrdiff_t>(k * dims));
    model.variances[k] = evals(src);
  }
  return model;
}

DescriptorMatrix project(const PcaModel& model, const DescriptorMatrix& m) {
  if (m.dims() != model.input_dims) {
    throw InvalidArgument("cannot project " + std::to_string(m.dims()) +
                          "-dimensional descriptors with a model trained on " +
                          std::to_string(model.input_dims));
  }
  const std::size_t d = model.output_dims;
  auto out = DescriptorMatrix::zeros(m.rows(), d, m.source_tag);
  out.boundary_index = m.boundary_index;
  out.seed = m.seed;

  // Blocked GEMM: (rows x D) * (D x d).
  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowMajorD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajorD> comps(model.components.data(), static_cast<Eigen::Index>(d),
                                    static_cast<Eigen::Index>(model.input_dims));
  Eigen::Map<const Eigen::RowVectorXd> mean(model.mean.data(),
                                            static_cast<Eigen::Index>(model.input_dims));
  constexpr std::size_t kBlock = 8192;
  for (std::size_t start = 0; start < m.rows(); start += kBlock) {
    const std::size_t rows = std::min(kBlock, m.rows() - start);
    Eigen::Map<const RowMajorF> in(m.row(start).data(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(model.input_dims));
    Eigen::MatrixXd centered = in.cast<double>();
    centered.rowwise() -= mean;
    const RowMajorD projected = centered * comps.transpose();
    Eigen::Map<RowMajorF> dst(out.mutable_row(start).data(), static_cast<Eigen::Index>(rows),
                              static_cast<Eigen::Index>(d));
    dst = projected.cast<float>();
  }
  return out;
}

namespace {

constexpr char kPcaMagic[] = "CHPCA001";

fs::path suffixed(const fs::path& stem, const char* s) { return fs::path(stem.string() + s); }

}  // namespace

void save_pca(const PcaModel& model, const fs::path& stem) {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kPcaMagic, 8));
  w.put_span(std::span<const double>(model.mean));
  w.put_span(std::span<const double>(model.components));
  w.put_span(std::span<const double>(model.variances));
  const auto bytes = w.take();
  detail::write_file(suffixed(stem, ".bin"), bytes);
  const json header = {{"D", model.input_dims}, {"d", model.output_dims}, {"trained_on", model.trained_on}};
  detail::write_text(suffixed(stem, ".json"), header.dump(2) + "\n");
}

PcaModel load_pca(const fs::path& stem) {
  json header;
  try {
    header = json::parse(detail::read_text(suffixed(stem, ".json")));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed PCA header: ") + e.what(), e.byte);
  }
  PcaModel model;
  try {
    model.input_dims = header.at("D").get<std::size_t>();
    model.output_dims = header.at("d").get<std::size_t>();
    model.trained_on = header.at("trained_on").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("PCA header: ") + e.what(), 0);
  }
  const auto bytes = detail::read_file(suffixed(stem, ".bin"));
  detail::ByteReader r(bytes);
  if (r.get_string(8, "PCA magic") != std::string_view(kPcaMagic, 8)) {
    throw FormatError("not a PCA model file", 0);
  }
  model.mean.resize(model.input_dims);
  model.components.resize(model.input_dims * model.output_dims);
  model.variances.resize(model.output_dims);
  r.get_into(std::span<double>(model.mean), "PCA mean");
  r.get_into(std::span<double>(model.components), "PCA components");
  r.get_into(std::span<double>(model.variances), "PCA variances");
  if (r.remaining() != 0) throw FormatError("trailing bytes after PCA model", r.position());
  return model;
}

}  // namespace coarsehash
