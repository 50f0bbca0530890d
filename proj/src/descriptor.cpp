#include "coarsehash/descriptor.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "bytes.hpp"
#include "coarsehash/common.hpp"

namespace coarsehash {

namespace fs = std::filesystem;
using nlohmann::json;

DescriptorMatrix::DescriptorMatrix(std::size_t rows, std::size_t dims, std::vector<float> data,
                                   std::string tag)
    : source_tag(std::move(tag)), rows_(rows), dims_(dims), data_(std::move(data)) {
  if (rows_ == 0 || dims_ == 0) {
    throw InvalidArgument("descriptor matrix needs at least one row and one dimension");
  }
  if (data_.size() != rows_ * dims_) {
    throw InvalidArgument("descriptor data size " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(dims_));
  }
  check_finite();
}

DescriptorMatrix DescriptorMatrix::zeros(std::size_t rows, std::size_t dims, std::string tag) {
  if (rows == 0 || dims == 0) {
    throw InvalidArgument("descriptor matrix needs at least one row and one dimension");
  }
  return DescriptorMatrix(rows, dims, std::vector<float>(rows * dims, 0.0f), std::move(tag));
}

DescriptorMatrix DescriptorMatrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > rows_) {
    throw InvalidArgument("row slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") out of range for " + std::to_string(rows_) + " rows");
  }
  std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * dims_),
                         data_.begin() + static_cast<std::ptrdiff_t>(end * dims_));
  DescriptorMatrix m(end - begin, dims_, std::move(out), source_tag);
  m.seed = seed;
  return m;
}

void DescriptorMatrix::check_finite() const {
  for (std::size_t k = 0; k < data_.size(); ++k) {
    if (!std::isfinite(data_[k])) {
      throw InvalidArgument("non-finite descriptor value at row " + std::to_string(k / dims_) +
                            ", dim " + std::to_string(k % dims_));
    }
  }
}

std::vector<double> column_means(const DescriptorMatrix& m) {
  std::vector<double> mean(m.dims(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < m.dims(); ++j) mean[j] += r[j];
  }
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

std::vector<double> column_stds(const DescriptorMatrix& m) {
  const auto mean = column_means(m);
  std::vector<double> ss(m.dims(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < m.dims(); ++j) {
      const double dv = r[j] - mean[j];
      ss[j] += dv * dv;
    }
  }
  if (m.rows() < 2) return std::vector<double>(m.dims(), 0.0);
  for (double& v : ss) v = std::sqrt(v / static_cast<double>(m.rows() - 1));
  return ss;
}

namespace {

fs::path stem_of(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".desc" || ext == ".json") return fs::path(path).replace_extension();
  return path;
}

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  return fs::path(stem.string() + suffix);
}

}  // namespace

void save_descriptors(const DescriptorMatrix& m, const fs::path& stem_in) {
  const auto stem = stem_of(stem_in);
  json header = {
      {"rows", m.rows()},
      {"dims", m.dims()},
      {"source_tag", m.source_tag},
      {"boundary_index", m.boundary_index ? json(*m.boundary_index) : json(nullptr)},
      {"seed", m.seed ? json(*m.seed) : json(nullptr)},
  };
  detail::ByteWriter w;
  w.put_span(m.values());
  const auto bytes = w.take();
  detail::write_file(with_suffix(stem, ".desc"), bytes);
  detail::write_text(with_suffix(stem, ".json"), header.dump(2) + "\n");
}

DescriptorMatrix load_descriptors(const fs::path& path) {
  const auto stem = stem_of(path);
  json header;
  try {
    header = json::parse(detail::read_text(with_suffix(stem, ".json")));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed descriptor header: ") + e.what(), e.byte);
  }
  std::size_t rows = 0, dims = 0;
  try {
    rows = header.at("rows").get<std::size_t>();
    dims = header.at("dims").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("descriptor header: ") + e.what(), 0);
  }
  if (rows == 0 || dims == 0) throw InvalidArgument("descriptor file " + stem.string() + " is empty");

  const auto bytes = detail::read_file(with_suffix(stem, ".desc"));
  if (bytes.size() != rows * dims * sizeof(float)) {
    throw FormatError("descriptor payload has " + std::to_string(bytes.size()) +
                          " bytes, header implies " + std::to_string(rows * dims * sizeof(float)),
                      std::min<std::uint64_t>(bytes.size(), rows * dims * sizeof(float)));
  }
  std::vector<float> data(rows * dims);
  detail::ByteReader r(bytes);
  r.get_into(std::span<float>(data), "descriptor payload");

  DescriptorMatrix m(rows, dims, std::move(data), header.value("source_tag", std::string{}));
  if (header.contains("boundary_index") && !header["boundary_index"].is_null()) {
    m.boundary_index = header["boundary_index"].get<std::size_t>();
  }
  if (header.contains("seed") && !header["seed"].is_null()) {
    m.seed = header["seed"].get<std::uint64_t>();
  }
  return m;
}

}  // namespace coarsehash
