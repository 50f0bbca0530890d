#include "coarsehash/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bytes.hpp"

namespace coarsehash {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

}  // namespace

double recall_at(std::span<const MatchPair> matches, std::size_t radius) {
  if (matches.empty()) throw InvalidArgument("recall needs at least one match");
  std::size_t correct = 0;
  for (const auto& m : matches) {
    const std::size_t gap = m.truth > m.returned ? m.truth - m.returned : m.returned - m.truth;
    if (gap <= radius) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(matches.size());
}

RecallCurve recall_curve(std::span<const MatchPair> matches, std::size_t max_radius, CurveMeta meta) {
  RecallCurve curve;
  curve.meta = std::move(meta);
  for (std::size_t r = 0; r <= max_radius; ++r) {
    curve.radii.push_back(r);
    curve.recall.push_back(recall_at(matches, r));
  }
  return curve;
}

StorageReport storage_report(const StorageConfig& cfg) {
  constexpr std::uint64_t kWord = 8;
  StorageReport r;
  r.p1_bytes = kWord * cfg.ref_count;
  r.p2_bytes = kWord * cfg.dims * cfg.k;
  r.p3_bytes = kWord * cfg.dims * cfg.input_dims;
  r.p4_bytes = kWord * cfg.input_dims;
  r.model_bytes_per_place =
      cfg.ref_count > 0 ? static_cast<double>(r.total_bytes()) / static_cast<double>(cfg.ref_count) : 0.0;
  return r;
}

MeasuredStorage measured_storage(const InvertedIndex& idx, const Quantizer& qz,
                                 std::size_t input_dims) {
  MeasuredStorage m;
  m.p1_bytes = idx.p1_section_bytes();
  m.p2_bytes = qz.all_centers().size() * sizeof(double);
  m.p3_bytes = static_cast<std::uint64_t>(qz.dims()) * input_dims * sizeof(double);
  m.p4_bytes = static_cast<std::uint64_t>(input_dims) * sizeof(double);
  m.index_file_bytes = idx.save().size();
  return m;
}

const char* to_string(System s) { return s == System::proposed ? "proposed" : "baseline"; }

OpCount op_count(const OpConfig& cfg, System system) {
  if (cfg.precision != 32 && cfg.precision != 64) {
    throw InvalidArgument("precision must be 32 or 64 bits");
  }
  const std::uint64_t big_d = cfg.input_dims;
  const std::uint64_t d = cfg.dims;
  const std::uint64_t k = cfg.k;
  OpCount c;
  // Mean subtraction plus the d x D matrix-vector product.
  c.pca_ops = big_d + d * (2 * big_d - 1);
  if (system == System::proposed) {
    c.quant_ops = d * (2 * k - 1);
    c.hash_ops = 2 * d - 1;
    c.lookup_ops = 0;
    // d/p word-level xors plus d - 1 additions per pair.
    const std::uint64_t p = cfg.precision;
    c.seq_ops = static_cast<double>(cfg.new_pairs * cfg.candidates * (d + p * (d - 1))) /
                static_cast<double>(p);
  } else {
    c.lookup_ops = 3 * d * cfg.ref_count;
    // Incremental update of stored cumulative scores.
    c.seq_ops = cfg.candidates > 0 ? static_cast<double>(3 * cfg.candidates - 1) : 0.0;
  }
  return c;
}

double ClusterBalance::max_imbalance(std::size_t dims) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < std::min(dims, imbalance.size()); ++j) worst = std::max(worst, imbalance[j]);
  return worst;
}

namespace {

ClusterBalance finish_balance(std::vector<std::vector<std::uint64_t>> counts, std::size_t n,
                              std::size_t k) {
  ClusterBalance cb;
  cb.k = k;
  for (const auto& row : counts) {
    std::vector<double> f(k);
    double worst = 0.0;
    bool single = false;
    for (std::size_t b = 0; b < k; ++b) {
      f[b] = static_cast<double>(row[b]) / static_cast<double>(n);
      worst = std::max(worst, std::abs(f[b] - 1.0 / static_cast<double>(k)));
      if (row[b] == n) single = true;
    }
    cb.fractions.push_back(std::move(f));
    cb.imbalance.push_back(worst);
    cb.degenerate.push_back(single);
  }
  return cb;
}

}  // namespace

ClusterBalance cluster_balance(const InvertedIndex& idx, const Quantizer& qz) {
  std::vector<std::vector<std::uint64_t>> counts(qz.dims(), std::vector<std::uint64_t>(qz.k(), 0));
  QuantVector q(qz.dims());
  for (std::size_t slot = 0; slot < idx.occupied_count(); ++slot) {
    qz.unhash_into(idx.occupied()[slot], std::span<std::uint32_t>(q));
    const auto members = idx.bucket_at(slot).size();
    for (std::size_t j = 0; j < qz.dims(); ++j) counts[j][q[j]] += members;
  }
  return finish_balance(std::move(counts), idx.ref_count(), qz.k());
}

ClusterBalance cluster_balance(const InvertedIndex& idx, const Quantizer& qz,
                               const DescriptorMatrix& refs_projected) {
  if (refs_projected.rows() != idx.ref_count() || refs_projected.dims() != qz.dims()) {
    throw InvalidArgument("projected references do not match the index");
  }
  std::vector<std::vector<std::uint64_t>> counts(qz.dims(), std::vector<std::uint64_t>(qz.k(), 0));
  QuantVector q(qz.dims());
  for (std::size_t i = 0; i < refs_projected.rows(); ++i) {
    qz.quantize_into(refs_projected.row(i), std::span<std::uint32_t>(q));
    if (qz.hash(q) != idx.address_of(static_cast<RefIndex>(i))) {
      throw InvalidArgument("reference " + std::to_string(i) + " is not stored at its own address");
    }
    for (std::size_t j = 0; j < qz.dims(); ++j) ++counts[j][q[j]];
  }
  return finish_balance(std::move(counts), refs_projected.rows(), qz.k());
}

std::string recall_csv(std::span<const RecallCurve> curves) {
  std::ostringstream out;
  out << "dataset,L,noise_scale,d,K,radius,recall,mean_Nr\n";
  for (const auto& c : curves) {
    const std::string label = c.meta.system.empty() ? c.meta.dataset : c.meta.dataset + ":" + c.meta.system;
    for (std::size_t i = 0; i < c.radii.size(); ++i) {
      out << label << ',' << c.meta.length << ',' << fmt("%g", c.meta.noise_scale) << ','
          << c.meta.dims << ',' << c.meta.k << ',' << c.radii[i] << ',' << fmt("%.6f", c.recall[i])
          << ',' << fmt("%.3f", c.meta.mean_candidates) << '\n';
    }
  }
  return out.str();
}

std::string recall_svg(std::span<const RecallCurve> curves) {
  constexpr double kWidth = 640, kHeight = 420, kLeft = 60, kRight = 200, kTop = 20, kBottom = 50;
  constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                      "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::size_t max_radius = 1;
  for (const auto& c : curves) {
    if (!c.radii.empty()) max_radius = std::max(max_radius, c.radii.back());
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](double r) { return kLeft + plot_w * r / static_cast<double>(max_radius); };
  auto y_of = [&](double v) { return kTop + plot_h * (1.0 - v); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << y_of(0) << "\" x2=\"" << x_of(max_radius) << "\" y2=\""
    << y_of(0) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << y_of(0) << "\" x2=\"" << kLeft << "\" y2=\"" << y_of(1)
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    s << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt("%.1f", y_of(v) + 4) << "\" text-anchor=\"end\">"
      << fmt("%.1f", v) << "</text>\n";
  }
  for (std::size_t r = 0; r <= max_radius; r += std::max<std::size_t>(1, max_radius / 5)) {
    s << "<text x=\"" << fmt("%.1f", x_of(static_cast<double>(r))) << "\" y=\"" << y_of(0) + 16
      << "\" text-anchor=\"middle\">" << r << "</text>\n";
  }
  s << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\">localization radius (frames)</text>\n";
  s << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" transform=\"rotate(-90 16 " << kTop + plot_h / 2
    << ")\" text-anchor=\"middle\">recall</text>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const char* color = kPalette[i % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (c.meta.system == "baseline") s << " stroke-dasharray=\"5,3\"";
    s << " points=\"";
    for (std::size_t k = 0; k < c.radii.size(); ++k) {
      if (k > 0) s << ' ';
      s << fmt("%.2f", x_of(static_cast<double>(c.radii[k]))) << ',' << fmt("%.2f", y_of(c.recall[k]));
    }
    s << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(i) + 6;
    const double lx = kWidth - kRight + 10;
    s << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 18 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    s << "<text x=\"" << lx + 22 << "\" y=\"" << ly + 4 << "\">" << c.meta.dataset;
    if (!c.meta.system.empty()) s << ' ' << c.meta.system;
    s << " L=" << c.meta.length << " n=" << fmt("%g", c.meta.noise_scale) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void emit_report(std::span<const RecallCurve> curves, std::span<const StorageReportRow> storage,
                 std::span<const OpReportRow> ops, const fs::path& out_dir) {
  if (curves.empty()) throw InvalidArgument("report needs at least one recall curve");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create report directory " + out_dir.string());
  }
  detail::write_text(out_dir / "recall.csv", recall_csv(curves));
  detail::write_text(out_dir / "recall.svg", recall_svg(curves));

  std::ostringstream st;
  st << "label,N_x,D,d,K,p1_bytes,p2_bytes,p3_bytes,p4_bytes,total_bytes,total_MB,bytes_per_place,"
        "disk_p1_bytes,disk_index_bytes\n";
  for (const auto& row : storage) {
    st << row.label << ',' << row.config.ref_count << ',' << row.config.input_dims << ','
       << row.config.dims << ',' << row.config.k << ',' << row.model.p1_bytes << ','
       << row.model.p2_bytes << ',' << row.model.p3_bytes << ',' << row.model.p4_bytes << ','
       << row.model.total_bytes() << ',' << fmt("%.4f", row.model.total_megabytes()) << ','
       << fmt("%.4f", row.model.model_bytes_per_place) << ',';
    if (row.measured) {
      st << row.measured->p1_bytes << ',' << row.measured->index_file_bytes;
    } else {
      st << ',';
    }
    st << '\n';
  }
  detail::write_text(out_dir / "storage.csv", st.str());

  std::ostringstream op;
  op << "label,system,D,d,K,N_x,N_r,L_new,p,pca_ops,quant_ops,hash_ops,lookup_ops,seq_ops,total_ops\n";
  for (const auto& row : ops) {
    const auto& c = row.config;
    op << row.label << ',' << to_string(row.system) << ',' << c.input_dims << ',' << c.dims << ','
       << c.k << ',' << c.ref_count << ',' << c.candidates << ',' << c.new_pairs << ','
       << c.precision << ',' << row.count.pca_ops << ',' << row.count.quant_ops << ','
       << row.count.hash_ops << ',' << row.count.lookup_ops << ',' << fmt("%.3f", row.count.seq_ops)
       << ',' << fmt("%.3f", row.count.total()) << '\n';
  }
  detail::write_text(out_dir / "ops.csv", op.str());
}

}  // namespace coarsehash
