#include "dls/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <unistd.h>

#include "dls/codec.hpp"
#include "dls/error.hpp"

namespace dls {

namespace {

// Squared error of one reconstructed patch, restricted to in-domain cells.
double in_domain_error2(const PatchLayout& layout, std::size_t index, std::span<const double> original,
                        std::span<const double> recon) {
  const std::size_t m = layout.m;
  const auto [ix, iy, iz] = layout.patch_coords(index);
  const std::size_t nx = std::min(m, layout.dims.nx - ix * m);
  const std::size_t ny = std::min(m, layout.dims.ny - iy * m);
  const std::size_t nz = std::min(m, layout.dims.nz - iz * m);
  double s = 0.0;
  for (std::size_t c = 0; c < nz; ++c)
    for (std::size_t b = 0; b < ny; ++b)
      for (std::size_t a = 0; a < nx; ++a) {
        const std::size_t i = a + m * (b + m * c);
        const double d = original[i] - recon[i];
        s += d * d;
      }
  return s;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double Metrics::max_nrmse() const noexcept {
  double v = 0.0;
  for (const auto& s : snapshots) v = std::max(v, s.nrmse_pct);
  return v;
}

Digest field_digest(const Field& field) {
  Bytes bytes;
  bytes.reserve(field.data.size() * 8);
  ByteWriter wr(bytes);
  for (double v : field.data) wr.f64(v);
  return sha256(bytes);
}

PatchBasis learn_basis(const Field& training, std::size_t m, BasisKind kind, std::uint64_t seed) {
  switch (kind) {
    case BasisKind::Cosine: return build_cosine_basis(m);
    case BasisKind::Random: return build_random_basis(m, seed);
    case BasisKind::Svd: break;
  }
  validate(training);
  const SampleSet samples = sample_patches(training, m, default_sample_count(m), seed);
  PatchBasis b = build_svd_basis(samples.rows, m, seed);
  b.provenance.training_digest = field_digest(training);
  return b;
}

PatchBasis learn(const CompressionJob& job) {
  if (job.inputs.empty()) throw Error(Errc::EmptySeries, "no input snapshots");
  if (job.basis_kind != BasisKind::Svd) return learn_basis(Field{}, job.m, job.basis_kind, job.seed);
  const Field first = job.raw ? load_field(job.inputs.front(), job.raw->dims, job.raw->dtype)
                              : load_field(job.inputs.front());
  return learn_basis(first, job.m, job.basis_kind, job.seed);
}

Metrics compress_series(std::size_t count, const SnapshotLoader& load, const PatchBasis& basis,
                        const CompressOptions& options, const std::filesystem::path& archive,
                        const SnapshotObserver& observer) {
  if (count == 0) throw Error(Errc::EmptySeries, "no snapshots to compress");
  if (!(options.eps_t >= 0.0)) throw Error(Errc::InvalidArgument, "eps_t must be >= 0");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t M = basis.size();

  std::optional<ContainerWriter> writer;
  PatchLayout layout;
  Metrics metrics;
  metrics.m = basis.m;

  for (std::size_t t = 0; t < count; ++t) {
    const Field field = load(t);
    validate(field);
    if (t == 0) {
      layout = make_layout(field.dims, basis.m);
      ContainerHeader meta;
      meta.dtype = field.source_dtype;
      meta.dims = field.dims;
      meta.m = static_cast<std::uint32_t>(basis.m);
      meta.label = field.label.substr(0, kLabelBytes);
      meta.eps_t = options.eps_t;
      meta.snapshots = count;
      meta.patches_per_snapshot = layout.patch_count();
      meta.batch_size = options.batch_size;
      writer.emplace(archive, std::move(meta));
    } else if (field.dims != layout.dims) {
      throw Error(Errc::DimensionMismatch, "snapshot " + std::to_string(t) + " has dims " + to_string(field.dims) +
                                               ", series started with " + to_string(layout.dims));
    }

    // The budget norm is taken over the original domain: dropping padded
    // cells can only shrink the error, so the bound holds for the NRMSE.
    const double norm = l2_norm(field.data);
    const ToleranceBudget budget = make_budget(options.eps_t, norm, layout.padded().count(), M);

    const std::size_t N = layout.patch_count();
    std::vector<PatchCode> codes(N);
    std::vector<double> err2(N);
    parallel_ranges(N, options.workers, [&](std::size_t begin, std::size_t end) {
      Eigen::VectorXd patch(static_cast<Eigen::Index>(M)), alpha(patch.size()), recon(patch.size());
      const std::span<double> ps(patch.data(), M), as(alpha.data(), M), rs(recon.data(), M);
      for (std::size_t i = begin; i < end; ++i) {
        extract_patch_into(field, layout, i, ps);
        codes[i] = compress_patch(basis, ps, budget.eps_l, as);
        reconstruct_into(basis, codes[i], rs);
        err2[i] = in_domain_error2(layout, i, ps, rs);
      }
    });

    double total = 0.0;
    std::size_t retained = 0;
    for (std::size_t i = 0; i < N; ++i) {
      total += err2[i];
      retained += codes[i].size();
    }
    SnapshotMetrics sm;
    sm.index = t;
    sm.norm = norm;
    sm.eps_l = budget.eps_l;
    sm.retained = retained;
    sm.nrmse_pct = norm > 0.0 ? 100.0 * std::sqrt(total) / norm : 0.0;
    writer->add_snapshot(norm, codes, options.workers);
    metrics.snapshots.push_back(sm);
    if (observer) observer(sm);
  }
  writer->finish();

  metrics.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  metrics.sizes = compressed_size_report(archive, {});
  metrics.sizes.basis_bytes = basis_file_bytes(basis.m);
  metrics.sizes.cr = static_cast<double>(metrics.sizes.original_bytes) /
                     static_cast<double>(metrics.sizes.payload_bytes + metrics.sizes.header_bytes +
                                         metrics.sizes.basis_bytes);
  metrics.throughput_MBps =
      metrics.wall_s > 0.0 ? static_cast<double>(count * layout.dims.count() * 8) / metrics.wall_s / 1e6 : 0.0;
  metrics.lambda = coarsening_factor(layout.dims, basis.m);
  return metrics;
}

Metrics compress_fields(std::span<const Field> series, const PatchBasis& basis, const CompressOptions& options,
                        const std::filesystem::path& archive, const SnapshotObserver& observer) {
  return compress_series(
      series.size(), [&](std::size_t t) { return series[t]; }, basis, options, archive, observer);
}

Metrics compress(const CompressionJob& job, const PatchBasis& basis, const SnapshotObserver& observer) {
  if (basis.m != job.m && job.m != 0)
    throw Error(Errc::InvalidArgument, "basis patch edge " + std::to_string(basis.m) + " != job patch edge " +
                                           std::to_string(job.m));
  CompressOptions opt{job.eps_t, job.batch_size, job.workers};
  auto loader = [&](std::size_t t) {
    return job.raw ? load_field(job.inputs[t], job.raw->dims, job.raw->dtype) : load_field(job.inputs[t]);
  };
  return compress_series(job.inputs.size(), loader, basis, opt, job.output, observer);
}

Field decompress_snapshot(const ContainerReader& reader, const PatchBasis& basis, std::size_t t, std::size_t workers) {
  const ContainerHeader& h = reader.header();
  if (basis.m != h.m)
    throw Error(Errc::DimensionMismatch, "basis patch edge " + std::to_string(basis.m) + " does not match archive (" +
                                             std::to_string(h.m) + ")");
  const PatchLayout layout = make_layout(h.dims, h.m);
  const std::vector<PatchCode> codes = reader.read_snapshot(t);
  Field out = Field::zeros(h.dims, h.label);
  const std::size_t M = basis.size();
  parallel_ranges(codes.size(), workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> recon(M);
    for (std::size_t i = begin; i < end; ++i) {
      reconstruct_into(basis, codes[i], recon);
      store_patch(out, layout, i, recon);
    }
  });
  return out;
}

std::vector<std::filesystem::path> decompress(const std::filesystem::path& archive, const PatchBasis& basis,
                                              const std::filesystem::path& out_dir,
                                              std::optional<std::size_t> snapshot, std::size_t workers) {
  const ContainerReader reader(archive);
  const ContainerHeader& h = reader.header();
  if (snapshot && *snapshot >= h.snapshots)
    throw Error(Errc::OutOfRange, "snapshot " + std::to_string(*snapshot) + " not in archive (T = " +
                                      std::to_string(h.snapshots) + ")");
  std::filesystem::create_directories(out_dir);
  const std::string label = h.label.empty() ? "field" : h.label;
  std::vector<std::filesystem::path> written;
  const std::size_t first = snapshot.value_or(0);
  const std::size_t last = snapshot ? *snapshot + 1 : h.snapshots;
  for (std::size_t t = first; t < last; ++t) {
    const Field f = decompress_snapshot(reader, basis, t, workers);
    const auto path = out_dir / snapshot_filename(label, t);
    save_field(f, path);
    written.push_back(path);
  }
  return written;
}

double nrmse(const Field& original, const Field& reconstructed) {
  if (original.dims != reconstructed.dims || original.data.size() != reconstructed.data.size())
    throw Error(Errc::DimensionMismatch, "cannot compare " + to_string(original.dims) + " with " +
                                             to_string(reconstructed.dims));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < original.data.size(); ++i) {
    const double d = original.data[i] - reconstructed.data[i];
    num += d * d;
    den += original.data[i] * original.data[i];
  }
  if (den == 0.0) {
    if (num == 0.0) return 0.0;
    throw Error(Errc::DegenerateNorm, "original field has zero norm but reconstruction does not");
  }
  return 100.0 * std::sqrt(num) / std::sqrt(den);
}

double coarsening_factor(Dims dims, std::size_t m) {
  const PatchLayout layout = make_layout(dims, m);
  return static_cast<double>(dims.count()) / static_cast<double>(layout.patch_count());
}

std::vector<SweepRow> sweep(std::span<const Field> series, std::span<const std::size_t> m_list,
                            std::span<const double> eps_list, std::span<const BasisKind> kinds,
                            const SweepOptions& options) {
  if (series.empty()) throw Error(Errc::EmptySeries, "sweep needs at least one snapshot");
  const auto scratch = options.scratch_dir.empty() ? std::filesystem::temp_directory_path() : options.scratch_dir;
  std::filesystem::create_directories(scratch);
  const auto archive = scratch / ("dls_sweep_" + std::to_string(::getpid()) + ".ddls");

  std::vector<SweepRow> rows;
  for (std::size_t m : m_list) {
    for (BasisKind kind : kinds) {
      const PatchBasis basis = learn_basis(series.front(), m, kind, options.seed);
      for (double eps_t : eps_list) {
        const Metrics mt = compress_fields(series, basis, {eps_t, options.batch_size, options.workers}, archive);
        SweepRow r;
        r.m = m;
        r.lambda = mt.lambda;
        r.basis = kind;
        r.eps_t = eps_t;
        r.nrmse_pct = mt.max_nrmse();
        r.cr = mt.cr();
        r.cr_with_basis = mt.cr_with_basis();
        r.wall_s = mt.wall_s;
        r.throughput_MBps = mt.throughput_MBps;
        rows.push_back(r);
      }
    }
  }
  std::error_code ec;
  std::filesystem::remove(archive, ec);
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows, bool timing) {
  out << kSweepCsvHeader << '\n';
  for (const SweepRow& r : rows) {
    out << r.m << ',' << format_double(r.lambda) << ',' << to_string(r.basis) << ',' << format_double(r.eps_t) << ','
        << format_double(r.nrmse_pct) << ',' << format_double(r.cr) << ',' << format_double(r.cr_with_basis) << ','
        << (timing ? format_double(r.wall_s) : "0") << ',' << (timing ? format_double(r.throughput_MBps) : "0")
        << '\n';
  }
}

}  // namespace dls
