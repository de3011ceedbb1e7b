#include "dls/container.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <limits>

#include "dls/error.hpp"

namespace dls {

namespace {

constexpr std::string_view kContainerMagic = "DDLS";

std::string batch_name(std::size_t t, std::size_t b) {
  return "snapshot " + std::to_string(t) + " batch " + std::to_string(b);
}

}  // namespace

WorkPartition partition_work(std::size_t total, std::size_t workers) {
  if (workers == 0) throw Error(Errc::InvalidArgument, "worker count must be >= 1");
  const std::size_t div = total / workers;
  const std::size_t rem = total % workers;
  WorkPartition w;
  w.counts.resize(workers);
  w.starts.resize(workers);
  for (std::size_t p = 0; p < workers; ++p) {
    w.counts[p] = div + (p < rem ? 1 : 0);
    w.starts[p] = div * p + std::min(p, rem);
  }
  return w;
}

std::size_t header_byte_size(std::uint64_t snapshots, std::uint64_t patches, std::uint64_t batch_size) {
  if (batch_size == 0) throw Error(Errc::InvalidArgument, "batch size must be >= 1");
  const std::uint64_t per_snapshot = (patches + batch_size - 1) / batch_size;
  return kContainerFixedBytes + snapshots * 8 + snapshots * per_snapshot * kBatchEntryBytes;
}

std::size_t ContainerHeader::byte_size() const noexcept {
  return kContainerFixedBytes + snapshots * 8 + snapshots * batches_per_snapshot() * kBatchEntryBytes;
}

Bytes encode_header(const ContainerHeader& h) {
  if (h.label.size() > kLabelBytes) throw Error(Errc::InvalidArgument, "variable label longer than 16 bytes");
  if (h.norms.size() != h.snapshots || h.batches.size() != h.snapshots * h.batches_per_snapshot())
    throw Error(Errc::InvalidArgument, "header tables do not match snapshot/batch counts");
  Bytes out;
  out.reserve(h.byte_size());
  ByteWriter wr(out);
  wr.tag(kContainerMagic);
  wr.u32(h.version);
  wr.u32(static_cast<std::uint32_t>(h.dtype));
  wr.u64(h.dims.nx);
  wr.u64(h.dims.ny);
  wr.u64(h.dims.nz);
  wr.u32(h.m);
  wr.u32(static_cast<std::uint32_t>(h.padding));
  std::uint8_t label[kLabelBytes]{};
  std::memcpy(label, h.label.data(), h.label.size());
  wr.raw(label);
  wr.f64(h.eps_t);
  wr.u64(h.snapshots);
  wr.u64(h.patches_per_snapshot);
  wr.u64(h.batch_size);
  for (double n : h.norms) wr.f64(n);
  for (const BatchEntry& e : h.batches) {
    wr.u64(e.offset);
    wr.u64(e.length);
    wr.u64(e.raw_length);
  }
  return out;
}

ContainerHeader decode_header(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes);
  if (bytes.size() < kContainerFixedBytes || !rd.tag(kContainerMagic))
    throw Error(Errc::BadFormat, "not a DDLS archive");
  ContainerHeader h;
  h.version = rd.u32();
  if (h.version != kContainerVersion) throw Error(Errc::BadFormat, "unsupported DDLS version " + std::to_string(h.version));
  const std::uint32_t dtype = rd.u32();
  if (dtype > 1) throw Error(Errc::BadFormat, "unknown dtype " + std::to_string(dtype));
  h.dtype = static_cast<DType>(dtype);
  h.dims = {rd.u64(), rd.u64(), rd.u64()};
  h.m = rd.u32();
  const std::uint32_t padding = rd.u32();
  if (padding != 0) throw Error(Errc::BadFormat, "unknown padding mode " + std::to_string(padding));
  auto label = rd.raw(kLabelBytes);
  h.label.assign(reinterpret_cast<const char*>(label.data()),
                 strnlen(reinterpret_cast<const char*>(label.data()), kLabelBytes));
  h.eps_t = rd.f64();
  h.snapshots = rd.u64();
  h.patches_per_snapshot = rd.u64();
  h.batch_size = rd.u64();
  if (h.batch_size == 0) throw Error(Errc::BadFormat, "batch size is zero");

  PatchLayout layout;
  try {
    layout = make_layout(h.dims, h.m);
  } catch (const Error& e) {
    throw Error(Errc::BadFormat, std::string("invalid geometry in header: ") + e.what());
  }
  if (layout.patch_count() != h.patches_per_snapshot)
    throw Error(Errc::BadFormat, "patch count does not match dims and patch edge");

  // Reject tables that cannot fit before allocating for them.
  const std::uint64_t nb = h.batches_per_snapshot();
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 64;
  if (h.snapshots > limit || nb > limit || (nb != 0 && h.snapshots > limit / nb) ||
      h.byte_size() > bytes.size())
    throw Error(Errc::TruncatedFile, "header tables extend past the available bytes");

  h.norms.resize(h.snapshots);
  for (double& n : h.norms) n = rd.f64();
  h.batches.resize(h.snapshots * nb);
  for (BatchEntry& e : h.batches) e = {rd.u64(), rd.u64(), rd.u64()};

  std::uint64_t expect = h.byte_size();
  const std::uint64_t max_raw = h.batch_size * (2 + 10 * std::uint64_t{h.patch_size()});
  for (std::size_t i = 0; i < h.batches.size(); ++i) {
    const BatchEntry& e = h.batches[i];
    if (e.offset != expect) throw Error(Errc::Corrupt, "batch table offsets are not contiguous at entry " + std::to_string(i));
    if (e.length == 0 || e.raw_length < 2 || e.raw_length > max_raw)
      throw Error(Errc::Corrupt, "batch table lengths are invalid at entry " + std::to_string(i));
    expect += e.length;
  }
  return h;
}

Bytes deflate_bytes(std::span<const std::uint8_t> raw) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(Errc::Io, "deflateInit2 failed");
  Bytes out(deflateBound(&zs, static_cast<uLong>(raw.size())));
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::Io, "deflate did not finish");
  out.resize(zs.total_out);
  return out;
}

Bytes inflate_bytes(std::span<const std::uint8_t> compressed, std::size_t expected_size) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error(Errc::Io, "inflateInit2 failed");
  Bytes out(expected_size + 1);  // one spare byte detects overlong streams
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::Corrupt, "DEFLATE stream is corrupt or incomplete");
  if (produced != expected_size)
    throw Error(Errc::Corrupt, "inflated " + std::to_string(produced) + " bytes, header says " +
                                   std::to_string(expected_size));
  out.resize(produced);
  return out;
}

ContainerWriter::ContainerWriter(const std::filesystem::path& path, ContainerHeader meta)
    : path_(path), header_(std::move(meta)) {
  if (header_.label.size() > kLabelBytes) throw Error(Errc::InvalidArgument, "variable label longer than 16 bytes");
  if (header_.batch_size == 0) throw Error(Errc::InvalidArgument, "batch size must be >= 1");
  if (header_.snapshots == 0) throw Error(Errc::EmptySeries, "archive needs at least one snapshot");
  header_.version = kContainerVersion;
  header_.norms.clear();
  header_.batches.clear();
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(Errc::Io, "cannot open " + path_.string() + " for writing");
  const std::size_t hsize = header_.byte_size();
  const Bytes placeholder(hsize, 0);
  out_.write(reinterpret_cast<const char*>(placeholder.data()), static_cast<std::streamsize>(hsize));
  cursor_ = hsize;
}

void ContainerWriter::add_snapshot(double norm, std::span<const PatchCode> codes, std::size_t workers) {
  if (finished_) throw Error(Errc::InvalidArgument, "archive already finished");
  if (header_.norms.size() >= header_.snapshots)
    throw Error(Errc::InvalidArgument, "more snapshots than declared in the header");
  if (codes.size() != header_.patches_per_snapshot)
    throw Error(Errc::DimensionMismatch, "snapshot has " + std::to_string(codes.size()) + " patch codes, expected " +
                                             std::to_string(header_.patches_per_snapshot));
  const std::size_t nb = header_.batches_per_snapshot();
  const std::size_t B = header_.batch_size;
  std::vector<Bytes> payloads(nb);
  std::vector<std::size_t> raw_sizes(nb);
  parallel_ranges(nb, workers, [&](std::size_t begin, std::size_t end) {
    Bytes raw;
    for (std::size_t b = begin; b < end; ++b) {
      raw.clear();
      const std::size_t first = b * B;
      const std::size_t last = std::min(first + B, codes.size());
      for (std::size_t i = first; i < last; ++i) encode_patch(codes[i], raw);
      raw_sizes[b] = raw.size();
      payloads[b] = deflate_bytes(raw);
    }
  });
  // Sequential prefix scan assigns the write positions.
  for (std::size_t b = 0; b < nb; ++b) {
    header_.batches.push_back({cursor_, payloads[b].size(), raw_sizes[b]});
    out_.write(reinterpret_cast<const char*>(payloads[b].data()), static_cast<std::streamsize>(payloads[b].size()));
    cursor_ += payloads[b].size();
  }
  header_.norms.push_back(norm);
  if (!out_) throw Error(Errc::Io, "write failed: " + path_.string());
}

void ContainerWriter::finish() {
  if (finished_) return;
  if (header_.norms.size() != header_.snapshots)
    throw Error(Errc::DimensionMismatch, "archive declares " + std::to_string(header_.snapshots) + " snapshots, got " +
                                             std::to_string(header_.norms.size()));
  const Bytes head = encode_header(header_);
  out_.seekp(0);
  out_.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  out_.close();
  if (!out_) throw Error(Errc::Io, "write failed: " + path_.string());
  finished_ = true;
}

void write_container(const std::filesystem::path& path, const ContainerHeader& meta, std::span<const double> norms,
                     std::span<const PatchCode> codes, std::size_t workers) {
  const std::size_t N = meta.patches_per_snapshot;
  if (norms.size() != meta.snapshots || codes.size() != meta.snapshots * N)
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(meta.snapshots * N) + " patch codes, got " +
                                             std::to_string(codes.size()));
  ContainerWriter w(path, meta);
  for (std::size_t t = 0; t < meta.snapshots; ++t) w.add_snapshot(norms[t], codes.subspan(t * N, N), workers);
  w.finish();
}

ContainerReader::ContainerReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path_.string());
  Bytes fixed(kContainerFixedBytes);
  in.read(reinterpret_cast<char*>(fixed.data()), static_cast<std::streamsize>(fixed.size()));
  fixed.resize(static_cast<std::size_t>(in.gcount()));
  if (fixed.size() >= 4 && std::memcmp(fixed.data(), kContainerMagic.data(), 4) != 0)
    throw Error(Errc::BadFormat, path_.string() + ": not a DDLS archive");
  if (fixed.size() < kContainerFixedBytes) throw Error(Errc::TruncatedFile, path_.string() + ": header truncated");

  // Counts live at fixed offsets 68 (T), 76 (N), 84 (B).
  ByteReader counts(fixed, 68);
  const std::uint64_t T = counts.u64(), N = counts.u64(), B = counts.u64();
  if (B == 0) throw Error(Errc::BadFormat, path_.string() + ": batch size is zero");
  const auto file_size = std::filesystem::file_size(path_);
  const std::uint64_t nb = (N + B - 1) / B;
  if (T > file_size || (nb != 0 && T > file_size / nb) || header_byte_size(T, N, B) > file_size)
    throw Error(Errc::TruncatedFile, path_.string() + ": header tables extend past end of file");

  Bytes head(header_byte_size(T, N, B));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  if (static_cast<std::size_t>(in.gcount()) != head.size())
    throw Error(Errc::TruncatedFile, path_.string() + ": header truncated");
  header_ = decode_header(head);
}

std::vector<PatchCode> ContainerReader::read_batch(std::size_t t, std::size_t b) const {
  const std::size_t nb = header_.batches_per_snapshot();
  if (t >= header_.snapshots || b >= nb)
    throw Error(Errc::OutOfRange, batch_name(t, b) + " does not exist");
  const BatchEntry& e = header_.batches[t * nb + b];

  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path_.string());
  Bytes payload(e.length);
  in.seekg(static_cast<std::streamoff>(e.offset));
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != e.length)
    throw Error(Errc::TruncatedFile, path_.string() + ": " + batch_name(t, b) + " payload truncated");

  Bytes raw;
  try {
    raw = inflate_bytes(payload, e.raw_length);
  } catch (const Error& err) {
    throw Error(err.code(), batch_name(t, b) + ": " + err.what());
  }
  const std::size_t B = header_.batch_size;
  const std::size_t count = std::min<std::size_t>(B, header_.patches_per_snapshot - b * B);
  std::vector<PatchCode> codes;
  codes.reserve(count);
  std::size_t offset = 0;
  try {
    for (std::size_t i = 0; i < count; ++i) codes.push_back(decode_patch(raw, header_.patch_size(), offset));
  } catch (const Error& err) {
    throw Error(Errc::Corrupt, batch_name(t, b) + ": " + err.what());
  }
  if (offset != raw.size()) throw Error(Errc::Corrupt, batch_name(t, b) + ": trailing bytes after last patch");
  return codes;
}

std::vector<PatchCode> ContainerReader::read_snapshot(std::size_t t) const {
  std::vector<PatchCode> codes;
  codes.reserve(header_.patches_per_snapshot);
  for (std::size_t b = 0; b < header_.batches_per_snapshot(); ++b) {
    auto part = read_batch(t, b);
    std::move(part.begin(), part.end(), std::back_inserter(codes));
  }
  return codes;
}

std::vector<PatchCode> ContainerReader::read_all() const {
  std::vector<PatchCode> codes;
  codes.reserve(header_.snapshots * header_.patches_per_snapshot);
  for (std::size_t t = 0; t < header_.snapshots; ++t) {
    auto part = read_snapshot(t);
    std::move(part.begin(), part.end(), std::back_inserter(codes));
  }
  return codes;
}

SizeReport compressed_size_report(const std::filesystem::path& archive,
                                  std::span<const std::filesystem::path> basis_paths) {
  const ContainerReader reader(archive);
  const ContainerHeader& h = reader.header();
  SizeReport r;
  for (const BatchEntry& e : h.batches) r.payload_bytes += e.length;
  r.header_bytes = h.byte_size();
  for (const auto& p : basis_paths) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(p, ec);
    if (ec) throw Error(Errc::Io, "missing basis file " + p.string());
    r.basis_bytes += size;
  }
  r.original_bytes = h.snapshots * h.dims.count() * 8;
  r.cr = static_cast<double>(r.original_bytes) / static_cast<double>(r.payload_bytes + r.header_bytes + r.basis_bytes);
  r.cr_without_basis = static_cast<double>(r.original_bytes) / static_cast<double>(r.payload_bytes + r.header_bytes);
  return r;
}

}  // namespace dls
