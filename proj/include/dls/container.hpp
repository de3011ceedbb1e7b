#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "dls/binary_io.hpp"
#include "dls/codec.hpp"
#include "dls/field.hpp"

namespace dls {

// Contiguous split of `total` items over `workers`:
//   div = total / workers, rem = total % workers
//   counts[p] = div + (p < rem), starts[p] = div * p + min(p, rem)
struct WorkPartition {
  std::vector<std::size_t> counts;
  std::vector<std::size_t> starts;
};

WorkPartition partition_work(std::size_t total, std::size_t workers);

// Runs fn(begin, end) for each non-empty range of partition_work(total, workers),
// one thread per range. Exceptions are rethrown on the caller.
template <class Fn>
void parallel_ranges(std::size_t total, std::size_t workers, Fn&& fn);

struct BatchEntry {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;      // compressed bytes
  std::uint64_t raw_length = 0;  // bytes after inflation
};

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerFixedBytes = 92;
inline constexpr std::size_t kBatchEntryBytes = 24;
inline constexpr std::size_t kDefaultBatchSize = 1000;
inline constexpr std::size_t kLabelBytes = 16;

struct ContainerHeader {
  std::uint32_t version = kContainerVersion;
  DType dtype = DType::F64;
  Dims dims;
  std::uint32_t m = 0;
  PaddingMode padding = PaddingMode::EdgeReplicate;
  std::string label;  // at most 16 bytes on disk
  double eps_t = 0.0;
  std::uint64_t snapshots = 0;             // T
  std::uint64_t patches_per_snapshot = 0;  // N
  std::uint64_t batch_size = kDefaultBatchSize;
  std::vector<double> norms;        // T entries
  std::vector<BatchEntry> batches;  // T * ceil(N / B) entries, snapshot-major

  std::size_t batches_per_snapshot() const noexcept {
    return batch_size == 0 ? 0 : (patches_per_snapshot + batch_size - 1) / batch_size;
  }
  std::size_t patch_size() const noexcept { return std::size_t{m} * m * m; }
  std::size_t byte_size() const noexcept;
};

// Pure function of (T, N, B).
std::size_t header_byte_size(std::uint64_t snapshots, std::uint64_t patches, std::uint64_t batch_size);

Bytes encode_header(const ContainerHeader& header);
// Parses and checks table consistency; payloads are not touched.
ContainerHeader decode_header(std::span<const std::uint8_t> bytes);

// RFC 1951 raw DEFLATE.
Bytes deflate_bytes(std::span<const std::uint8_t> raw);
Bytes inflate_bytes(std::span<const std::uint8_t> compressed, std::size_t expected_size);

// Streams an archive one snapshot at a time. The header is reserved up front
// (its size is known from T, N, B) and filled in by finish().
class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, ContainerHeader meta);
  ContainerWriter(const ContainerWriter&) = delete;
  ContainerWriter& operator=(const ContainerWriter&) = delete;

  // Batches are deflated by up to `workers` threads; output bytes do not
  // depend on the worker count.
  void add_snapshot(double norm, std::span<const PatchCode> codes, std::size_t workers = 1);
  void finish();

  const ContainerHeader& header() const noexcept { return header_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  ContainerHeader header_;
  std::uint64_t cursor_ = 0;
  bool finished_ = false;
};

// `codes` holds T * N records in (snapshot, patch) order.
void write_container(const std::filesystem::path& path, const ContainerHeader& meta, std::span<const double> norms,
                     std::span<const PatchCode> codes, std::size_t workers = 1);

class ContainerReader {
 public:
  explicit ContainerReader(const std::filesystem::path& path);

  const ContainerHeader& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  // Codes of batch `b` of snapshot `t`; reads only that payload.
  std::vector<PatchCode> read_batch(std::size_t t, std::size_t b) const;
  std::vector<PatchCode> read_snapshot(std::size_t t) const;
  std::vector<PatchCode> read_all() const;

 private:
  std::filesystem::path path_;
  ContainerHeader header_;
};

struct SizeReport {
  std::uint64_t payload_bytes = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t basis_bytes = 0;
  std::uint64_t original_bytes = 0;
  double cr = 0.0;               // original / (payload + header + basis)
  double cr_without_basis = 0.0;  // original / (payload + header)
};

SizeReport compressed_size_report(const std::filesystem::path& archive,
                                  std::span<const std::filesystem::path> basis_paths);

}  // namespace dls

#include "dls/parallel.inl"
