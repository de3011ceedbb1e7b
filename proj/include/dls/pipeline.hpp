#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dls/basis.hpp"
#include "dls/container.hpp"
#include "dls/field.hpp"

namespace dls {

// Raw (headerless) input description; absent means FLD1 inputs.
struct RawInput {
  Dims dims;
  DType dtype = DType::F64;
};

struct CompressionJob {
  std::vector<std::filesystem::path> inputs;  // ordered snapshots of one variable
  std::size_t m = 8;
  double eps_t = 1.0;  // percent
  BasisKind basis_kind = BasisKind::Svd;
  std::uint64_t seed = 0;
  std::size_t batch_size = kDefaultBatchSize;
  std::size_t workers = 1;
  std::filesystem::path output;
  std::optional<RawInput> raw;
};

struct SnapshotMetrics {
  std::size_t index = 0;
  double nrmse_pct = 0.0;
  double norm = 0.0;
  double eps_l = 0.0;
  std::size_t retained = 0;  // coefficients kept over all patches
};

struct Metrics {
  std::vector<SnapshotMetrics> snapshots;
  SizeReport sizes;  // basis_bytes is the DLSB file size of the basis used
  double wall_s = 0.0;
  double throughput_MBps = 0.0;
  double lambda = 0.0;
  std::size_t m = 0;

  double cr() const noexcept { return sizes.cr_without_basis; }
  double cr_with_basis() const noexcept { return sizes.cr; }
  double max_nrmse() const noexcept;
};

Digest field_digest(const Field& field);

// Basis for one variable. SVD learns from `training` with S = 4 m^3 samples;
// cosine ignores the data; random uses only `seed`.
PatchBasis learn_basis(const Field& training, std::size_t m, BasisKind kind, std::uint64_t seed);
// Learns from the first snapshot of the job only.
PatchBasis learn(const CompressionJob& job);

using SnapshotLoader = std::function<Field(std::size_t)>;
using SnapshotObserver = std::function<void(const SnapshotMetrics&)>;

struct CompressOptions {
  double eps_t = 1.0;
  std::size_t batch_size = kDefaultBatchSize;
  std::size_t workers = 1;
};

// Compresses `count` snapshots (loaded on demand) into one archive. Every
// snapshot satisfies NRMSE <= eps_t; the achieved value is reported.
Metrics compress_series(std::size_t count, const SnapshotLoader& load, const PatchBasis& basis,
                        const CompressOptions& options, const std::filesystem::path& archive,
                        const SnapshotObserver& observer = {});
Metrics compress_fields(std::span<const Field> series, const PatchBasis& basis, const CompressOptions& options,
                        const std::filesystem::path& archive, const SnapshotObserver& observer = {});
Metrics compress(const CompressionJob& job, const PatchBasis& basis, const SnapshotObserver& observer = {});

Field decompress_snapshot(const ContainerReader& reader, const PatchBasis& basis, std::size_t t,
                          std::size_t workers = 1);
// Writes <label>_<t>.fld for every snapshot, or only `snapshot` when given.
std::vector<std::filesystem::path> decompress(const std::filesystem::path& archive, const PatchBasis& basis,
                                              const std::filesystem::path& out_dir,
                                              std::optional<std::size_t> snapshot = std::nullopt,
                                              std::size_t workers = 1);

// 100 * ||u - r|| / ||u||, over the unpadded domain.
double nrmse(const Field& original, const Field& reconstructed);

// High-fidelity points per patch of the padded tiling.
double coarsening_factor(Dims dims, std::size_t m);

struct SweepRow {
  std::size_t m = 0;
  double lambda = 0.0;
  BasisKind basis = BasisKind::Svd;
  double eps_t = 0.0;
  double nrmse_pct = 0.0;  // worst snapshot
  double cr = 0.0;
  double cr_with_basis = 0.0;
  double wall_s = 0.0;
  double throughput_MBps = 0.0;
};

struct SweepOptions {
  std::uint64_t seed = 0;
  std::size_t batch_size = kDefaultBatchSize;
  std::size_t workers = 1;
  std::filesystem::path scratch_dir;  // archives are written here and removed
};

// Rows ordered by m, then basis kind, then eps_t, in the order given.
std::vector<SweepRow> sweep(std::span<const Field> series, std::span<const std::size_t> m_list,
                            std::span<const double> eps_list, std::span<const BasisKind> kinds,
                            const SweepOptions& options);

inline constexpr const char* kSweepCsvHeader = "m,lambda,basis,eps_t_pct,nrmse_pct,cr,cr_with_basis,wall_s,throughput_MBps";
// With `timing` false the two timing columns are written as 0.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows, bool timing = true);

}  // namespace dls
