#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dls {

struct Dims {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const noexcept { return nx * ny * nz; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept { return i + nx * (j + ny * k); }
  auto operator<=>(const Dims&) const = default;
};

std::string to_string(const Dims& d);

enum class DType : std::uint32_t { F64 = 0, F32 = 1 };

// A scalar sample lattice, x-fastest.
struct Field {
  Dims dims;
  std::vector<double> data;
  std::string label;
  DType source_dtype = DType::F64;

  static Field zeros(Dims dims, std::string label = {});

  double& at(std::size_t i, std::size_t j, std::size_t k) { return data[dims.index(i, j, k)]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return data[dims.index(i, j, k)]; }
};

// Throws DimensionMismatch / NonFinite if the invariants are broken.
void validate(const Field& field);

double l2_norm(std::span<const double> values);

inline constexpr std::size_t kFieldHeaderBytes = 36;

// Reads an FLD1 file, or a headerless value stream when `expected_dims` is
// given and the file does not carry the FLD1 magic. For FLD1 inputs a supplied
// `expected_dims` must match the header.
Field load_field(const std::filesystem::path& path, std::optional<Dims> expected_dims = std::nullopt,
                 DType raw_dtype = DType::F64);

// Always writes binary64 payloads.
void save_field(const Field& field, const std::filesystem::path& path);

// "<label>_<digits>.fld" -> label; otherwise the file stem.
std::string label_from_path(const std::filesystem::path& path);

// Canonical snapshot file name, zero-padded so lexicographic order is time order.
std::string snapshot_filename(const std::string& label, std::size_t t);

enum class PaddingMode : std::uint32_t { EdgeReplicate = 0 };

struct PatchLayout {
  Dims dims;
  std::size_t m = 0;
  std::size_t px = 0, py = 0, pz = 0;
  std::size_t pad_x = 0, pad_y = 0, pad_z = 0;
  PaddingMode padding = PaddingMode::EdgeReplicate;

  std::size_t patch_size() const noexcept { return m * m * m; }
  std::size_t patch_count() const noexcept { return px * py * pz; }
  Dims padded() const noexcept { return {px * m, py * m, pz * m}; }
  // Patch grid position; linear id = ix + px * (iy + py * iz).
  std::array<std::size_t, 3> patch_coords(std::size_t index) const noexcept {
    return {index % px, (index / px) % py, index / (px * py)};
  }
};

inline constexpr std::size_t kMaxPatchSize = 65536;

PatchLayout make_layout(Dims dims, std::size_t m);

struct Patch {
  std::size_t index = 0;
  std::vector<double> values;
};

Patch extract_patch(const Field& field, const PatchLayout& layout, std::size_t index);
// Allocation-free form used by the pipeline; `out` must hold m^3 values.
void extract_patch_into(const Field& field, const PatchLayout& layout, std::size_t index, std::span<double> out);

Field assemble_field(std::span<const Patch> patches, const PatchLayout& layout, std::string label = {});
// Writes the in-domain part of one patch; padded cells are dropped.
void store_patch(Field& field, const PatchLayout& layout, std::size_t index, std::span<const double> values);

struct SampleSet {
  Eigen::MatrixXd rows;                            // S x M
  std::vector<std::array<std::size_t, 3>> anchors;  // lower corner of each window
};

inline std::size_t default_sample_count(std::size_t m) { return 4 * m * m * m; }

SampleSet sample_patches(const Field& field, std::size_t m, std::size_t count, std::uint64_t seed);

enum class SyntheticKind { TaylorVortex, MultiScaleSine, RandomSmooth };

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name);
std::string to_string(SyntheticKind kind);

struct SyntheticParams {
  int component = 0;        // velocity component 0,1,2 -> u,v,w
  double time = 0.0;
  double amplitude = 1.0;
  double omega = 1.0;        // temporal angular frequency
  int octaves = 4;           // MultiScaleSine
  double decay = 0.5;        // per-octave amplitude ratio
  int smoothing_passes = 4;  // RandomSmooth
};

Field gen_synthetic(SyntheticKind kind, Dims dims, const SyntheticParams& params, std::uint64_t seed);

}  // namespace dls
