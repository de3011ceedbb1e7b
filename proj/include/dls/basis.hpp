#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "dls/binary_io.hpp"

namespace dls {

enum class BasisKind : std::uint32_t { Svd = 0, Cosine = 1, Random = 2 };

std::string to_string(BasisKind kind);
// Accepts "svd", "dct"/"cosine", "random".
std::optional<BasisKind> parse_basis_kind(std::string_view name);

struct BasisProvenance {
  std::uint64_t seed = 0;
  std::uint64_t samples = 0;  // S, rows of the training matrix
  Digest training_digest{};   // zeros when no training data was used
};

// M x M orthonormal compression matrix; column j is mode j.
struct PatchBasis {
  std::size_t m = 0;
  BasisKind kind = BasisKind::Svd;
  Eigen::MatrixXd modes;
  BasisProvenance provenance;

  std::size_t size() const noexcept { return static_cast<std::size_t>(modes.cols()); }
};

inline constexpr double kOrthonormalityTolerance = 1e-10;
inline constexpr double kRankTolerance = 1e-12;

// max_ij |C^T C - I|_ij
double orthonormality_error(const Eigen::MatrixXd& modes);

// Right singular vectors of the S x M sample matrix, ordered by descending
// singular value, every mode retained. Directions whose singular value falls
// below 1e-12 * sigma_max are replaced by a Gram-Schmidt completion seeded
// with `completion_seed`. Each column's largest-magnitude entry is made
// non-negative.
PatchBasis build_svd_basis(const Eigen::MatrixXd& samples, std::size_t m, std::uint64_t completion_seed = 0);

// 1D orthonormal DCT-II matrix, entry (x, k).
Eigen::MatrixXd dct_matrix(std::size_t m);
PatchBasis build_cosine_basis(std::size_t m);
PatchBasis build_random_basis(std::size_t m, std::uint64_t seed);

inline constexpr std::size_t kBasisHeaderBytes = 64;
inline std::size_t basis_file_bytes(std::size_t m) {
  const std::size_t M = m * m * m;
  return kBasisHeaderBytes + M * M * 8;
}

Bytes encode_basis(const PatchBasis& basis);
PatchBasis decode_basis(std::span<const std::uint8_t> bytes);
void save_basis(const PatchBasis& basis, const std::filesystem::path& path);
PatchBasis load_basis(const std::filesystem::path& path);

}  // namespace dls
