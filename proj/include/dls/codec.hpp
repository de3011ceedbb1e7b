#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dls/basis.hpp"
#include "dls/binary_io.hpp"

namespace dls {

// Per-snapshot error budget. `eps` is the absolute global L2 budget and
// `eps_l` the share each of the N = K / M patches may spend, so that
// N * eps_l^2 == eps^2.
struct ToleranceBudget {
  double eps_t = 0.0;   // percent
  double u_norm = 0.0;  // ||u||_2 of the snapshot
  double eps = 0.0;
  double eps_l = 0.0;
  std::size_t K = 0;  // padded point count
  std::size_t M = 0;  // patch size
};

ToleranceBudget make_budget(double eps_t, double field_norm, std::size_t K, std::size_t M);

// alpha = C^T p
std::vector<double> project(const PatchBasis& basis, std::span<const double> patch);
void project_into(const PatchBasis& basis, std::span<const double> patch, std::span<double> alpha);

struct Coefficient {
  std::uint16_t index = 0;
  double value = 0.0;

  bool operator==(const Coefficient&) const = default;
};

struct SelectionResult {
  std::size_t n = 0;
  std::vector<Coefficient> kept;  // ascending index
  double tail_l2 = 0.0;           // L2 norm of the dropped coefficients
};

enum class SearchStrategy { Bisection, Scan };

// Smallest magnitude-ordered prefix whose dropped tail has L2 norm <= eps_l.
// By Parseval the tail norm equals the reconstruction error of the patch, so
// no trial reconstruction is needed. Both strategies return identical results.
SelectionResult select_coefficients(std::span<const double> alpha, double eps_l,
                                    SearchStrategy strategy = SearchStrategy::Bisection);

// Extra L2 error the grooming step may spend: sqrt(max(0, eps_l^2 - tail^2)).
double grooming_slack(double eps_l, double tail_l2);

struct GroomedValue {
  double value = 0.0;
  int zeroed_bits = 0;  // trailing binary64 mantissa bits that are zero by construction
};

// Round `value` to the coarsest mantissa (most trailing zero bits, at most 52)
// whose round-to-nearest error stays within `allowance`.
GroomedValue groom_value(double value, double allowance);

struct GroomResult {
  std::vector<double> values;
  std::vector<int> zeroed_bits;
  double allowance = 0.0;  // per-coefficient delta
};

// Per-coefficient allowance delta = 0.99 * slack / sqrt(n).
GroomResult groom_coefficients(std::span<const Coefficient> kept, double slack);

struct PatchCode {
  std::vector<std::uint16_t> indices;  // strictly increasing
  std::vector<double> coeffs;

  std::size_t size() const noexcept { return indices.size(); }
  bool operator==(const PatchCode&) const = default;
};

inline std::size_t encoded_size(const PatchCode& code) { return 2 + code.size() * 10; }

// u16 n | n x u16 index | n x f64 coefficient, little-endian.
void encode_patch(const PatchCode& code, Bytes& out);
Bytes encode_patch(const PatchCode& code);
// Decodes one record starting at `offset` and advances it.
PatchCode decode_patch(std::span<const std::uint8_t> bytes, std::size_t patch_size, std::size_t& offset);
// Decodes a buffer holding exactly one record.
PatchCode decode_patch(std::span<const std::uint8_t> bytes, std::size_t patch_size);

// p = sum_k coeffs[k] * phi_{indices[k]}
std::vector<double> reconstruct_patch(const PatchBasis& basis, const PatchCode& code);
void reconstruct_into(const PatchBasis& basis, const PatchCode& code, std::span<double> out);

// project -> select -> groom for one patch. `alpha` is scratch of size M.
PatchCode compress_patch(const PatchBasis& basis, std::span<const double> patch, double eps_l, std::span<double> alpha);

}  // namespace dls
