#include "dls/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "dls/error.hpp"

namespace dls {

ToleranceBudget make_budget(double eps_t, double field_norm, std::size_t K, std::size_t M) {
  if (!(eps_t >= 0.0) || !std::isfinite(eps_t))
    throw Error(Errc::InvalidArgument, "target error must be finite and >= 0");
  if (!(field_norm >= 0.0) || !std::isfinite(field_norm))
    throw Error(Errc::InvalidArgument, "field norm must be finite and >= 0");
  if (M == 0 || K == 0 || K % M != 0)
    throw Error(Errc::InvalidArgument,
                "point count " + std::to_string(K) + " is not a positive multiple of patch size " + std::to_string(M));
  ToleranceBudget b;
  b.eps_t = eps_t;
  b.u_norm = field_norm;
  b.K = K;
  b.M = M;
  b.eps = eps_t * field_norm / 100.0;
  b.eps_l = b.eps * std::sqrt(static_cast<double>(M) / static_cast<double>(K));
  return b;
}

void project_into(const PatchBasis& basis, std::span<const double> patch, std::span<double> alpha) {
  const auto M = static_cast<Eigen::Index>(basis.size());
  if (patch.size() != basis.size() || alpha.size() != basis.size())
    throw Error(Errc::DimensionMismatch, "patch has " + std::to_string(patch.size()) + " values, basis expects " +
                                             std::to_string(M));
  Eigen::Map<const Eigen::VectorXd> p(patch.data(), M);
  Eigen::Map<Eigen::VectorXd> a(alpha.data(), M);
  a.noalias() = basis.modes.transpose() * p;
}

std::vector<double> project(const PatchBasis& basis, std::span<const double> patch) {
  std::vector<double> alpha(basis.size());
  project_into(basis, patch, alpha);
  return alpha;
}

SelectionResult select_coefficients(std::span<const double> alpha, double eps_l, SearchStrategy strategy) {
  const std::size_t M = alpha.size();
  if (M > 65536) throw Error(Errc::InvalidArgument, "coefficient vector longer than 65536");
  std::vector<std::uint32_t> order(M);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return std::abs(alpha[a]) > std::abs(alpha[b]); });

  // suffix[n] = squared L2 norm of everything after the first n sorted
  // entries; non-increasing in n because only non-negative terms are added.
  std::vector<double> suffix(M + 1, 0.0);
  for (std::size_t i = M; i-- > 0;) suffix[i] = suffix[i + 1] + alpha[order[i]] * alpha[order[i]];
  auto meets = [&](std::size_t n) { return std::sqrt(suffix[n]) <= eps_l; };

  std::size_t n = 0;
  if (strategy == SearchStrategy::Bisection) {
    std::size_t lo = 0, hi = M;  // meets(M) always holds
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (meets(mid))
        hi = mid;
      else
        lo = mid + 1;
    }
    n = lo;
  } else {
    while (n < M && !meets(n)) ++n;
  }

  SelectionResult r;
  r.n = n;
  r.tail_l2 = std::sqrt(suffix[n]);
  r.kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    r.kept.push_back({static_cast<std::uint16_t>(order[i]), alpha[order[i]]});
  std::sort(r.kept.begin(), r.kept.end(), [](const Coefficient& a, const Coefficient& b) { return a.index < b.index; });
  return r;
}

double grooming_slack(double eps_l, double tail_l2) {
  return std::sqrt(std::max(0.0, eps_l * eps_l - tail_l2 * tail_l2));
}

namespace {

constexpr std::uint64_t kMagnitudeMask = 0x7fffffffffffffffULL;
constexpr std::uint64_t kInfBits = 0x7ff0000000000000ULL;

// Round-to-nearest (ties away from zero) keeping 52 - z mantissa bits.
// A carry out of the mantissa correctly bumps the exponent.
std::uint64_t round_mantissa(std::uint64_t bits, int z) {
  if (z == 0) return bits;
  const std::uint64_t sign = bits & ~kMagnitudeMask;
  std::uint64_t mag = bits & kMagnitudeMask;
  const std::uint64_t half = std::uint64_t{1} << (z - 1);
  const std::uint64_t mask = ~((std::uint64_t{1} << z) - 1);
  mag = (mag + half) & mask;
  return sign | mag;
}

}  // namespace

GroomedValue groom_value(double value, double allowance) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int z = 52; z > 0; --z) {
    const std::uint64_t r = round_mantissa(bits, z);
    if ((r & kMagnitudeMask) >= kInfBits) continue;
    const double g = std::bit_cast<double>(r);
    if (std::abs(g - value) <= allowance) return {g, z};
  }
  return {value, 0};
}

GroomResult groom_coefficients(std::span<const Coefficient> kept, double slack) {
  if (!(slack >= 0.0)) throw Error(Errc::InvalidArgument, "grooming slack must be >= 0");
  GroomResult g;
  const std::size_t n = kept.size();
  g.allowance = n > 0 ? 0.99 * slack / std::sqrt(static_cast<double>(n)) : 0.0;
  g.values.reserve(n);
  g.zeroed_bits.reserve(n);
  for (const Coefficient& c : kept) {
    const GroomedValue v = groom_value(c.value, g.allowance);
    g.values.push_back(v.value);
    g.zeroed_bits.push_back(v.zeroed_bits);
  }
  return g;
}

void encode_patch(const PatchCode& code, Bytes& out) {
  const std::size_t n = code.size();
  if (n > 0xffff || code.coeffs.size() != n)
    throw Error(Errc::InvalidArgument, "patch code has inconsistent or oversized coefficient list");
  ByteWriter wr(out);
  wr.u16(static_cast<std::uint16_t>(n));
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && code.indices[k] <= code.indices[k - 1])
      throw Error(Errc::InvalidArgument, "patch code indices must be strictly increasing");
    wr.u16(code.indices[k]);
  }
  for (double c : code.coeffs) wr.f64(c);
}

Bytes encode_patch(const PatchCode& code) {
  Bytes out;
  out.reserve(encoded_size(code));
  encode_patch(code, out);
  return out;
}

PatchCode decode_patch(std::span<const std::uint8_t> bytes, std::size_t patch_size, std::size_t& offset) {
  ByteReader rd(bytes, offset);
  const std::size_t n = rd.u16();
  if (n > patch_size)
    throw Error(Errc::Corrupt, "patch record keeps " + std::to_string(n) + " of " + std::to_string(patch_size) +
                                   " coefficients");
  PatchCode code;
  code.indices.resize(n);
  code.coeffs.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    code.indices[k] = rd.u16();
    if (code.indices[k] >= patch_size) throw Error(Errc::Corrupt, "mode index out of range");
    if (k > 0 && code.indices[k] <= code.indices[k - 1]) throw Error(Errc::Corrupt, "mode indices not ascending");
  }
  for (auto& c : code.coeffs) {
    c = rd.f64();
    if (!std::isfinite(c)) throw Error(Errc::Corrupt, "non-finite coefficient");
  }
  offset = rd.position();
  return code;
}

PatchCode decode_patch(std::span<const std::uint8_t> bytes, std::size_t patch_size) {
  std::size_t offset = 0;
  PatchCode code = decode_patch(bytes, patch_size, offset);
  if (offset != bytes.size()) throw Error(Errc::Corrupt, "trailing bytes after patch record");
  return code;
}

void reconstruct_into(const PatchBasis& basis, const PatchCode& code, std::span<double> out) {
  const std::size_t M = basis.size();
  if (out.size() != M) throw Error(Errc::DimensionMismatch, "output patch has wrong size");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < code.size(); ++k) {
    const std::size_t j = code.indices[k];
    if (j >= M) throw Error(Errc::OutOfRange, "mode index " + std::to_string(j) + " >= " + std::to_string(M));
    const double c = code.coeffs[k];
    const double* col = basis.modes.data() + j * M;
    for (std::size_t i = 0; i < M; ++i) out[i] += c * col[i];
  }
}

std::vector<double> reconstruct_patch(const PatchBasis& basis, const PatchCode& code) {
  std::vector<double> out(basis.size());
  reconstruct_into(basis, code, out);
  return out;
}

PatchCode compress_patch(const PatchBasis& basis, std::span<const double> patch, double eps_l,
                         std::span<double> alpha) {
  project_into(basis, patch, alpha);
  const SelectionResult sel = select_coefficients(alpha, eps_l);
  const GroomResult g = groom_coefficients(sel.kept, grooming_slack(eps_l, sel.tail_l2));
  PatchCode code;
  code.indices.reserve(sel.n);
  for (const Coefficient& c : sel.kept) code.indices.push_back(c.index);
  code.coeffs = g.values;
  return code;
}

}  // namespace dls
