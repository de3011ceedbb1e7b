#include "dls/basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <tuple>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "dls/error.hpp"
#include "dls/rng.hpp"

namespace dls {

namespace {

constexpr std::string_view kBasisMagic = "DLSB";
constexpr std::uint32_t kBasisVersion = 1;

void check_edge(std::size_t m) {
  if (m < 2) throw Error(Errc::InvalidArgument, "patch edge must be >= 2, got " + std::to_string(m));
  if (m * m * m > 65536) throw Error(Errc::InvalidArgument, "patch size m^3 exceeds 65536");
}

// Largest-magnitude entry non-negative; ties resolved toward the lowest row.
void fix_signs(Eigen::MatrixXd& modes) {
  for (Eigen::Index j = 0; j < modes.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < modes.rows(); ++i) {
      const double a = std::abs(modes(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (modes(best, j) < 0.0) modes.col(j) *= -1.0;
  }
}

// Orthogonalize `v` against the first `count` columns (two passes of modified
// Gram-Schmidt) and return its remaining norm.
double orthogonalize(Eigen::VectorXd& v, const Eigen::MatrixXd& modes, Eigen::Index count) {
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index k = 0; k < count; ++k) v -= modes.col(k).dot(v) * modes.col(k);
  return v.norm();
}

void complete_orthonormal(Eigen::MatrixXd& modes, Eigen::Index from, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index M = modes.rows();
  Eigen::VectorXd v(M);
  for (Eigen::Index j = from; j < modes.cols(); ++j) {
    double norm = 0.0;
    do {
      for (Eigen::Index i = 0; i < M; ++i) v(i) = rng.normal();
      norm = orthogonalize(v, modes, j);
    } while (norm < 1e-6);
    modes.col(j) = v / norm;
  }
}

}  // namespace

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Svd: return "svd";
    case BasisKind::Cosine: return "dct";
    case BasisKind::Random: return "random";
  }
  return "unknown";
}

std::optional<BasisKind> parse_basis_kind(std::string_view name) {
  if (name == "svd" || name == "SVD") return BasisKind::Svd;
  if (name == "dct" || name == "cosine" || name == "Cosine") return BasisKind::Cosine;
  if (name == "random" || name == "Random") return BasisKind::Random;
  return std::nullopt;
}

double orthonormality_error(const Eigen::MatrixXd& modes) {
  if (modes.rows() != modes.cols()) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd gram = modes.transpose() * modes;
  return (gram - Eigen::MatrixXd::Identity(modes.cols(), modes.cols())).cwiseAbs().maxCoeff();
}

PatchBasis build_svd_basis(const Eigen::MatrixXd& samples, std::size_t m, std::uint64_t completion_seed) {
  check_edge(m);
  const auto M = static_cast<Eigen::Index>(m * m * m);
  if (samples.cols() != M)
    throw Error(Errc::DimensionMismatch, "sample matrix has " + std::to_string(samples.cols()) +
                                             " columns, patch size is " + std::to_string(M));
  if (samples.rows() < M)
    throw Error(Errc::InvalidArgument, "need at least M = " + std::to_string(M) + " samples, got " +
                                           std::to_string(samples.rows()));
  if (!samples.allFinite()) throw Error(Errc::NonFinite, "sample matrix contains non-finite values");

  Eigen::VectorXd sigma;
  Eigen::MatrixXd V;
  {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(samples, Eigen::ComputeThinV);
    sigma = svd.singularValues();
    V = svd.matrixV();
  }
  if (!sigma.allFinite() || !V.allFinite()) {
    // BDCSVD breaks down on some exactly low-rank inputs (e.g. constant fields); redo on the R factor.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(samples);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(M).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullV);
    sigma = svd.singularValues();
    V = svd.matrixV();
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return sigma(a) > sigma(b); });

  const double sigma_max = M > 0 ? sigma(order.front()) : 0.0;
  Eigen::Index rank = 0;
  while (rank < M && sigma_max > 0.0 && sigma(order[static_cast<std::size_t>(rank)]) > kRankTolerance * sigma_max)
    ++rank;

  PatchBasis b;
  b.m = m;
  b.kind = BasisKind::Svd;
  b.modes.resize(M, M);
  for (Eigen::Index j = 0; j < rank; ++j) b.modes.col(j) = V.col(order[static_cast<std::size_t>(j)]);
  complete_orthonormal(b.modes, rank, completion_seed);

  if (orthonormality_error(b.modes) > 1e-13) {
    // Gram-Schmidt cleanup; leading directions are preserved.
    Eigen::VectorXd v(M);
    for (Eigen::Index j = 0; j < M; ++j) {
      v = b.modes.col(j);
      const double norm = orthogonalize(v, b.modes, j);
      b.modes.col(j) = v / norm;
    }
  }
  fix_signs(b.modes);
  b.provenance.seed = completion_seed;
  b.provenance.samples = static_cast<std::uint64_t>(samples.rows());
  return b;
}

Eigen::MatrixXd dct_matrix(std::size_t m) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  const double dm = static_cast<double>(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double c = k == 0 ? std::sqrt(1.0 / dm) : std::sqrt(2.0 / dm);
    for (std::size_t x = 0; x < m; ++x)
      d(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(k)) =
          c * std::cos(std::numbers::pi * static_cast<double>((2 * x + 1) * k) / (2.0 * dm));
  }
  return d;
}

PatchBasis build_cosine_basis(std::size_t m) {
  check_edge(m);
  const Eigen::MatrixXd d = dct_matrix(m);
  std::vector<std::array<std::size_t, 3>> waves;
  for (std::size_t k1 = 0; k1 < m; ++k1)
    for (std::size_t k2 = 0; k2 < m; ++k2)
      for (std::size_t k3 = 0; k3 < m; ++k3) waves.push_back({k1, k2, k3});
  std::sort(waves.begin(), waves.end(), [](const auto& a, const auto& b) {
    return std::tuple(a[0] + a[1] + a[2], a) < std::tuple(b[0] + b[1] + b[2], b);
  });

  const auto M = static_cast<Eigen::Index>(m * m * m);
  PatchBasis b;
  b.m = m;
  b.kind = BasisKind::Cosine;
  b.modes.resize(M, M);
  const auto im = static_cast<Eigen::Index>(m);
  for (Eigen::Index j = 0; j < M; ++j) {
    const auto& w = waves[static_cast<std::size_t>(j)];
    const auto k1 = static_cast<Eigen::Index>(w[0]), k2 = static_cast<Eigen::Index>(w[1]),
               k3 = static_cast<Eigen::Index>(w[2]);
    Eigen::Index row = 0;
    for (Eigen::Index z = 0; z < im; ++z)
      for (Eigen::Index y = 0; y < im; ++y)
        for (Eigen::Index x = 0; x < im; ++x) b.modes(row++, j) = d(x, k1) * d(y, k2) * d(z, k3);
  }
  return b;
}

PatchBasis build_random_basis(std::size_t m, std::uint64_t seed) {
  check_edge(m);
  const auto M = static_cast<Eigen::Index>(m * m * m);
  Rng rng(seed);
  Eigen::MatrixXd g(M, M);
  for (Eigen::Index j = 0; j < M; ++j)
    for (Eigen::Index i = 0; i < M; ++i) g(i, j) = rng.normal();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  PatchBasis b;
  b.m = m;
  b.kind = BasisKind::Random;
  b.modes = qr.householderQ() * Eigen::MatrixXd::Identity(M, M);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < M; ++j)
    if (r(j, j) < 0.0) b.modes.col(j) *= -1.0;
  b.provenance.seed = seed;
  return b;
}

Bytes encode_basis(const PatchBasis& basis) {
  const std::size_t M = basis.size();
  if (basis.m * basis.m * basis.m != M || static_cast<std::size_t>(basis.modes.rows()) != M)
    throw Error(Errc::DimensionMismatch, "basis modes do not match patch edge");
  Bytes out;
  out.reserve(basis_file_bytes(basis.m));
  ByteWriter wr(out);
  wr.tag(kBasisMagic);
  wr.u32(kBasisVersion);
  wr.u32(static_cast<std::uint32_t>(basis.kind));
  wr.u32(static_cast<std::uint32_t>(basis.m));
  wr.u64(basis.provenance.seed);
  wr.u64(basis.provenance.samples);
  wr.raw(basis.provenance.training_digest);
  // Eigen default storage is column-major, matching the file layout.
  for (Eigen::Index i = 0; i < basis.modes.size(); ++i) wr.f64(basis.modes.data()[i]);
  return out;
}

PatchBasis decode_basis(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes);
  if (bytes.size() < kBasisHeaderBytes || !rd.tag(kBasisMagic)) throw Error(Errc::BadFormat, "not a DLSB basis file");
  if (rd.u32() != kBasisVersion) throw Error(Errc::BadFormat, "unsupported DLSB version");
  const std::uint32_t kind = rd.u32();
  if (kind > 2) throw Error(Errc::BadFormat, "unknown basis kind " + std::to_string(kind));
  const std::uint32_t m = rd.u32();
  if (m < 2 || static_cast<std::uint64_t>(m) * m * m > 65536)
    throw Error(Errc::BadFormat, "invalid patch edge " + std::to_string(m));

  PatchBasis b;
  b.m = m;
  b.kind = static_cast<BasisKind>(kind);
  b.provenance.seed = rd.u64();
  b.provenance.samples = rd.u64();
  auto digest = rd.raw(32);
  std::copy(digest.begin(), digest.end(), b.provenance.training_digest.begin());

  const auto M = static_cast<Eigen::Index>(std::size_t{m} * m * m);
  if (rd.remaining() != static_cast<std::size_t>(M * M) * 8)
    throw Error(rd.remaining() < static_cast<std::size_t>(M * M) * 8 ? Errc::TruncatedFile : Errc::BadFormat,
                "basis payload size does not match m = " + std::to_string(m));
  b.modes.resize(M, M);
  for (Eigen::Index i = 0; i < M * M; ++i) b.modes.data()[i] = rd.f64();
  if (!b.modes.allFinite()) throw Error(Errc::Corrupt, "basis contains non-finite values");
  const double err = orthonormality_error(b.modes);
  if (!(err <= kOrthonormalityTolerance))
    throw Error(Errc::Corrupt, "basis fails orthonormality check (max |C^T C - I| = " + std::to_string(err) + ")");
  return b;
}

void save_basis(const PatchBasis& basis, const std::filesystem::path& path) { write_file(path, encode_basis(basis)); }

PatchBasis load_basis(const std::filesystem::path& path) { return decode_basis(read_file(path)); }

}  // namespace dls
