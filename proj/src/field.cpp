#include "dls/field.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dls/binary_io.hpp"
#include "dls/error.hpp"
#include "dls/rng.hpp"

namespace dls {

namespace {

constexpr std::string_view kFieldMagic = "FLD1";
constexpr std::uint32_t kFieldVersion = 1;

std::size_t clamp_index(std::size_t i, std::size_t n) { return i < n ? i : n - 1; }

void check_finite(const Field& field) {
  for (std::size_t i = 0; i < field.data.size(); ++i) {
    if (!std::isfinite(field.data[i]))
      throw Error(Errc::NonFinite, "value at linear index " + std::to_string(i) + " is not finite");
  }
}

std::vector<double> decode_values(ByteReader& rd, std::size_t n, DType dtype) {
  std::vector<double> values(n);
  if (dtype == DType::F64) {
    for (auto& v : values) v = rd.f64();
  } else {
    for (auto& v : values) {
      const std::uint32_t bits = rd.u32();
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<double>(f);
    }
  }
  return values;
}

std::size_t dtype_width(DType dtype) { return dtype == DType::F64 ? 8 : 4; }

}  // namespace

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

Field Field::zeros(Dims dims, std::string label) {
  Field f;
  f.dims = dims;
  f.data.assign(dims.count(), 0.0);
  f.label = std::move(label);
  return f;
}

void validate(const Field& field) {
  if (field.dims.nx == 0 || field.dims.ny == 0 || field.dims.nz == 0)
    throw Error(Errc::DimensionMismatch, "field extents must be positive, got " + to_string(field.dims));
  if (field.data.size() != field.dims.count())
    throw Error(Errc::DimensionMismatch, "field holds " + std::to_string(field.data.size()) + " values, dims " +
                                             to_string(field.dims) + " require " +
                                             std::to_string(field.dims.count()));
  check_finite(field);
}

double l2_norm(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

Field load_field(const std::filesystem::path& path, std::optional<Dims> expected_dims, DType raw_dtype) {
  const Bytes bytes = read_file(path);
  Field field;
  field.label = label_from_path(path);

  const bool tagged = bytes.size() >= 4 && std::memcmp(bytes.data(), kFieldMagic.data(), 4) == 0;
  if (tagged) {
    ByteReader rd(bytes);
    rd.tag(kFieldMagic);
    if (rd.u32() != kFieldVersion) throw Error(Errc::BadFormat, path.string() + ": unsupported FLD1 version");
    const std::uint32_t dtype = rd.u32();
    if (dtype > 1) throw Error(Errc::BadFormat, path.string() + ": unknown dtype " + std::to_string(dtype));
    field.source_dtype = static_cast<DType>(dtype);
    field.dims = {rd.u64(), rd.u64(), rd.u64()};
    if (expected_dims && *expected_dims != field.dims)
      throw Error(Errc::DimensionMismatch,
                  path.string() + ": header dims " + to_string(field.dims) + " != expected " + to_string(*expected_dims));
    const std::size_t need = field.dims.count() * dtype_width(field.source_dtype);
    if (rd.remaining() < need) throw Error(Errc::TruncatedFile, path.string() + ": payload shorter than header dims");
    if (rd.remaining() > need) throw Error(Errc::DimensionMismatch, path.string() + ": trailing bytes after payload");
    field.data = decode_values(rd, field.dims.count(), field.source_dtype);
  } else {
    if (!expected_dims)
      throw Error(Errc::BadFormat, path.string() + ": not an FLD1 file (raw input needs explicit dims)");
    field.dims = *expected_dims;
    field.source_dtype = raw_dtype;
    const std::size_t need = field.dims.count() * dtype_width(raw_dtype);
    if (bytes.size() < need)
      throw Error(Errc::TruncatedFile, path.string() + ": " + std::to_string(bytes.size()) + " bytes, need " +
                                           std::to_string(need));
    if (bytes.size() > need) throw Error(Errc::DimensionMismatch, path.string() + ": raw file larger than dims");
    ByteReader rd(bytes);
    field.data = decode_values(rd, field.dims.count(), raw_dtype);
  }
  validate(field);
  return field;
}

void save_field(const Field& field, const std::filesystem::path& path) {
  validate(field);
  Bytes out;
  out.reserve(kFieldHeaderBytes + field.data.size() * 8);
  ByteWriter wr(out);
  wr.tag(kFieldMagic);
  wr.u32(kFieldVersion);
  wr.u32(static_cast<std::uint32_t>(DType::F64));
  wr.u64(field.dims.nx);
  wr.u64(field.dims.ny);
  wr.u64(field.dims.nz);
  for (double v : field.data) wr.f64(v);
  write_file(path, out);
}

std::string label_from_path(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  const auto us = stem.rfind('_');
  if (us == std::string::npos || us == 0 || us + 1 == stem.size()) return stem;
  const bool digits = std::all_of(stem.begin() + static_cast<std::ptrdiff_t>(us) + 1, stem.end(),
                                  [](unsigned char c) { return std::isdigit(c) != 0; });
  return digits ? stem.substr(0, us) : stem;
}

std::string snapshot_filename(const std::string& label, std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu.fld", t);
  return label + buf;
}

PatchLayout make_layout(Dims dims, std::size_t m) {
  if (m < 2) throw Error(Errc::InvalidArgument, "patch edge must be >= 2, got " + std::to_string(m));
  if (m * m * m > kMaxPatchSize)
    throw Error(Errc::InvalidArgument, "patch size m^3 = " + std::to_string(m * m * m) + " exceeds 65536");
  if (dims.count() == 0) throw Error(Errc::InvalidArgument, "dims must be positive");
  auto pad = [m](std::size_t n) { return (m - n % m) % m; };
  PatchLayout l;
  l.dims = dims;
  l.m = m;
  l.pad_x = pad(dims.nx);
  l.pad_y = pad(dims.ny);
  l.pad_z = pad(dims.nz);
  l.px = (dims.nx + l.pad_x) / m;
  l.py = (dims.ny + l.pad_y) / m;
  l.pz = (dims.nz + l.pad_z) / m;
  return l;
}

void extract_patch_into(const Field& field, const PatchLayout& layout, std::size_t index, std::span<double> out) {
  if (index >= layout.patch_count())
    throw Error(Errc::OutOfRange, "patch index " + std::to_string(index) + " >= " +
                                      std::to_string(layout.patch_count()));
  const std::size_t m = layout.m;
  const auto [ix, iy, iz] = layout.patch_coords(index);
  const Dims& d = field.dims;
  std::size_t n = 0;
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t k = clamp_index(iz * m + c, d.nz);
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t j = clamp_index(iy * m + b, d.ny);
      const double* row = field.data.data() + d.index(0, j, k);
      for (std::size_t a = 0; a < m; ++a) out[n++] = row[clamp_index(ix * m + a, d.nx)];
    }
  }
}

Patch extract_patch(const Field& field, const PatchLayout& layout, std::size_t index) {
  Patch p;
  p.index = index;
  p.values.resize(layout.patch_size());
  extract_patch_into(field, layout, index, p.values);
  return p;
}

void store_patch(Field& field, const PatchLayout& layout, std::size_t index, std::span<const double> values) {
  const std::size_t m = layout.m;
  if (index >= layout.patch_count())
    throw Error(Errc::OutOfRange, "patch index " + std::to_string(index) + " >= " +
                                      std::to_string(layout.patch_count()));
  if (values.size() != layout.patch_size())
    throw Error(Errc::DimensionMismatch, "patch holds " + std::to_string(values.size()) + " values, expected " +
                                             std::to_string(layout.patch_size()));
  const auto [ix, iy, iz] = layout.patch_coords(index);
  const Dims& d = field.dims;
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t k = iz * m + c;
    if (k >= d.nz) break;
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t j = iy * m + b;
      if (j >= d.ny) break;
      const double* src = values.data() + m * (b + m * c);
      const std::size_t i0 = ix * m;
      const std::size_t len = std::min(m, d.nx - i0);
      std::copy_n(src, len, field.data.data() + d.index(i0, j, k));
    }
  }
}

Field assemble_field(std::span<const Patch> patches, const PatchLayout& layout, std::string label) {
  if (patches.size() != layout.patch_count())
    throw Error(Errc::DimensionMismatch, "got " + std::to_string(patches.size()) + " patches, layout has " +
                                             std::to_string(layout.patch_count()));
  Field f = Field::zeros(layout.dims, std::move(label));
  std::vector<bool> seen(patches.size(), false);
  for (const Patch& p : patches) {
    if (p.index >= layout.patch_count() || seen[p.index])
      throw Error(Errc::OutOfRange, "patch index " + std::to_string(p.index) + " invalid or repeated");
    seen[p.index] = true;
    store_patch(f, layout, p.index, p.values);
  }
  return f;
}

SampleSet sample_patches(const Field& field, std::size_t m, std::size_t count, std::uint64_t seed) {
  const std::size_t M = m * m * m;
  if (m < 2) throw Error(Errc::InvalidArgument, "patch edge must be >= 2");
  if (count < M)
    throw Error(Errc::InvalidArgument, "sample count " + std::to_string(count) + " < patch size " + std::to_string(M));
  const Dims& d = field.dims;
  if (d.nx < m || d.ny < m || d.nz < m)
    throw Error(Errc::InvalidArgument, "field " + to_string(d) + " cannot hold a " + std::to_string(m) + "^3 window");

  SampleSet s;
  s.rows.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(M));
  s.anchors.reserve(count);
  Rng rng(seed);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t ax = rng.below(d.nx - m + 1);
    const std::size_t ay = rng.below(d.ny - m + 1);
    const std::size_t az = rng.below(d.nz - m + 1);
    s.anchors.push_back({ax, ay, az});
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t b = 0; b < m; ++b)
        for (std::size_t a = 0; a < m; ++a)
          s.rows(static_cast<Eigen::Index>(r), col++) = field.at(ax + a, ay + b, az + c);
  }
  return s;
}

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name) {
  if (name == "taylor" || name == "TaylorVortex") return SyntheticKind::TaylorVortex;
  if (name == "multisine" || name == "MultiScaleSine") return SyntheticKind::MultiScaleSine;
  if (name == "smooth" || name == "RandomSmooth") return SyntheticKind::RandomSmooth;
  return std::nullopt;
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::TaylorVortex: return "taylor";
    case SyntheticKind::MultiScaleSine: return "multisine";
    case SyntheticKind::RandomSmooth: return "smooth";
  }
  return "unknown";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t component_seed(std::uint64_t seed, int component) {
  return seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(component + 1));
}

void fill_taylor(Field& f, const SyntheticParams& p) {
  const Dims& d = f.dims;
  const double phase = p.omega * p.time;
  for (std::size_t k = 0; k < d.nz; ++k) {
    const double z = kTwoPi * static_cast<double>(k) / static_cast<double>(d.nz);
    for (std::size_t j = 0; j < d.ny; ++j) {
      const double y = kTwoPi * static_cast<double>(j) / static_cast<double>(d.ny);
      for (std::size_t i = 0; i < d.nx; ++i) {
        const double x = kTwoPi * static_cast<double>(i) / static_cast<double>(d.nx) - phase;
        double v = 0.0;
        switch (p.component) {
          case 0: v = std::sin(x) * std::cos(y) * std::cos(z); break;
          case 1: v = -std::cos(x) * std::sin(y) * std::cos(z); break;
          default: v = 0.5 * std::cos(x) * std::cos(y) * std::sin(2.0 * z); break;
        }
        f.at(i, j, k) = p.amplitude * v;
      }
    }
  }
}

void fill_multisine(Field& f, const SyntheticParams& p, std::uint64_t seed) {
  const Dims& d = f.dims;
  Rng rng(component_seed(seed, p.component));
  struct Octave {
    double freq, amp, phx, phy, phz;
  };
  std::vector<Octave> octs;
  double total = 0.0;
  for (int o = 0; o < p.octaves; ++o) {
    Octave oc{std::ldexp(1.0, o), std::pow(p.decay, o), kTwoPi * rng.uniform(), kTwoPi * rng.uniform(),
              kTwoPi * rng.uniform()};
    total += oc.amp;
    octs.push_back(oc);
  }
  const double norm = total > 0.0 ? p.amplitude / total : 0.0;
  const double shift = p.omega * p.time;
  for (std::size_t k = 0; k < d.nz; ++k) {
    const double z = kTwoPi * static_cast<double>(k) / static_cast<double>(d.nz);
    for (std::size_t j = 0; j < d.ny; ++j) {
      const double y = kTwoPi * static_cast<double>(j) / static_cast<double>(d.ny);
      for (std::size_t i = 0; i < d.nx; ++i) {
        const double x = kTwoPi * static_cast<double>(i) / static_cast<double>(d.nx);
        double v = 0.0;
        for (const Octave& oc : octs)
          v += oc.amp * std::sin(oc.freq * x + oc.phx - shift) * std::sin(oc.freq * y + oc.phy) *
               std::sin(oc.freq * z + oc.phz);
        f.at(i, j, k) = norm * v;
      }
    }
  }
}

// Iterated 3-point averaging along each axis, edges clamped.
void smooth_pass(std::vector<double>& v, const Dims& d) {
  std::vector<double> tmp(v.size());
  auto sweep = [&](std::size_t n, auto idx) {
    for (std::size_t a = 0; a < v.size() / n; ++a)
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t lo = s == 0 ? 0 : s - 1;
        const std::size_t hi = s + 1 < n ? s + 1 : n - 1;
        tmp[idx(a, s)] = (v[idx(a, lo)] + v[idx(a, s)] + v[idx(a, hi)]) / 3.0;
      }
    v.swap(tmp);
  };
  sweep(d.nx, [&](std::size_t a, std::size_t s) { return a * d.nx + s; });
  sweep(d.ny, [&](std::size_t a, std::size_t s) {
    const std::size_t i = a % d.nx, k = a / d.nx;
    return d.index(i, s, k);
  });
  sweep(d.nz, [&](std::size_t a, std::size_t s) {
    const std::size_t i = a % d.nx, j = a / d.nx;
    return d.index(i, j, s);
  });
}

void fill_random_smooth(Field& f, const SyntheticParams& p, std::uint64_t seed) {
  Rng rng(component_seed(seed, p.component));
  const std::size_t n = f.data.size();
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = 2.0 * rng.uniform() - 1.0;
  for (auto& v : b) v = 2.0 * rng.uniform() - 1.0;
  for (int s = 0; s < p.smoothing_passes; ++s) {
    smooth_pass(a, f.dims);
    smooth_pass(b, f.dims);
  }
  const double phase = p.omega * p.time;
  const double ca = std::cos(phase), sb = std::sin(phase);
  for (std::size_t i = 0; i < n; ++i) f.data[i] = p.amplitude * (ca * a[i] + sb * b[i]);
}

}  // namespace

Field gen_synthetic(SyntheticKind kind, Dims dims, const SyntheticParams& params, std::uint64_t seed) {
  if (dims.count() == 0) throw Error(Errc::InvalidArgument, "synthetic dims must be positive");
  static constexpr const char* kLabels[] = {"u", "v", "w"};
  Field f = Field::zeros(dims, params.component >= 0 && params.component < 3 ? kLabels[params.component] : "s");
  switch (kind) {
    case SyntheticKind::TaylorVortex: fill_taylor(f, params); break;
    case SyntheticKind::MultiScaleSine: fill_multisine(f, params, seed); break;
    case SyntheticKind::RandomSmooth: fill_random_smooth(f, params, seed); break;
  }
  return f;
}

}  // namespace dls
