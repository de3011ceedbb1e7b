#include <doctest.h>

#include <cmath>
#include <fstream>

#include "dls/error.hpp"
#include "dls/field.hpp"
#include "test_util.hpp"

using namespace dls;
using testutil::TempDir;

namespace {

void write_raw(const std::filesystem::path& p, const std::vector<double>& v) {
  Bytes b;
  ByteWriter w(b);
  for (double x : v) w.f64(x);
  write_file(p, b);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("FLD1 header round trip") {
  TempDir dir;
  Field f = testutil::random_field({4, 4, 4}, 1);
  save_field(f, dir / "u_0000.fld");
  const Field g = load_field(dir / "u_0000.fld");
  CHECK(g.dims == Dims{4, 4, 4});
  REQUIRE(g.data.size() == 64);
  for (std::size_t i = 0; i < 64; ++i) CHECK(testutil::same_bits(f.data[i], g.data[i]));
  CHECK(g.label == "u");
}

TEST_CASE("FLD1 byte layout") {
  TempDir dir;
  save_field(Field::zeros({2, 2, 2}), dir / "z.fld");
  const Bytes b = read_file(dir / "z.fld");
  CHECK(b.size() == kFieldHeaderBytes + 8 * 8);
  CHECK(std::string(b.begin(), b.begin() + 4) == "FLD1");
  ByteReader r(b, 4);
  CHECK(r.u32() == 1);
  CHECK(r.u32() == 0);
  CHECK(r.u64() == 2);
  CHECK(r.u64() == 2);
  CHECK(r.u64() == 2);
  for (int i = 0; i < 8; ++i) CHECK(r.f64() == 0.0);
  CHECK(r.remaining() == 0);
}

TEST_CASE("FLD1 binary32 payload is widened") {
  TempDir dir;
  Bytes b;
  ByteWriter w(b);
  w.tag("FLD1");
  w.u32(1);
  w.u32(1);
  w.u64(2);
  w.u64(1);
  w.u64(1);
  const float vals[2] = {0.5f, -3.25f};
  for (float v : vals) w.raw(std::span(reinterpret_cast<const std::uint8_t*>(&v), 4));
  write_file(dir / "f.fld", b);
  const Field f = load_field(dir / "f.fld");
  CHECK(f.source_dtype == DType::F32);
  CHECK(f.data == std::vector<double>{0.5, -3.25});
}

TEST_CASE("raw inputs") {
  TempDir dir;
  write_raw(dir / "r8.bin", {0, 1, 2, 3, 4, 5, 6, 7});
  const Field f = load_field(dir / "r8.bin", Dims{2, 2, 2});
  CHECK(f.dims == Dims{2, 2, 2});
  CHECK(f.data[7] == 7.0);

  write_raw(dir / "r7.bin", {0, 1, 2, 3, 4, 5, 6});
  CHECK(code_of([&] { load_field(dir / "r7.bin", Dims{2, 2, 2}); }) == Errc::TruncatedFile);

  write_raw(dir / "r9.bin", {0, 1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(code_of([&] { load_field(dir / "r9.bin", Dims{2, 2, 2}); }) == Errc::DimensionMismatch);

  // Raw stream without dims cannot be interpreted.
  CHECK_THROWS_AS(load_field(dir / "r8.bin"), Error);

  // binary32 raw
  Bytes b;
  for (float v : {1.0f, 2.0f}) {
    auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    b.insert(b.end(), p, p + 4);
  }
  write_file(dir / "r32.bin", b);
  const Field g = load_field(dir / "r32.bin", Dims{2, 1, 1}, DType::F32);
  CHECK(g.data == std::vector<double>{1.0, 2.0});
}

TEST_CASE("ingest rejects non-finite values and short headers") {
  TempDir dir;
  Field f = Field::zeros({2, 1, 1});
  f.data[1] = std::nan("");
  CHECK(code_of([&] { validate(f); }) == Errc::NonFinite);
  write_raw(dir / "nan.bin", {1.0, INFINITY});
  CHECK(code_of([&] { load_field(dir / "nan.bin", Dims{2, 1, 1}); }) == Errc::NonFinite);

  save_field(testutil::random_field({3, 3, 3}, 2), dir / "ok.fld");
  Bytes b = read_file(dir / "ok.fld");
  b.resize(20);
  write_file(dir / "short.fld", b);
  CHECK(code_of([&] { load_field(dir / "short.fld"); }) == Errc::TruncatedFile);
  b = read_file(dir / "ok.fld");
  b.resize(b.size() - 3);
  write_file(dir / "short2.fld", b);
  CHECK(code_of([&] { load_field(dir / "short2.fld"); }) == Errc::TruncatedFile);
  CHECK(code_of([&] { load_field(dir / "ok.fld", Dims{3, 3, 4}); }) == Errc::DimensionMismatch);
}

TEST_CASE("labels from file names") {
  CHECK(label_from_path("a/u_0003.fld") == "u");
  CHECK(label_from_path("vel_x_12.fld") == "vel_x");
  CHECK(label_from_path("pressure.fld") == "pressure");
  CHECK(label_from_path("u_final.fld") == "u_final");
  CHECK(snapshot_filename("v", 7) == "v_0007.fld");
  CHECK(snapshot_filename("v", 12345) == "v_12345.fld");
}

TEST_CASE("make_layout") {
  auto l = make_layout({8, 8, 8}, 4);
  CHECK(l.px == 2);
  CHECK(l.py == 2);
  CHECK(l.pz == 2);
  CHECK(l.pad_x + l.pad_y + l.pad_z == 0);
  CHECK(l.patch_count() == 8);

  l = make_layout({695, 396, 149}, 5);
  CHECK(l.px == 139);
  CHECK(l.py == 80);
  CHECK(l.pz == 30);
  CHECK(l.pad_x == 0);
  CHECK(l.pad_y == 4);
  CHECK(l.pad_z == 1);
  CHECK(l.patch_count() == 333600);

  l = make_layout({10, 10, 10}, 4);
  CHECK(l.px == 3);
  CHECK(l.pad_x == 2);
  CHECK(l.patch_count() == 27);

  CHECK_THROWS_AS(make_layout({8, 8, 8}, 1), Error);
  CHECK_NOTHROW(make_layout({8, 8, 8}, 40));
  CHECK_THROWS_AS(make_layout({8, 8, 8}, 41), Error);
}

TEST_CASE("layout invariants over many shapes") {
  for (std::size_t n = 1; n <= 13; ++n)
    for (std::size_t m = 2; m <= 6; ++m) {
      const auto l = make_layout({n, n + 1, 2 * n + 3}, m);
      CHECK(l.px * m == n + l.pad_x);
      CHECK(l.py * m == n + 1 + l.pad_y);
      CHECK(l.pz * m == 2 * n + 3 + l.pad_z);
      CHECK(l.pad_x < m);
      CHECK(l.pad_y < m);
      CHECK(l.pad_z < m);
    }
}

TEST_CASE("extract_patch") {
  Field c = Field::zeros({5, 3, 2});
  for (double& v : c.data) v = 2.5;
  const auto lc = make_layout(c.dims, 2);
  for (std::size_t i = 0; i < lc.patch_count(); ++i)
    for (double v : extract_patch(c, lc, i).values) CHECK(v == 2.5);

  Field f = Field::zeros({2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) f.data[i] = static_cast<double>(i);
  const Patch p = extract_patch(f, make_layout(f.dims, 2), 0);
  CHECK(p.values == std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});

  // x-clamped replication: patch 1 of [a,b,c] with m=2 covers x = 2,3 -> c,c
  Field abc = Field::zeros({3, 1, 1});
  abc.data = {1.0, 2.0, 3.0};
  const auto la = make_layout(abc.dims, 2);
  CHECK(extract_patch(abc, la, 1).values == std::vector<double>(8, 3.0));
  CHECK(extract_patch(abc, la, 0).values == std::vector<double>{1, 2, 1, 2, 1, 2, 1, 2});
  CHECK_THROWS_AS(extract_patch(abc, la, 2), Error);
}

TEST_CASE("assemble inverts extract, with and without padding") {
  for (Dims d : {Dims{5, 5, 5}, Dims{8, 8, 8}, Dims{7, 3, 9}, Dims{1, 1, 1}})
    for (std::size_t m : {2, 3, 4, 9}) {
      const Field f = testutil::random_field(d, d.count() * 31 + m);
      const auto l = make_layout(d, m);
      std::vector<Patch> patches;
      for (std::size_t i = 0; i < l.patch_count(); ++i) patches.push_back(extract_patch(f, l, i));
      const Field g = assemble_field(patches, l, "u");
      CHECK(g.dims == d);
      bool same = true;
      for (std::size_t i = 0; i < f.data.size(); ++i) same = same && testutil::same_bits(f.data[i], g.data[i]);
      CHECK(same);
    }
}

TEST_CASE("assemble from interleaved sources and bad inputs") {
  const Field a = testutil::random_field({4, 4, 4}, 1), b = testutil::random_field({4, 4, 4}, 2);
  const auto l = make_layout(a.dims, 2);
  std::vector<Patch> patches;
  for (std::size_t i = 0; i < l.patch_count(); ++i) patches.push_back(extract_patch(i % 2 ? b : a, l, i));
  const Field g = assemble_field(patches, l);
  for (std::size_t i = 0; i < l.patch_count(); ++i) CHECK(extract_patch(g, l, i).values == patches[i].values);

  auto short_list = patches;
  short_list.pop_back();
  CHECK_THROWS_AS(assemble_field(short_list, l), Error);
  auto dup = patches;
  dup[1].index = 0;
  CHECK_THROWS_AS(assemble_field(dup, l), Error);
  auto wrong = patches;
  wrong[0].values.pop_back();
  CHECK_THROWS_AS(assemble_field(wrong, l), Error);
}

TEST_CASE("single-patch layout crops") {
  const Field f = testutil::random_field({3, 2, 2}, 5);
  const auto l = make_layout(f.dims, 4);
  REQUIRE(l.patch_count() == 1);
  const Patch p = extract_patch(f, l, 0);
  const Patch patches[] = {p};
  CHECK(assemble_field(patches, l).data == f.data);
}

TEST_CASE("sample_patches") {
  Field c = Field::zeros({6, 6, 6});
  for (double& v : c.data) v = -1.5;
  const SampleSet sc = sample_patches(c, 2, 16, 3);
  CHECK(sc.rows.rows() == 16);
  CHECK(sc.rows.cols() == 8);
  CHECK((sc.rows.array() == -1.5).all());

  const Field f = testutil::random_field({4, 4, 4}, 9);
  const SampleSet s1 = sample_patches(f, 2, 32, 7);
  const SampleSet s2 = sample_patches(f, 2, 32, 7);
  CHECK(s1.rows == s2.rows);
  CHECK(s1.anchors == s2.anchors);
  REQUIRE(s1.anchors.size() == 32);
  for (std::size_t r = 0; r < 32; ++r) {
    const auto [x0, y0, z0] = s1.anchors[r];
    CHECK(x0 <= 2);
    CHECK(y0 <= 2);
    CHECK(z0 <= 2);
    for (std::size_t c3 = 0; c3 < 2; ++c3)
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t a = 0; a < 2; ++a)
          CHECK(s1.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a + 2 * (b + 2 * c3))) ==
                f.at(x0 + a, y0 + b, z0 + c3));
  }
  CHECK(default_sample_count(4) == 256);
  CHECK_THROWS_AS(sample_patches(f, 2, 7, 1), Error);
  CHECK_THROWS_AS(sample_patches(f, 5, 500, 1), Error);
}

TEST_CASE("synthetic fields") {
  SyntheticParams p;
  p.octaves = 0;
  const Field z = gen_synthetic(SyntheticKind::MultiScaleSine, {8, 8, 8}, p, 1);
  for (double v : z.data) CHECK(v == 0.0);

  for (auto kind : {SyntheticKind::TaylorVortex, SyntheticKind::MultiScaleSine, SyntheticKind::RandomSmooth}) {
    SyntheticParams q;
    q.time = 0.3;
    const Field a = gen_synthetic(kind, {9, 8, 7}, q, 42);
    const Field b = gen_synthetic(kind, {9, 8, 7}, q, 42);
    CHECK(a.data == b.data);
    CHECK_NOTHROW(validate(a));
    CHECK(a.label == "u");
  }

  for (int comp = 0; comp < 3; ++comp) {
    SyntheticParams q;
    q.component = comp;
    const Field t = gen_synthetic(SyntheticKind::TaylorVortex, {32, 32, 32}, q, 0);
    double mx = 0.0;
    for (double v : t.data) mx = std::max(mx, std::abs(v));
    CHECK(mx <= 1.0);
    CHECK(mx > 0.4);
  }

  CHECK(parse_synthetic_kind("taylor") == SyntheticKind::TaylorVortex);
  CHECK(parse_synthetic_kind("multisine") == SyntheticKind::MultiScaleSine);
  CHECK(parse_synthetic_kind("smooth") == SyntheticKind::RandomSmooth);
  CHECK_FALSE(parse_synthetic_kind("bogus").has_value());
}
