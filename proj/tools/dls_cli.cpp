// dls: learn / compress / decompress / evaluate snapshot series with a patch basis.

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dls/basis.hpp"
#include "dls/container.hpp"
#include "dls/diagnostics.hpp"
#include "dls/error.hpp"
#include "dls/field.hpp"
#include "dls/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::optional<std::size_t> parse_size(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
  try {
    return static_cast<std::size_t>(std::stoull(s));
  } catch (...) {
    return std::nullopt;
  }
}

std::optional<dls::Dims> parse_dims(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) return std::nullopt;
  std::size_t v[3];
  for (int i = 0; i < 3; ++i) {
    auto p = parse_size(parts[i]);
    if (!p || *p == 0) return std::nullopt;
    v[i] = *p;
  }
  return dls::Dims{v[0], v[1], v[2]};
}

std::optional<double> parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

const CLI::Validator kDimsCheck(
    [](std::string& s) { return parse_dims(s) ? std::string{} : "expected NX,NY,NZ with positive integers"; },
    "NX,NY,NZ");

// Matches sorted lexicographically; zero-padded names make that time order.
std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  ::globfree(&g);
  if (out.empty()) throw dls::Error(dls::Errc::Io, "no files match '" + pattern + "'");
  std::sort(out.begin(), out.end());
  return out;
}

struct RawFlags {
  std::string dims;
  std::string dtype = "f64";

  std::optional<dls::RawInput> get() const {
    if (dims.empty()) return std::nullopt;
    return dls::RawInput{*parse_dims(dims), dtype == "f32" ? dls::DType::F32 : dls::DType::F64};
  }
};

void add_raw_flags(CLI::App* cmd, RawFlags& raw) {
  auto* d = cmd->add_option("--raw-dims", raw.dims, "Treat inputs as headerless values with these dims")
                ->check(kDimsCheck);
  cmd->add_option("--raw-dtype", raw.dtype, "Value type of raw inputs")
      ->check(CLI::IsMember({"f64", "f32"}))
      ->needs(d);
}

dls::Field load(const fs::path& p, const std::optional<dls::RawInput>& raw) {
  return raw ? dls::load_field(p, raw->dims, raw->dtype) : dls::load_field(p);
}

// Groups files by label, keeping each group in sorted order.
std::map<std::string, std::vector<fs::path>> by_label(const std::vector<fs::path>& files) {
  std::map<std::string, std::vector<fs::path>> out;
  for (const auto& f : files) out[dls::label_from_path(f)].push_back(f);
  return out;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("dls");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DLS_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- gen

struct GenArgs {
  std::string kind = "multisine";
  std::string dims = "32,32,32";
  std::size_t snapshots = 4;
  std::uint64_t seed = 0;
  std::string vars = "u";
  double dt = 0.1;
  double omega = 1.0;
  std::string out = ".";
};

int run_gen(const GenArgs& a) {
  if (a.snapshots == 0) throw dls::Error(dls::Errc::EmptySeries, "--snapshots must be at least 1");
  const dls::Dims dims = *parse_dims(a.dims);
  const dls::SyntheticKind kind = *dls::parse_synthetic_kind(a.kind);
  fs::create_directories(a.out);
  for (const std::string& var : split(a.vars, ',')) {
    dls::SyntheticParams p;
    p.component = var == "u" ? 0 : var == "v" ? 1 : 2;
    p.omega = a.omega;
    for (std::size_t t = 0; t < a.snapshots; ++t) {
      p.time = static_cast<double>(t) * a.dt;
      const dls::Field f = dls::gen_synthetic(kind, dims, p, a.seed);
      const fs::path path = fs::path(a.out) / dls::snapshot_filename(var, t);
      dls::save_field(f, path);
      spdlog::info("wrote {}", path.string());
    }
  }
  return 0;
}

// ---- learn

struct LearnArgs {
  std::string in;
  std::size_t m = 8;
  std::string basis = "svd";
  std::uint64_t seed = 0;
  std::string out;
  RawFlags raw;
};

int run_learn(const LearnArgs& a) {
  dls::CompressionJob job;
  job.m = a.m;
  job.basis_kind = *dls::parse_basis_kind(a.basis);
  job.seed = a.seed;
  job.raw = a.raw.get();
  if (job.basis_kind == dls::BasisKind::Svd) job.inputs = expand_glob(a.in);
  else if (!a.in.empty()) job.inputs = {a.in};
  const dls::PatchBasis basis = dls::learn(job);
  dls::save_basis(basis, a.out);
  json j{{"basis", a.out},
         {"kind", dls::to_string(basis.kind)},
         {"m", basis.m},
         {"modes", basis.size()},
         {"samples", basis.provenance.samples},
         {"seed", basis.provenance.seed},
         {"training_digest", dls::to_hex(basis.provenance.training_digest)}};
  std::cout << j.dump() << '\n';
  return 0;
}

// ---- compress

struct CompressArgs {
  std::string in;
  std::string basis;
  double eps_t = 1.0;
  std::size_t batch = dls::kDefaultBatchSize;
  std::size_t workers = 1;
  std::string out;
  bool no_timing = false;
  RawFlags raw;
};

int run_compress(const CompressArgs& a) {
  const dls::PatchBasis basis = dls::load_basis(a.basis);
  dls::CompressionJob job;
  job.inputs = expand_glob(a.in);
  job.m = basis.m;
  job.eps_t = a.eps_t;
  job.batch_size = a.batch;
  job.workers = a.workers;
  job.output = a.out;
  job.raw = a.raw.get();
  const dls::Metrics mt = dls::compress(job, basis, [&](const dls::SnapshotMetrics& s) {
    json j{{"snapshot", s.index}, {"nrmse_pct", s.nrmse_pct}, {"eps_t_pct", a.eps_t},
           {"norm", s.norm},      {"eps_l", s.eps_l},         {"retained", s.retained}};
    std::cout << j.dump() << std::endl;
  });
  json summary{{"summary", true},
               {"snapshots", mt.snapshots.size()},
               {"m", mt.m},
               {"lambda", mt.lambda},
               {"max_nrmse_pct", mt.max_nrmse()},
               {"cr", mt.cr()},
               {"cr_with_basis", mt.cr_with_basis()},
               {"payload_bytes", mt.sizes.payload_bytes},
               {"header_bytes", mt.sizes.header_bytes},
               {"basis_bytes", mt.sizes.basis_bytes},
               {"original_bytes", mt.sizes.original_bytes}};
  if (!a.no_timing) {
    summary["wall_s"] = mt.wall_s;
    summary["throughput_MBps"] = mt.throughput_MBps;
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

// ---- decompress

struct DecompressArgs {
  std::string archive;
  std::string basis;
  std::string out = ".";
  std::optional<std::size_t> snapshot;
  std::size_t workers = 1;
};

int run_decompress(const DecompressArgs& a) {
  const dls::PatchBasis basis = dls::load_basis(a.basis);
  for (const auto& p : dls::decompress(a.archive, basis, a.out, a.snapshot, a.workers)) std::cout << p.string() << '\n';
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string orig;
  std::string recon;
  RawFlags raw;
};

int run_eval(const EvalArgs& a) {
  const auto orig = expand_glob(a.orig);
  const auto recon = expand_glob(a.recon);
  if (orig.size() != recon.size())
    throw dls::Error(dls::Errc::DimensionMismatch, std::to_string(orig.size()) + " original files but " +
                                                       std::to_string(recon.size()) + " reconstructed files");
  const auto raw = a.raw.get();
  std::cout << "t,original,reconstructed,nrmse_pct\n";
  double worst = 0.0, sum = 0.0;
  for (std::size_t t = 0; t < orig.size(); ++t) {
    const double e = dls::nrmse(load(orig[t], raw), dls::load_field(recon[t]));
    worst = std::max(worst, e);
    sum += e;
    std::cout << t << ',' << orig[t].string() << ',' << recon[t].string() << ',' << fmt(e) << '\n';
  }
  std::cout << "max,,," << fmt(worst) << '\n' << "mean,,," << fmt(sum / static_cast<double>(orig.size())) << '\n';
  return 0;
}

// ---- sweep

struct SweepArgs {
  std::string in;
  std::string m_list = "8";
  std::string eps_list = "1";
  std::string basis_list = "svd";
  std::uint64_t seed = 0;
  std::size_t batch = dls::kDefaultBatchSize;
  std::size_t workers = 1;
  std::string out;
  bool no_timing = false;
  RawFlags raw;
};

int run_sweep(const SweepArgs& a, const std::vector<std::size_t>& ms, const std::vector<double>& eps,
              const std::vector<dls::BasisKind>& kinds) {
  const auto raw = a.raw.get();
  std::vector<dls::Field> series;
  for (const auto& p : expand_glob(a.in)) series.push_back(load(p, raw));
  dls::SweepOptions opt;
  opt.seed = a.seed;
  opt.batch_size = a.batch;
  opt.workers = a.workers;
  opt.scratch_dir = a.out.empty() ? fs::temp_directory_path() : fs::absolute(a.out).parent_path();
  const auto rows = dls::sweep(series, ms, eps, kinds, opt);
  if (a.out.empty()) {
    dls::write_sweep_csv(std::cout, rows, !a.no_timing);
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw dls::Error(dls::Errc::Io, "cannot write " + a.out);
    dls::write_sweep_csv(f, rows, !a.no_timing);
  }
  return 0;
}

// ---- diag

struct DiagArgs {
  std::string orig;
  std::string recon;
  std::string vars = "u,v,w";
  std::string probes;
  double dt = 1.0;
  std::string window = "none";
  std::string out = ".";
};

struct Series {
  std::map<std::string, std::vector<dls::Field>> vars;
  std::size_t length = 0;
};

Series load_series(const std::string& pattern, const std::vector<std::string>& vars) {
  Series s;
  const auto groups = by_label(expand_glob(pattern));
  for (const auto& v : vars) {
    auto it = groups.find(v);
    if (it == groups.end()) continue;
    auto& fields = s.vars[v];
    for (const auto& p : it->second) fields.push_back(dls::load_field(p));
    if (s.length != 0 && fields.size() != s.length)
      throw dls::Error(dls::Errc::DimensionMismatch, "variable " + v + " has " + std::to_string(fields.size()) +
                                                         " snapshots, expected " + std::to_string(s.length));
    s.length = fields.size();
  }
  if (s.vars.empty()) throw dls::Error(dls::Errc::EmptySeries, "no files for the requested variables in '" + pattern + "'");
  return s;
}

std::vector<dls::VelocityView> views(const Series& s) {
  std::vector<dls::VelocityView> out(s.length);
  for (std::size_t t = 0; t < s.length; ++t) {
    auto get = [&](const char* v) -> const dls::Field* {
      auto it = s.vars.find(v);
      return it == s.vars.end() ? nullptr : &it->second[t];
    };
    out[t] = {get("u"), get("v"), get("w")};
  }
  return out;
}

int run_diag(const DiagArgs& a, const std::vector<dls::Probe>& probes) {
  const auto vars = split(a.vars, ',');
  const Series so = load_series(a.orig, vars);
  const Series sr = load_series(a.recon, vars);
  if (so.length != sr.length || so.vars.size() != sr.vars.size())
    throw dls::Error(dls::Errc::DimensionMismatch, "original and reconstructed series differ in length or variables");
  const auto vo = views(so), vr = views(sr);
  const dls::SeriesStats a_st = dls::compute_series_stats(vo, probes);
  const dls::SeriesStats b_st = dls::compute_series_stats(vr, probes);
  const dls::Window win = a.window == "hann" ? dls::Window::Hann : dls::Window::None;

  fs::create_directories(a.out);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(a.out) / name, std::ios::binary);
    if (!f) throw dls::Error(dls::Errc::Io, "cannot write " + (fs::path(a.out) / name).string());
    return f;
  };
  {
    auto f = open("ke.csv");
    f << "t,KE_orig,KE_recon\n";
    for (std::size_t t = 0; t < a_st.ke.size(); ++t) f << t << ',' << fmt(a_st.ke[t]) << ',' << fmt(b_st.ke[t]) << '\n';
  }
  {
    auto f = open("tke.csv");
    f << "t,TKE_orig,TKE_recon\n";
    for (std::size_t t = 0; t < a_st.tke.size(); ++t)
      f << t << ',' << fmt(a_st.tke[t]) << ',' << fmt(b_st.tke[t]) << '\n';
  }
  json report{{"ke_recovery_pct", dls::recovery_pct(a_st.ke, b_st.ke)},
              {"tke_recovery_pct", dls::recovery_pct(a_st.tke, b_st.tke)},
              {"probes", json::array()}};
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const auto po = dls::probe_psd(a_st.probe_values[p], a.dt, win);
    const auto pr = dls::probe_psd(b_st.probe_values[p], a.dt, win);
    const auto& pb = probes[p];
    auto f = open("psd_" + std::to_string(pb.i) + "_" + std::to_string(pb.j) + "_" + std::to_string(pb.k) + ".csv");
    f << "f,P_orig,P_recon\n";
    for (std::size_t k = 0; k < po.size(); ++k) f << fmt(po[k].frequency) << ',' << fmt(po[k].power) << ',' << fmt(pr[k].power) << '\n';
    const std::size_t da = dls::dominant_bin(po), db = dls::dominant_bin(pr);
    report["probes"].push_back({{"i", pb.i},
                                {"j", pb.j},
                                {"k", pb.k},
                                {"dominant_bin_orig", da},
                                {"dominant_bin_recon", db},
                                {"match", da == db}});
  }
  std::cout << report.dump() << '\n';
  return 0;
}

// ---- inspect

int run_inspect(const std::string& archive, bool as_json) {
  const dls::ContainerReader reader(archive);
  const dls::ContainerHeader& h = reader.header();
  const std::size_t per = h.batches_per_snapshot();
  if (as_json) {
    json j{{"version", h.version},
           {"dtype", h.dtype == dls::DType::F32 ? "f32" : "f64"},
           {"dims", {h.dims.nx, h.dims.ny, h.dims.nz}},
           {"m", h.m},
           {"padding", "edge-replicate"},
           {"label", h.label},
           {"eps_t_pct", h.eps_t},
           {"snapshots", h.snapshots},
           {"patches_per_snapshot", h.patches_per_snapshot},
           {"batch_size", h.batch_size},
           {"header_bytes", h.byte_size()},
           {"norms", h.norms},
           {"batches", json::array()}};
    for (std::size_t i = 0; i < h.batches.size(); ++i) {
      const auto& b = h.batches[i];
      j["batches"].push_back({{"snapshot", i / per},
                              {"batch", i % per},
                              {"offset", b.offset},
                              {"length", b.length},
                              {"raw_length", b.raw_length}});
    }
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::cout << "archive        " << archive << '\n'
            << "version        " << h.version << '\n'
            << "dtype          " << (h.dtype == dls::DType::F32 ? "f32" : "f64") << '\n'
            << "dims           " << dls::to_string(h.dims) << '\n'
            << "m              " << h.m << '\n'
            << "padding        edge-replicate\n"
            << "label          " << h.label << '\n'
            << "eps_t_pct      " << fmt(h.eps_t) << '\n'
            << "snapshots      " << h.snapshots << '\n'
            << "patches        " << h.patches_per_snapshot << '\n'
            << "batch_size     " << h.batch_size << '\n'
            << "header_bytes   " << h.byte_size() << '\n';
  for (std::size_t t = 0; t < h.norms.size(); ++t) std::cout << "norm[" << t << "]        " << fmt(h.norms[t]) << '\n';
  std::cout << "snapshot batch offset length raw_length\n";
  for (std::size_t i = 0; i < h.batches.size(); ++i) {
    const auto& b = h.batches[i];
    std::cout << i / per << ' ' << i % per << ' ' << b.offset << ' ' << b.length << ' ' << b.raw_length << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Patch-basis lossy compression of 3D snapshot series"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file whose keys mirror the flags");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Write synthetic snapshot series");
  c_gen->add_option("--kind", gen.kind, "taylor | multisine | smooth")
      ->check(CLI::IsMember({"taylor", "multisine", "smooth"}));
  c_gen->add_option("--dims", gen.dims, "Grid extents")->check(kDimsCheck);
  c_gen->add_option("--snapshots", gen.snapshots, "Number of snapshots");
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--vars", gen.vars, "Comma-separated components out of u,v,w")
      ->check(CLI::Validator(
          [](std::string& s) {
            const auto v = split(s, ',');
            if (v.empty()) return std::string("empty variable list");
            for (const auto& x : v)
              if (x != "u" && x != "v" && x != "w") return "unknown variable '" + x + "'";
            return std::string{};
          },
          "u,v,w"));
  c_gen->add_option("--dt", gen.dt, "Time between snapshots");
  c_gen->add_option("--omega", gen.omega, "Temporal angular frequency");
  c_gen->add_option("--out", gen.out, "Output directory");

  LearnArgs learn;
  auto* c_learn = app.add_subcommand("learn", "Build a patch basis");
  c_learn->add_option("--in", learn.in, "Snapshot glob; the first match is the training snapshot");
  c_learn->add_option("--m", learn.m, "Patch edge")->check(CLI::Range(std::size_t{2}, std::size_t{40}));
  c_learn->add_option("--basis", learn.basis, "svd | dct | random")->check(CLI::IsMember({"svd", "dct", "cosine", "random"}));
  c_learn->add_option("--seed", learn.seed);
  c_learn->add_option("--out", learn.out, "Basis file")->required();
  add_raw_flags(c_learn, learn.raw);

  CompressArgs comp;
  auto* c_comp = app.add_subcommand("compress", "Compress a snapshot series");
  c_comp->add_option("--in", comp.in, "Snapshot glob")->required();
  c_comp->add_option("--basis", comp.basis, "Basis file")->required();
  c_comp->add_option("--eps-t", comp.eps_t, "Target NRMSE in percent")->check(CLI::NonNegativeNumber);
  c_comp->add_option("--batch", comp.batch, "Patches per DEFLATE batch")->check(CLI::PositiveNumber);
  c_comp->add_option("--workers", comp.workers)->check(CLI::PositiveNumber);
  c_comp->add_option("--out", comp.out, "Archive")->required();
  c_comp->add_flag("--no-timing", comp.no_timing, "Omit wall time and throughput");
  add_raw_flags(c_comp, comp.raw);

  DecompressArgs dec;
  auto* c_dec = app.add_subcommand("decompress", "Reconstruct snapshots from an archive");
  c_dec->add_option("--archive", dec.archive)->required();
  c_dec->add_option("--basis", dec.basis)->required();
  c_dec->add_option("--out", dec.out, "Output directory");
  c_dec->add_option("--snapshot", dec.snapshot, "Only this snapshot");
  c_dec->add_option("--workers", dec.workers)->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Per-snapshot NRMSE of a reconstruction");
  c_eval->add_option("--orig", ev.orig)->required();
  c_eval->add_option("--recon", ev.recon)->required();
  add_raw_flags(c_eval, ev.raw);

  SweepArgs sw;
  std::vector<std::size_t> sw_m;
  std::vector<double> sw_eps;
  std::vector<dls::BasisKind> sw_kinds;
  auto* c_sweep = app.add_subcommand("sweep", "Rate-distortion sweep over m, eps_t and basis kinds");
  c_sweep->add_option("--in", sw.in, "Snapshot glob")->required();
  c_sweep->add_option("--m-list", sw.m_list, "e.g. 4,8");
  c_sweep->add_option("--eps-list", sw.eps_list, "e.g. 0.1,1,5");
  c_sweep->add_option("--basis-list", sw.basis_list, "e.g. svd,dct,random");
  c_sweep->add_option("--seed", sw.seed);
  c_sweep->add_option("--batch", sw.batch)->check(CLI::PositiveNumber);
  c_sweep->add_option("--workers", sw.workers)->check(CLI::PositiveNumber);
  c_sweep->add_option("--out", sw.out, "CSV file (stdout when omitted)");
  c_sweep->add_flag("--no-timing", sw.no_timing);
  add_raw_flags(c_sweep, sw.raw);

  DiagArgs dg;
  std::vector<dls::Probe> probes;
  auto* c_diag = app.add_subcommand("diag", "KE, TKE and probe spectra of original vs reconstruction");
  c_diag->add_option("--orig", dg.orig)->required();
  c_diag->add_option("--recon", dg.recon)->required();
  c_diag->add_option("--vars", dg.vars);
  c_diag->add_option("--probes", dg.probes, "i,j,k;i,j,k;...");
  c_diag->add_option("--dt", dg.dt)->check(CLI::PositiveNumber);
  c_diag->add_option("--window", dg.window)->check(CLI::IsMember({"none", "hann"}));
  c_diag->add_option("--out", dg.out, "Output directory");

  std::string insp_archive;
  bool insp_json = false;
  auto* c_insp = app.add_subcommand("inspect", "Dump an archive header");
  c_insp->add_option("--archive", insp_archive)->required();
  c_insp->add_flag("--json", insp_json);

  try {
    app.parse(argc, argv);
    // List flags are parsed here so a malformed list is still a usage error.
    if (*c_sweep) {
      for (const auto& s : split(sw.m_list, ',')) {
        auto v = parse_size(s);
        if (!v || *v < 2) throw CLI::ValidationError("--m-list", "bad patch edge '" + s + "'");
        sw_m.push_back(*v);
      }
      for (const auto& s : split(sw.eps_list, ',')) {
        auto v = parse_double(s);
        if (!v || *v < 0) throw CLI::ValidationError("--eps-list", "bad tolerance '" + s + "'");
        sw_eps.push_back(*v);
      }
      for (const auto& s : split(sw.basis_list, ',')) {
        auto v = dls::parse_basis_kind(s);
        if (!v) throw CLI::ValidationError("--basis-list", "unknown basis '" + s + "'");
        sw_kinds.push_back(*v);
      }
      if (sw_m.empty() || sw_eps.empty() || sw_kinds.empty())
        throw CLI::ValidationError("--m-list/--eps-list/--basis-list", "lists must not be empty");
    }
    if (*c_diag) {
      for (const auto& s : split(dg.probes, ';')) {
        const auto parts = split(s, ',');
        std::optional<std::size_t> v[3];
        if (parts.size() == 3)
          for (int i = 0; i < 3; ++i) v[i] = parse_size(parts[i]);
        if (parts.size() != 3 || !v[0] || !v[1] || !v[2])
          throw CLI::ValidationError("--probes", "bad probe '" + s + "', expected i,j,k");
        probes.push_back({*v[0], *v[1], *v[2]});
      }
    }
    if (*c_learn && learn.in.empty() && learn.basis == "svd")
      throw CLI::RequiredError("--in (needed by --basis svd)");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_gen) return run_gen(gen);
    if (*c_learn) return run_learn(learn);
    if (*c_comp) return run_compress(comp);
    if (*c_dec) return run_decompress(dec);
    if (*c_eval) return run_eval(ev);
    if (*c_sweep) return run_sweep(sw, sw_m, sw_eps, sw_kinds);
    if (*c_diag) return run_diag(dg, probes);
    if (*c_insp) return run_inspect(insp_archive, insp_json);
  } catch (const dls::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
