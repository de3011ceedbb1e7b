#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dls/basis.hpp"
#include "dls/binary_io.hpp"
#include "dls/field.hpp"
#include "test_util.hpp"

#ifndef DLS_CLI_PATH
#error "DLS_CLI_PATH must point at the dls executable"
#endif

using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const TempDir& dir, const std::string& args) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" + DLS_CLI_PATH + "' " + args + " 2> '" +
                          err.string() + "'";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream e(err);
  std::ostringstream ss;
  ss << e.rdbuf();
  r.err = ss.str();
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("gen") {
  TempDir dir("cli");
  Run r = run(dir, "gen --kind multisine --dims 12,12,12 --snapshots 4 --seed 3 --out a");
  CHECK(r.code == 0);
  for (int t = 0; t < 4; ++t) CHECK(fs::exists(dir / ("a/" + dls::snapshot_filename("u", t))));
  r = run(dir, "gen --kind multisine --dims 12,12,12 --snapshots 4 --seed 3 --out b");
  for (int t = 0; t < 4; ++t) {
    const auto name = dls::snapshot_filename("u", t);
    CHECK(dls::read_file(dir / ("a/" + name)) == dls::read_file(dir / ("b/" + name)));
  }
  CHECK(run(dir, "gen --kind taylor --vars u,v,w --dims 4,4,4 --snapshots 1 --out c").code == 0);
  CHECK(fs::exists(dir / "c/w_0000.fld"));

  CHECK(run(dir, "gen --snapshots 0 --out d").code == 1);
  CHECK(run(dir, "gen --kind unknown").code == 2);
  CHECK(run(dir, "gen --dims 4,4").code == 2);
  CHECK(run(dir, "gen --vars q").code == 2);
  CHECK(run(dir, "").code == 2);
  CHECK(run(dir, "frobnicate").code == 2);
  CHECK(run(dir, "--help").code == 0);
}

TEST_CASE("learn") {
  TempDir dir("cli");
  REQUIRE(run(dir, "gen --kind smooth --dims 10,10,10 --snapshots 4 --out s").code == 0);
  Run r = run(dir, "learn --in 's/u_*.fld' --m 2 --basis svd --seed 1 --out b1.dlsb");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["m"] == 2);
  CHECK(j["kind"] == "svd");

  // Perturb files 2..4: same basis.
  for (int t = 1; t < 4; ++t) {
    const auto p = dir / ("s/" + dls::snapshot_filename("u", t));
    dls::Field f = dls::load_field(p);
    for (double& v : f.data) v *= 3.0;
    dls::save_field(f, p);
  }
  CHECK(run(dir, "learn --in 's/u_*.fld' --m 2 --seed 1 --out b2.dlsb").code == 0);
  CHECK(dls::read_file(dir / "b1.dlsb") == dls::read_file(dir / "b2.dlsb"));

  REQUIRE(run(dir, "gen --kind taylor --dims 10,10,10 --snapshots 1 --out t").code == 0);
  CHECK(run(dir, "learn --in 's/u_*.fld' --m 3 --basis dct --out d1.dlsb").code == 0);
  CHECK(run(dir, "learn --in 't/u_*.fld' --m 3 --basis dct --out d2.dlsb").code == 0);
  CHECK(dls::read_file(dir / "d1.dlsb") == dls::read_file(dir / "d2.dlsb"));

  CHECK(run(dir, "learn --in 's/u_*.fld' --m 1 --out x.dlsb").code == 2);
  CHECK(run(dir, "learn --in 's/u_*.fld' --basis pca --out x.dlsb").code == 2);
  CHECK(run(dir, "learn --in 'nothing_*.fld' --m 2 --out x.dlsb").code == 1);
  CHECK(run(dir, "learn --in 's/u_*.fld' --raw-dtype f32 --out x.dlsb").code == 2);
}

TEST_CASE("compress, decompress, eval, inspect") {
  TempDir dir("cli");
  REQUIRE(run(dir, "gen --kind multisine --dims 16,16,16 --snapshots 3 --out s").code == 0);
  REQUIRE(run(dir, "learn --in 's/u_*.fld' --m 4 --out u.dlsb").code == 0);
  Run r = run(dir, "compress --in 's/u_*.fld' --basis u.dlsb --eps-t 1 --workers 1 --no-timing --out w1.ddls");
  CHECK(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 4);
  for (int t = 0; t < 3; ++t) {
    const auto j = nlohmann::json::parse(ls[t]);
    CHECK(j["snapshot"] == t);
    CHECK(j["nrmse_pct"].get<double>() <= 1.0);
  }
  const auto summary = nlohmann::json::parse(ls[3]);
  CHECK_FALSE(summary.contains("wall_s"));
  CHECK(summary["cr"].get<double>() > 1.0);

  const Run r8 = run(dir, "compress --in 's/u_*.fld' --basis u.dlsb --eps-t 1 --workers 8 --no-timing --out w8.ddls");
  CHECK(r8.code == 0);
  CHECK(r8.out == r.out);
  CHECK(dls::read_file(dir / "w1.ddls") == dls::read_file(dir / "w8.ddls"));

  r = run(dir, "compress --in 's/u_*.fld' --basis missing.dlsb --out x.ddls");
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.dlsb") != std::string::npos);
  CHECK(r.out.empty());

  CHECK(run(dir, "decompress --archive w1.ddls --basis u.dlsb --out rec").code == 0);
  CHECK(run(dir, "decompress --archive w1.ddls --basis u.dlsb --out one --snapshot 2 --workers 3").code == 0);
  CHECK(dls::read_file(dir / "one/u_0002.fld") == dls::read_file(dir / "rec/u_0002.fld"));
  CHECK_FALSE(fs::exists(dir / "one/u_0000.fld"));
  CHECK(run(dir, "decompress --archive w1.ddls --basis u.dlsb --out bad --snapshot 3").code == 1);

  r = run(dir, "eval --orig 's/u_*.fld' --recon 'rec/u_*.fld'");
  CHECK(r.code == 0);
  auto el = lines(r.out);
  REQUIRE(el.size() == 6);
  CHECK(el[0] == "t,original,reconstructed,nrmse_pct");
  r = run(dir, "eval --orig 's/u_*.fld' --recon 's/u_*.fld'");
  el = lines(r.out);
  for (int t = 1; t <= 3; ++t) CHECK(el[t].substr(el[t].rfind(',') + 1) == "0");

  REQUIRE(run(dir, "gen --kind multisine --dims 16,16,8 --snapshots 3 --out other").code == 0);
  CHECK(run(dir, "eval --orig 's/u_*.fld' --recon 'other/u_*.fld'").code == 1);

  // Known pair: u = [1, 0], recon = [1, 0.01] gives 1 %.
  dls::Field u = dls::Field::zeros({2, 1, 1});
  u.data = {1, 0};
  dls::save_field(u, dir / "p_0000.fld");
  u.data = {1, 0.01};
  dls::save_field(u, dir / "q_0000.fld");
  r = run(dir, "eval --orig p_0000.fld --recon q_0000.fld");
  CHECK(std::stod(lines(r.out)[1].substr(lines(r.out)[1].rfind(',') + 1)) == doctest::Approx(1.0));

  r = run(dir, "inspect --archive w1.ddls");
  CHECK(r.code == 0);
  CHECK(r.out.find("dims           16x16x16") != std::string::npos);
  CHECK(run(dir, "inspect --archive w1.ddls").out == r.out);
  r = run(dir, "inspect --archive w1.ddls --json");
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["m"] == 4);
  CHECK(j["snapshots"] == 3);
  CHECK(j["batches"].size() == 3);
  auto bytes = dls::read_file(dir / "w1.ddls");
  bytes[0] = 'Z';
  dls::write_file(dir / "bad.ddls", bytes);
  CHECK(run(dir, "inspect --archive bad.ddls").code == 1);
}

TEST_CASE("sweep and config file") {
  TempDir dir("cli");
  REQUIRE(run(dir, "gen --kind multisine --dims 16,16,16 --snapshots 2 --out s").code == 0);
  Run r = run(dir, "sweep --in 's/u_*.fld' --m-list 2,4 --eps-list 1,5 --basis-list svd,random --no-timing --out sw.csv");
  CHECK(r.code == 0);
  std::ifstream f(dir / "sw.csv");
  std::ostringstream ss;
  ss << f.rdbuf();
  const auto rows = lines(ss.str());
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == "m,lambda,basis,eps_t_pct,nrmse_pct,cr,cr_with_basis,wall_s,throughput_MBps");
  CHECK(rows[1].rfind("2,8,svd,1,", 0) == 0);
  const Run again = run(dir, "sweep --in 's/u_*.fld' --m-list 2,4 --eps-list 1,5 --basis-list svd,random --no-timing");
  CHECK(again.out == ss.str());
  CHECK(run(dir, "sweep --in 's/u_*.fld' --m-list 1").code == 2);
  CHECK(run(dir, "sweep --in 's/u_*.fld' --basis-list foo").code == 2);

  {
    std::ofstream cfg(dir / "gen.toml");
    cfg << "[gen]\nkind = \"taylor\"\ndims = \"6,6,6\"\nsnapshots = 2\nout = \"cfg\"\n";
  }
  CHECK(run(dir, "--config gen.toml gen").code == 0);
  CHECK(fs::exists(dir / "cfg/u_0001.fld"));
  CHECK(dls::load_field(dir / "cfg/u_0001.fld").dims == dls::Dims{6, 6, 6});
}

TEST_CASE("diag") {
  TempDir dir("cli");
  REQUIRE(run(dir, "gen --kind taylor --vars u,v,w --dims 8,8,8 --snapshots 8 --dt 0.7853981633974483 --out s").code == 0);
  Run r = run(dir, "diag --orig 's/*.fld' --recon 's/*.fld' --probes '1,2,3;0,0,0;7,7,7' --dt 0.5 --out d");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["ke_recovery_pct"] == 100.0);
  CHECK(j["tke_recovery_pct"] == 100.0);
  for (const auto& p : j["probes"]) CHECK(p["match"] == true);
  CHECK(fs::exists(dir / "d/ke.csv"));
  CHECK(fs::exists(dir / "d/tke.csv"));
  CHECK(fs::exists(dir / "d/psd_1_2_3.csv"));
  std::ifstream ke(dir / "d/ke.csv");
  std::string head;
  std::getline(ke, head);
  CHECK(head == "t,KE_orig,KE_recon");
  std::ifstream psd(dir / "d/psd_7_7_7.csv");
  std::getline(psd, head);
  CHECK(head == "f,P_orig,P_recon");

  CHECK(run(dir, "diag --orig 's/*.fld' --recon 's/*.fld' --probes '8,0,0' --out d2").code == 1);
  CHECK(run(dir, "diag --orig 's/*.fld' --recon 's/*.fld' --probes '1,2' --out d2").code == 2);
}
