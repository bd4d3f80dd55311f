#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mipdiff/io.hpp"
#include "mipdiff/phased_array.hpp"
#include "mipdiff/projection.hpp"
#include "temp_dir.hpp"

#ifndef MIPDIFF_CLI_PATH
#error "MIPDIFF_CLI_PATH must name the CLI binary"
#endif

using namespace mipdiff;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string output;
};

CliResult run_cli(const test_support::TempDir& dir, const std::string& args) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string("'") + MIPDIFF_CLI_PATH + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> manifest_keys(const fs::path& p) {
  std::map<std::string, std::string> keys;
  std::istringstream is(slurp(p));
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) keys[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return keys;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small venous phantom: 32x32x6, one dark tube.
void make_phantom(const test_support::TempDir& dir) {
  const auto r = run_cli(dir, "phantom -o " + q(dir / "ph") +
                                  " --width 32 --height 32 --depth 6 --tubes '2,8,3 29,22,3 2 -0.2'");
  REQUIRE_MESSAGE(r.code == 0, r.output);
}

ScalarField as_float(const ScalarField& f) {
  ScalarField out = f;
  for (auto& v : out.values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace

TEST_CASE("filter with alpha 0 is bit-identical") {
  test_support::TempDir dir;
  make_phantom(dir);
  const auto r = run_cli(dir, "filter -i " + q(dir / "ph_noisy.vol") + " -o " + q(dir / "f.vol") + " --alpha 0");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(dir / "f.vol") == slurp(dir / "ph_noisy.vol"));
  CHECK(fs::exists(dir / "f_trace_z0.csv"));
  CHECK(fs::exists(dir / "f_trace_z5.csv"));
}

TEST_CASE("missing input exits 1 and names the path") {
  test_support::TempDir dir;
  const auto missing = dir / "nope.vol";
  const auto r = run_cli(dir, "filter -i " + q(missing) + " -o " + q(dir / "f.vol"));
  CHECK(r.code == 1);
  CHECK(r.output.find(missing.string()) != std::string::npos);
}

TEST_CASE("configuration errors exit 2 and name the key") {
  test_support::TempDir dir;
  make_phantom(dir);
  auto r = run_cli(dir, "filter -i " + q(dir / "ph_noisy.vol") + " -o " + q(dir / "f.vol") + " --alpha -1");
  CHECK(r.code == 2);
  CHECK(r.output.find("alpha") != std::string::npos);

  std::ofstream(dir / "bad.conf") << "# comment\nalpha = 2\nbogus_key = 3\n";
  r = run_cli(dir, "filter --config " + q(dir / "bad.conf") + " -i " + q(dir / "ph_noisy.vol") + " -o " +
                       q(dir / "f.vol"));
  CHECK(r.code == 2);
  CHECK(r.output.find("bogus_key") != std::string::npos);

  r = run_cli(dir, "filter --no-such-flag 1");
  CHECK(r.code == 2);
}

TEST_CASE("manifest lists effective parameters and reproduces the run") {
  test_support::TempDir dir;
  make_phantom(dir);
  auto r = run_cli(dir, "filter -i " + q(dir / "ph_noisy.vol") + " -o " + q(dir / "a.vol") + " --threads 1");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto keys = manifest_keys(dir / "a.manifest");
  CHECK(keys.at("alpha") == "2");
  CHECK(keys.at("step") == "0.01");
  CHECK(keys.at("tolerance") == "0.0001");
  CHECK(keys.at("max_iterations") == "50");
  CHECK(keys.at("command") == "filter");
  CHECK(slurp(dir / "a.manifest").find("# sha256 ") != std::string::npos);
  CHECK(slurp(dir / "a.manifest").find("iterations = ") != std::string::npos);

  r = run_cli(dir, "filter --config " + q(dir / "a.manifest") + " -o " + q(dir / "b.vol") + " --threads 4");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(dir / "a.vol") == slurp(dir / "b.vol"));
  CHECK(slurp(dir / "a_trace_z3.csv") == slurp(dir / "b_trace_z3.csv"));

  // Precedence: flags over config over defaults.
  std::ofstream(dir / "c.conf") << "alpha = 5\nstep = 0.02\n";
  r = run_cli(dir, "filter --config " + q(dir / "c.conf") + " -i " + q(dir / "ph_noisy.vol") + " -o " +
                       q(dir / "c.vol") + " --alpha 3");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto ck = manifest_keys(dir / "c.manifest");
  CHECK(ck.at("alpha") == "3");
  CHECK(ck.at("step") == "0.02");
  CHECK(ck.at("tolerance") == "0.0001");
}

TEST_CASE("mip on a single slice with alpha 0 returns the slice") {
  test_support::TempDir dir;
  const Volume one(std::vector<ScalarField>{ScalarField(12, 12, std::vector<double>(144, 0.5))});
  auto v = one;
  v(3, 4, 0) = 0.75;
  write_volume(v, dir / "one.vol");
  const auto r = run_cli(dir, "mip -i " + q(dir / "one.vol") + " -o " + q(dir / "m") + " --alpha 0");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(read_volume(dir / "m.vol") == v);
  CHECK(fs::exists(dir / "m.pgm"));
  CHECK(fs::exists(dir / "m_trace.csv"));
  CHECK(slurp(dir / "m_metrics.csv").find("mip,identical,na,") != std::string::npos);
}

TEST_CASE("swi with non-negative phase and alpha 0 returns the plain minimum projection") {
  test_support::TempDir dir;
  make_phantom(dir);
  write_volume(Volume(32, 32, 6, 0.25), dir / "phase.vol");
  const auto r = run_cli(dir, "swi -i " + q(dir / "ph_noisy.vol") + " --phase " + q(dir / "phase.vol") +
                                  " -o " + q(dir / "s") + " --alpha 0");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(read_volume(dir / "s.vol").slice(0) == project(read_volume(dir / "ph_noisy.vol"), ProjectionKind::min));
  CHECK(fs::exists(dir / "s_filtered_mip.vol"));
}

TEST_CASE("pc matches a composition of library calls") {
  test_support::TempDir dir;
  auto r = run_cli(dir, "phantom --preset phase_contrast -o " + q(dir / "pc") +
                            " --width 24 --height 24 --depth 4 --tubes '2,8,2 21,16,2 2 0.5'"
                            " --channels '6,12,20,0.05;18,12,20,0.1'");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  REQUIRE(fs::exists(dir / "pc_c2_z.vol"));
  r = run_cli(dir, "pc -i " + q(dir / "pc") + " -o " + q(dir / "out") + " --threads 2 --sigma " +
                       q(dir / "pc_sigma.txt"));
  REQUIRE_MESSAGE(r.code == 0, r.output);

  FlowChannelSet flow;
  for (int k = 1; k <= 2; ++k) {
    const auto base = (dir / ("pc_c" + std::to_string(k))).string();
    flow.channels.push_back({read_volume(base + "_x.vol").slice(0), read_volume(base + "_y.vol").slice(0),
                             read_volume(base + "_z.vol").slice(0)});
  }
  AdaptiveParams p;
  const auto expected = pc_pipeline(flow, p, FlowCombineMode::sum, read_sigma_list(dir / "pc_sigma.txt"));
  CHECK(read_volume(dir / "out.vol").slice(0) == as_float(expected.combined));
  CHECK(read_volume(dir / "out_plain.vol").slice(0) == as_float(expected.plain));
  CHECK(read_volume(dir / "out_c1.vol").slice(0) == as_float(expected.scaled.channels[0]));
  CHECK(read_volume(dir / "out_c2.vol").slice(0) == as_float(expected.scaled.channels[1]));
  const auto metrics = slurp(dir / "out_metrics.csv");
  CHECK(metrics.find("plain,identical,na,") != std::string::npos);
  CHECK(metrics.find("filter_synthesized,") != std::string::npos);

  r = run_cli(dir, "pc --config " + q(dir / "out.manifest") + " -o " + q(dir / "again") + " --threads 1");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(dir / "again.vol") == slurp(dir / "out.vol"));
}

TEST_CASE("compare writes four method rows") {
  test_support::TempDir dir;
  make_phantom(dir);
  const auto r = run_cli(dir, "compare -i " + q(dir / "ph_noisy.vol") + " --reference " +
                                  q(dir / "ph_clean.vol") + " -o " + q(dir / "cmp.csv") + " --roi 4,4,24,24");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  std::istringstream is(slurp(dir / "cmp.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "method,psnr_input,psnr_ref,cr,cpp");
  for (const auto& l : lines) CHECK(std::count(l.begin(), l.end(), ',') == 4);
  CHECK(lines[4].rfind("proposed,", 0) == 0);
  CHECK(fs::exists(dir / "cmp_proposed.vol"));
}

TEST_CASE("constant input compares as identical") {
  test_support::TempDir dir;
  write_volume(Volume(8, 8, 2, 0.5), dir / "flat.vol");
  const auto r = run_cli(dir, "compare -i " + q(dir / "flat.vol") + " -o " + q(dir / "cmp.csv"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  std::istringstream is(slurp(dir / "cmp.csv"));
  std::string line;
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(line.find(",identical,") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 4);
}

TEST_CASE("alpha sweep rows are sorted") {
  test_support::TempDir dir;
  make_phantom(dir);
  auto r = run_cli(dir, "alpha-sweep -i " + q(dir / "ph_noisy.vol") + " -o " + q(dir / "sw.csv") +
                            " --alphas 4,1,2");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  std::istringstream is(slurp(dir / "sw.csv"));
  std::string line;
  std::vector<std::string> alphas;
  std::getline(is, line);
  CHECK(line == "alpha,psnr");
  while (std::getline(is, line)) alphas.push_back(line.substr(0, line.find(',')));
  CHECK(alphas == std::vector<std::string>{"1", "2", "4"});

  r = run_cli(dir, "alpha-sweep -i " + q(dir / "ph_noisy.vol") + " -o " + q(dir / "one.csv") + " --alphas 3");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto one = slurp(dir / "one.csv");
  CHECK(std::count(one.begin(), one.end(), '\n') == 2);
}

TEST_CASE("project and metrics subcommands") {
  test_support::TempDir dir;
  make_phantom(dir);
  auto r = run_cli(dir, "project -i " + q(dir / "ph_noisy.vol") + " -o " + q(dir / "p") + " --projection min");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(read_volume(dir / "p.vol").slice(0) == project(read_volume(dir / "ph_noisy.vol"), ProjectionKind::min));
  CHECK(slurp(dir / "p.pgm").rfind("P5\n32 32\n65535\n", 0) == 0);

  r = run_cli(dir, "metrics -i " + q(dir / "ph_noisy.vol") + " --filtered " + q(dir / "ph_noisy.vol") + " -o " +
                       q(dir / "m.csv"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(dir / "m.csv").find("filtered,identical,") != std::string::npos);
}
