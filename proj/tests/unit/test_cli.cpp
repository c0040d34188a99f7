#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vsgdfd/cli.hpp"

using namespace vsgdfd;
namespace fs = std::filesystem;

namespace {

RunManifest parse(std::vector<std::string> args) {
  args.insert(args.begin(), "vsgdfd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_args(static_cast<int>(argv.size()), argv.data());
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "vsgdfd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vsgdfd_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("run-grid arguments") {
  const auto m = parse({"run-grid", "--seed", "7", "--trials", "100", "--updates", "1024"});
  CHECK(m.command == Command::RunGrid);
  CHECK(m.master_seed == 7);
  CHECK(m.trials == 100);
  CHECK(m.updates == 1024);
  CHECK(m.functions.size() == 4);
  CHECK(m.minibatch_sizes == std::vector<std::size_t>{1, 10});
}

TEST_CASE("gain-sim arguments") {
  const auto m = parse({"gain-sim", "--pnz", "0.01", "--n", "1,10,100,1000"});
  CHECK(m.command == Command::GainSim);
  CHECK(m.pnz == std::vector<double>{0.01});
  CHECK(m.minibatch_sizes == std::vector<std::size_t>{1, 10, 100, 1000});
  CHECK(m.trials == 1000);
  CHECK(parse({"gain-sim"}).minibatch_sizes.size() == 10);
}

TEST_CASE("usage errors name the flag") {
  try {
    parse({"run-grid", "--trials", "0"});
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(e.flag() == "--trials");
    CHECK(std::string(e.what()).find("--trials") != std::string::npos);
  }
  try {
    parse({"run-grid", "--curvatures", "1,x"});
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(e.flag() == "--curvatures");
  }
  CHECK_THROWS_AS(parse({"run-grid", "--bogus", "1"}), UsageError);
  CHECK_THROWS_AS(parse({"gain-sim", "--functions", "quad"}), UsageError);
  CHECK_THROWS_AS(parse({"frobnicate"}), UsageError);
  CHECK_THROWS_AS(parse({}), UsageError);
  CHECK_THROWS_AS(parse({"single-run", "--curvatures", "1,2"}), UsageError);
  CHECK_THROWS_AS(parse({"gain-sim", "--pnz", "1.5"}), UsageError);
  CHECK_THROWS_AS(parse({"run-grid", "--format", "gif"}), UsageError);
  CHECK_THROWS_AS(parse({"run-grid", "--help"}), HelpRequested);
}

TEST_CASE("manifest round trip") {
  auto m = default_manifest(Command::SingleRun);
  m.master_seed = 123456789012345ULL;
  m.curvatures = {0.3};
  m.eta0 = 0.25;
  m.output_dir = "some dir";
  CHECK(parse_manifest(render_manifest(m)) == m);
  for (auto c : {Command::RunGrid, Command::GainSim, Command::ReweightDemo}) {
    const auto d = default_manifest(c);
    CHECK(parse_manifest(render_manifest(d)) == d);
  }
}

TEST_CASE("config file with flag overrides") {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  const auto cfg = dir / "run.cfg";
  std::ofstream(cfg) << "# defaults\ntrials = 5\nupdates=16\nseed=3\n";
  const auto m = parse({"run-grid", "--config", cfg.string(), "--trials", "7"});
  CHECK(m.trials == 7);
  CHECK(m.updates == 16);
  CHECK(m.master_seed == 3);
  std::ofstream(cfg) << "command=gain-sim\n";
  CHECK_THROWS_AS(parse({"run-grid", "--config", cfg.string()}), UsageError);
  CHECK_THROWS_AS(parse({"run-grid", "--config", (dir / "missing.cfg").string()}), UsageError);
  fs::remove_all(dir);
}

TEST_CASE("execute writes reproducible outputs") {
  const auto a = scratch("a");
  const auto b = scratch("b");
  const std::vector<std::string> common{"--seed", "5", "--functions", "abs", "--curvatures", "1",
                                        "--noise-vars", "0.1,1", "--algos", "sgd,vsgd-fd",
                                        "--trials", "3", "--updates", "16", "--format", "svg,ppm"};
  auto args = std::vector<std::string>{"run-grid", "--out", a.string(), "--workers", "1"};
  args.insert(args.end(), common.begin(), common.end());
  CHECK(run(args) == 0);
  args = {"run-grid", "--out", b.string(), "--workers", "2"};
  args.insert(args.end(), common.begin(), common.end());
  CHECK(run(args) == 0);
  for (const char* f : {"trials.csv", "summary.csv", "heatmap.csv", "heatmaps/abs_vsgd-fd-n10.svg",
                        "heatmaps/abs_sgd-eta0.01-g1-n1.ppm"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto manifest = parse_manifest(slurp(a / "manifest.txt"));
  CHECK(manifest.master_seed == 5);
  CHECK(manifest.workers == 1);
  for (const auto& e : fs::recursive_directory_iterator(a)) CHECK(e.path().extension() != ".partial");
  CHECK(slurp(a / "summary.csv").rfind("case_id,algo_id,initial_loss,median_final_loss,diverged_trials\n", 0) == 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("other commands") {
  const auto dir = scratch("cmds");
  CHECK(run({"reweight-demo", "--out", (dir / "rw").string(), "--trials", "10"}) == 0);
  CHECK(fs::exists(dir / "rw" / "reweight.csv"));
  CHECK(fs::exists(dir / "rw" / "reweight_draws.csv"));
  CHECK(run({"single-run", "--out", (dir / "one").string(), "--updates", "32"}) == 0);
  CHECK(slurp(dir / "one" / "diagnostics.csv").rfind("iteration,dim,eta,tau,noise_ratio,outliers\n", 0) == 0);
  CHECK(fs::exists(dir / "one" / "trajectory.csv"));
  CHECK(run({"gain-sim", "--out", (dir / "g").string(), "--trials", "20", "--n", "1,5", "--sigma", "0.1"}) == 0);
  CHECK(slurp(dir / "g" / "gains.csv").rfind("mode,n,p_nz,sigma,ratio,stderr\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  std::string err;
  CHECK(run({"run-grid", "--trials", "0"}, &err) == 2);
  CHECK(err.find("--trials") != std::string::npos);
  CHECK(run({"run-grid", "--unknown"}) == 2);
  CHECK(run({"--help"}) == 0);
  const auto dir = scratch("blocked");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  CHECK(run({"reweight-demo", "--out", (dir / "file" / "sub").string(), "--trials", "2"}, &err) == 1);
  CHECK(err.find("error") != std::string::npos);
  fs::remove_all(dir);
}
