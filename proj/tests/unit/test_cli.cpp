#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <kerrloss/cli/run_config.hpp>

namespace fs = std::filesystem;
using namespace kerrloss;
using kerrloss::cli::RunConfig;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run(const std::string& args) {
  std::string cmd = std::string(KERRLOSS_CLI_PATH) + " " + args + " 2>&1";
  FILE* f = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, f)) out.append(buf, n);
  int status = pclose(f);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kerrloss_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(RunConfigText, ParsesAndHashes) {
  RunConfig c = cli::parse_config_text("# comment\nomega = 2\nkappa2=0.5\nnmax=8\ntimes=0.1, 0.2\n");
  EXPECT_EQ(c.params.omega, 2.0);
  EXPECT_EQ(c.params.kappa2, 0.5);
  EXPECT_EQ(c.n_max, 8);
  EXPECT_EQ(c.times, (std::vector<double>{0.1, 0.2}));
  RunConfig again = cli::parse_config_text(c.serialize());
  EXPECT_EQ(again.serialize(), c.serialize());
  EXPECT_EQ(again.hash(), c.hash());
  again.out = "elsewhere";
  EXPECT_EQ(again.hash(), c.hash());
  again.seed = 7;
  EXPECT_NE(again.hash(), c.hash());
}

TEST(RunConfigText, RejectsBadInput) {
  EXPECT_THROW(cli::parse_config_text("bogus=1"), ValidationError);
  EXPECT_THROW(cli::parse_config_text("omega=abc"), ValidationError);
  EXPECT_THROW(cli::parse_config_text("no equals sign"), ValidationError);
  RunConfig c;
  c.params.kappa1 = -1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = RunConfig{};
  c.noise_times = {2.0, 1.0};
  EXPECT_THROW(c.validate(), ValidationError);
  c = RunConfig{};
  c.initial = "file";
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Cli, SpectrumListsAsymptoticModes) {
  fs::path dir = scratch("spectrum");
  Result r = run("spectrum --omega 1 --U 0.3 --kappa1 0 --kappa2 1 --nmax 8 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  int modes = 0;
  std::istringstream is(r.out);
  for (std::string line; std::getline(is, line);) modes += line.rfind("asymptotic mode", 0) == 0;
  EXPECT_EQ(modes, 4);
  EXPECT_NE(r.out.find("ZeroKappa1"), std::string::npos);
  std::string csv = slurp(dir / "spectrum.csv");
  EXPECT_EQ(csv.rfind("# config_hash=", 0), 0u);
  EXPECT_NE(csv.find("m,k,re_lambda,im_lambda"), std::string::npos);
}

TEST(Cli, RerunIsByteIdentical) {
  fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  const std::string args = "evolve --omega 1 --U 0.5 --kappa1 0.3 --kappa2 1 --nmax 8 --initial coherent --alpha 0.8 --times 0.1,1";
  ASSERT_EQ(run(args + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("evolve --config " + (a / "run.cfg").string() + " --out " + b.string()).code, 0);
  for (const char* f : {"evolution.csv", "expectations.csv"}) {
    std::string x = slurp(a / f);
    EXPECT_FALSE(x.empty());
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
}

TEST(Cli, EvolveWithOracleAndHeisenberg) {
  fs::path dir = scratch("evolve");
  Result r = run("evolve --omega 1 --U 0.5 --kappa1 0.3 --kappa2 1 --nmax 8 --initial coherent --alpha 0.8 --times 0.5 "
                 "--oracle --heisenberg a --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("oracle max relative deviation"), std::string::npos);
  for (const char* f : {"evolution_oracle.csv", "expectations_oracle.csv", "heisenberg_a.csv", "run.cfg"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Cli, ValidationErrorsExitOne) {
  fs::path dir = scratch("invalid");
  EXPECT_EQ(run("spectrum --kappa1 -1 --out " + dir.string()).code, 1);
  EXPECT_EQ(run("spectrum --set bogus=3 --out " + dir.string()).code, 1);
  EXPECT_EQ(run("spectrum --nmax 1 --out " + dir.string()).code, 1);
  EXPECT_EQ(run("nonexistent").code, 1);
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run("evolve --initial file --initial-file " + (dir / "bad.json").string() + " --out " + dir.string()).code, 1);
}

TEST(Cli, VerifyPassesAndReportShape) {
  fs::path dir = scratch("verify");
  Result r = run("verify --draws 1 --nmax 8 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  nlohmann::json j = nlohmann::json::parse(slurp(dir / "verify_report.json"));
  ASSERT_TRUE(j.is_array());
  EXPECT_GT(j.size(), 10u);
  for (const auto& e : j) {
    EXPECT_TRUE(e["check"].is_string());
    EXPECT_TRUE(e["max_dev"].is_number());
    EXPECT_TRUE(e["tolerance"].is_number());
    EXPECT_TRUE(e["pass"].get<bool>());
  }
}

TEST(Cli, FaultInjectionFailsVerify) {
  fs::path dir = scratch("fault");
  Result r = run("verify --draws 1 --nmax 8 --fault-flip-superdiag --out " + dir.string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, NoiseShortRun) {
  fs::path dir = scratch("noise");
  Result r = run("noise --omega 1 --U 0 --kappa1 1 --kappa2 0 --noise-times 0.5 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("gates pass"), std::string::npos);
  nlohmann::json g = nlohmann::json::parse(slurp(dir / "gates.json"));
  EXPECT_TRUE(g.contains("config_hash"));
  EXPECT_TRUE(g["runs"][0]["gates"]["pass"].get<bool>());
  for (const char* f : {"cumulants.csv", "noise_t0.5.json", "density_t0.5.csv", "z_t0.5.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(slurp(dir / "density_t0.5.csv").rfind("# config_hash=", 0), 0u);
}
