#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("heatplan_test_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args, const std::string& env = "") const {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + HEATPLAN_CLI + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read("stdout.txt");
    r.err = read("stderr.txt");
    return r;
  }

  std::string read(const std::string& name) const {
    std::ifstream is(dir_ / name, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  bool exists(const std::string& name) const { return fs::exists(dir_ / name); }

  fs::path dir_;
};

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, SimulateBangBang) {
  const CliRun r = run("simulate --t0 20 --target 60 --deadline 60 --controller bangbang");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("energy_wh=7800 "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("success=false"), std::string::npos);  // relay ends 1.7 degC under the target
  ASSERT_TRUE(exists("trajectory.csv"));
  EXPECT_EQ(count_lines(read("trajectory.csv")), 62);
  EXPECT_NE(r.err.find("deadline=60"), std::string::npos) << "resolved config is echoed";
}

TEST_F(Cli, SimulateOracle) {
  const CliRun r = run("simulate --controller oracle --trajectory-out o.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("energy_wh=3400 "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("success=true"), std::string::npos);
  EXPECT_TRUE(exists("o.csv"));
}

TEST_F(Cli, SimulateMctsWritesTrace) {
  const CliRun r = run("simulate --controller mcts --deadline 10 --mcts-sims 500 --trace trace.jsonl");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(read("trace.jsonl")), 10);
}

TEST_F(Cli, Plan) {
  CliRun r = run("plan --deadline 60");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("schedule=" + std::string(43, '0') + std::string(17, '1')), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("on_count=17 energy_wh=3400"), std::string::npos);
  r = run("plan --t0 20 --target 26 --deadline 4 --brute-force");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("schedule=0011"), std::string::npos) << r.out;
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("simulate --deadline 0").code, 2);
  EXPECT_EQ(run("simulate --controller pid").code, 2);
  EXPECT_EQ(run("sweep --vary mass").code, 2);
  EXPECT_EQ(run("sweep --controllers bangbang,pid").code, 2);
  EXPECT_EQ(run("simulate --controller ppo").code, 2);
  EXPECT_EQ(run("simulate --controller ppo --policy missing.json").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, TrainWritesPolicyAndCurve) {
  CliRun r = run("train --steps 2048 --epochs 1 --out p.json");
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(exists("p.json"));
  EXPECT_EQ(count_lines(read("p.curve.csv")), 2);  // header + one batch
  const std::string first = read("p.json");
  r = run("train --steps 2048 --epochs 1 --out p.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read("p.json"), first);

  r = run("simulate --controller ppo --policy p.json --deadline 30");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("energy_wh="), std::string::npos);
}

TEST_F(Cli, SweepAndPlot) {
  CliRun r = run("sweep --vary deadline --controllers bangbang,oracle --no-timing --out results.csv --summary s.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(read("results.csv")), 11);
  EXPECT_EQ(count_lines(read("s.csv")), 11);
  const std::string first = read("results.csv");
  ASSERT_EQ(run("sweep --vary deadline --controllers bangbang,oracle --no-timing --out results.csv").code, 0);
  EXPECT_EQ(read("results.csv"), first);

  r = run("plot --in results.csv --kind scatter_by_axis --out fig.svg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(exists("fig.svg"));
  EXPECT_TRUE(exists("fig.csv"));

  ASSERT_EQ(run("simulate --controller bangbang --trajectory-out a.csv").code, 0);
  r = run("plot --in a.csv --kind trajectory --plot-target 60 --out traj.svg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(exists("traj.svg"));

  EXPECT_EQ(run("plot --in missing.csv --kind scatter_by_axis --out x.svg").code, 2);
  EXPECT_FALSE(exists("x.svg"));
}

TEST_F(Cli, PlotInfersSweepAxis) {
  ASSERT_EQ(run("sweep --vary initial_temp --controllers oracle --no-timing --out r.csv").code, 0);
  const CliRun r = run("plot --in r.csv --out fig.svg");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(read("fig.csv").find("oracle,10,"), std::string::npos) << read("fig.csv");
}

TEST_F(Cli, ConfigFileAndPrecedence) {
  std::ofstream(dir_ / "run.ini") << "deadline=30\ncontroller=oracle\n";
  CliRun r = run("simulate --config run.ini");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("deadline=30"), std::string::npos) << r.err;
  EXPECT_EQ(count_lines(read("trajectory.csv")), 32);
  r = run("simulate --config run.ini --deadline 45");  // flag beats file
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(read("trajectory.csv")), 47);
}

TEST_F(Cli, SeedFromEnvironment) {
  const CliRun r = run("simulate --controller bangbang --deadline 5", "HEATPLAN_SEED=42");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("seed=42"), std::string::npos) << r.err;
}
