#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("tsact_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const fs::path log = dir_ / "stdout.txt";
    const std::string cmd = "env -u UCR_DATA_ROOT " + std::string(TSACT_CLI) + " " + args + " > " + log.string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    for (const fs::path& f : {log, dir_ / "stderr.txt"}) {
      std::ifstream in(f);
      r.out.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return r;
  }
  std::string out_flag(const std::string& sub) const { return " --out " + (dir_ / sub).string(); }
  static std::string data() { return std::string(" --data-root ") + TSACT_TEST_DATA; }

  // The single <command>-<hash> directory under `sub`.
  fs::path run_dir(const std::string& sub) const {
    fs::path found;
    for (const auto& e : fs::directory_iterator(dir_ / sub)) found = e.path();
    return found;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndUsage) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --epochs notanumber --dataset X").code, 2);
}

TEST_F(Cli, AnalyzeOne) {
  const CliRun r = run("analyze --activation leakysinelu" + out_flag("a"));
  EXPECT_EQ(r.code, 0) << r.out;
  const fs::path d = run_dir("a");
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
  const auto j = nlohmann::json::parse(std::ifstream(d / "report.json"));
  ASSERT_EQ(j.size(), 1u);
}

TEST_F(Cli, AnalyzeAll) {
  const CliRun r = run("analyze --activation all" + out_flag("a"));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(std::ifstream(run_dir("a") / "report.json"));
  EXPECT_EQ(j.size(), 10u);
  EXPECT_NE(r.out.find("sine"), std::string::npos);
}

TEST_F(Cli, UnknownActivation) {
  const CliRun r = run("analyze --activation swish" + out_flag("a"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("leakysinelu"), std::string::npos);
}

TEST_F(Cli, TrainZeroEpochs) {
  const CliRun r = run("train --arch mlp --activation leakysinelu --dataset ChinatownSubset --epochs 0" + data() +
                    out_flag("t"));
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path d = run_dir("t");
  std::ifstream in(d / "results.jsonl");
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["status"], "completed");
  EXPECT_GE(j["test_accuracy"].get<double>(), 0.0);
  EXPECT_LE(j["test_accuracy"].get<double>(), 1.0);
  EXPECT_EQ(j["n_test"], 22);
  const auto m = nlohmann::json::parse(std::ifstream(d / "manifest.json"));
  EXPECT_EQ(m["config"]["train"]["optimizer"], "adadelta");
  EXPECT_EQ(m["config"]["train"]["epochs"], 0);
}

TEST_F(Cli, TrainErrors) {
  EXPECT_EQ(run("train --arch mlp --activation relu" + data() + out_flag("t")).code, 2);
  EXPECT_EQ(run("train --dataset NoSuchSet" + data() + out_flag("t")).code, 3);
  EXPECT_EQ(run("train --arch cnn --dataset ChinatownSubset" + data() + out_flag("t")).code, 2);
}

TEST_F(Cli, TrainDivergenceExitCode) {
  const CliRun r = run("train --dataset ChinatownSubset --epochs 5 --lr 1e300 --optimizer adam" + data() +
                    out_flag("t"));
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_NE(r.out.find("epoch"), std::string::npos);
}

TEST_F(Cli, DataRootFromEnvironment) {
  const std::string cmd = "UCR_DATA_ROOT=" + std::string(TSACT_TEST_DATA) + " " + TSACT_CLI +
                          " train --dataset ChinatownSubset --epochs 0" + out_flag("t") + " > /dev/null";
  EXPECT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
}

TEST_F(Cli, ConfigFileAndPrecedence) {
  std::ofstream(dir_ / "cfg.json") << R"({"dataset": "ChinatownSubset", "epochs": 0, "seed": 9, "data_root": ")"
                                   << TSACT_TEST_DATA << "\"}";
  const CliRun r = run("train --seed 4 --config " + (dir_ / "cfg.json").string() + out_flag("t"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto m = nlohmann::json::parse(std::ifstream(run_dir("t") / "manifest.json"));
  EXPECT_EQ(m["config"]["train"]["seed"], 4);
  EXPECT_EQ(m["config"]["train"]["epochs"], 0);
  EXPECT_EQ(m["config"]["dataset"], "ChinatownSubset");
}

TEST_F(Cli, BenchCachesAndCompareRuns) {
  const std::string bench = "bench --activations relu,leakysinelu,sine --datasets ChinatownSubset,ItalyPowerDemand "
                            "--epochs 2" + data() + out_flag("b");
  const CliRun first = run(bench);
  ASSERT_EQ(first.code, 0) << first.out;
  EXPECT_NE(first.out.find("0 cached, 6 trained"), std::string::npos) << first.out;
  const CliRun again = run(bench + " --jobs 3");
  EXPECT_NE(again.out.find("6 cached, 0 trained"), std::string::npos) << again.out;

  const fs::path results = run_dir("b") / "results.jsonl";
  const CliRun cmp = run("compare --results " + results.string() + " --arch mlp" + out_flag("c"));
  ASSERT_EQ(cmp.code, 0) << cmp.out;
  const fs::path c = run_dir("c");
  for (const char* f : {"report.json", "cd.csv", "mcm.csv", "manifest.json"}) EXPECT_TRUE(fs::exists(c / f)) << f;
  std::size_t scatters = 0;
  for (const auto& e : fs::directory_iterator(c)) scatters += e.path().filename().string().starts_with("scatter_");
  EXPECT_EQ(scatters, 3u);
}

TEST_F(Cli, CompareIncompleteExits5) {
  const CliRun b = run("bench --activations relu,sine --datasets ChinatownSubset,ItalyPowerDemand --epochs 1" + data() +
                    out_flag("b"));
  ASSERT_EQ(b.code, 0) << b.out;
  // drop the last record
  const fs::path results = run_dir("b") / "results.jsonl";
  std::vector<std::string> lines;
  {
    std::ifstream in(results);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  const auto last = nlohmann::json::parse(lines.back());
  lines.pop_back();
  {
    std::ofstream o(results, std::ios::trunc);
    for (const auto& l : lines) o << l << '\n';
  }
  const CliRun c = run("compare --results " + results.string() + out_flag("c"));
  EXPECT_EQ(c.code, 5);
  const std::string cell = last["dataset"].get<std::string>() + "/" + last["config"]["activation"]["name"].get<std::string>();
  EXPECT_NE(c.out.find(cell), std::string::npos) << c.out;
}

TEST_F(Cli, TraceReLU) {
  const CliRun r = run("trace --activation relu --input \"1,-2,3,-4,5\"");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("index,x,sigma,dsigma,dead"), std::string::npos);
  EXPECT_NE(r.out.find("0.4"), std::string::npos);  // dead fraction
}

TEST_F(Cli, TraceLeakySineLUGridIsMonotone) {
  const fs::path csv = dir_ / "trace.csv";
  const CliRun r = run("trace --activation leakysinelu --grid -6.283185307179586:6.283185307179586:401 --output " +
                    csv.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string f;
    for (int i = 0; i < 4; ++i) std::getline(ss, f, ',');
    EXPECT_GE(std::stod(f), 0.0) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 401u);
}

TEST_F(Cli, TraceGarbage) {
  std::ofstream(dir_ / "junk.txt") << "hello world\nfoo\n";
  EXPECT_EQ(run("trace --activation relu --input " + (dir_ / "junk.txt").string()).code, 3);
}

}  // namespace
