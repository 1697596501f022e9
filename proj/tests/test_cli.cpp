#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(SOCSTATUS_TEST_DIR) / "cli_work";

int run(const std::string& args, const std::string& stderr_file = "/dev/null") {
  const std::string cmd = std::string(SOCSTATUS_BIN) + " " + args + " >/dev/null 2>" + stderr_file;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

std::map<std::string, std::string> csv_pairs(const fs::path& p, std::size_t value_col) {
  std::map<std::string, std::string> out;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    out[cells[0]] = cells.at(value_col);
  }
  return out;
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = kWork / ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  // Small planted corpus shared by the model subcommands.
  void synth(std::size_t n = 60) {
    ASSERT_EQ(run("synth --n " + std::to_string(n) + " --seed 3 --out " + p("data")), 0);
  }
  std::string data_args() const { return "--events " + p("data/events.csv") + " --labels " + p("data/labels.csv"); }
};

}  // namespace

TEST_F(Cli, SynthDeterministic) {
  ASSERT_EQ(run("synth --n 80 --seed 11 --out " + p("a")), 0);
  ASSERT_EQ(run("synth --n 80 --seed 11 --threads 4 --out " + p("b")), 0);
  const auto a = snapshot(p("a"));
  EXPECT_TRUE(a.count("events.csv"));
  EXPECT_TRUE(a.count("labels.csv"));
  EXPECT_EQ(a, snapshot(p("b")));
  ASSERT_EQ(run("synth --n 80 --seed 12 --out " + p("c")), 0);
  EXPECT_NE(a, snapshot(p("c")));
}

TEST_F(Cli, AnalyzeChordedCycle) {
  write(p("e.csv"), "src,dst,weight\na,b,1\nb,c,1\nc,d,1\nd,a,1\na,c,2\n");
  write(p("l.csv"), "node,status\na,M\nb,S\nc,M\nd,S\n");
  const std::string in = "--edgelist " + p("e.csv") + " --labels " + p("l.csv");
  ASSERT_EQ(run("analyze " + in + " --out " + p("a")), 0);
  ASSERT_EQ(run("analyze " + in + " --threads 3 --out " + p("b")), 0);
  const auto a = snapshot(p("a"));
  ASSERT_TRUE(a.count("topology.tsv"));
  EXPECT_NE(a.at("topology.tsv").find("0.8333"), std::string::npos);
  EXPECT_EQ(a, snapshot(p("b")));
}

TEST_F(Cli, NulltestStarSignificantAndRepeatable) {
  std::string e = "src,dst,weight\n", l = "node,status\nc,M\n";
  for (int i = 1; i <= 9; ++i) {
    e += "c,l" + std::to_string(i) + ",2\n";
    l += "l" + std::to_string(i) + ",S\n";
  }
  write(p("e.csv"), e);
  write(p("l.csv"), l);
  const std::string in = "nulltest --edgelist " + p("e.csv") + " --labels " + p("l.csv") + " --rho 0.1";
  ASSERT_EQ(run(in + " --shuffles 100 --seed 1 --out " + p("a")), 0);
  ASSERT_EQ(run(in + " --shuffles 100 --seed 1 --threads 3 --out " + p("b")), 0);
  EXPECT_EQ(snapshot(p("a")), snapshot(p("b")));
  ASSERT_EQ(run(in + " --shuffles 2000 --seed 1 --format json --out " + p("c")), 0);
  const auto report = slurp(p("c/null_p_manager_is_sh.json"));
  EXPECT_NE(report.find("\"significant\": true"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("c/null_p_manager_is_sh.tsv")));
}

TEST_F(Cli, TrainPredictDeterministicAndClamped) {
  synth();
  const std::string tr = "train " + data_args() + " --epochs 30";
  ASSERT_EQ(run(tr + " --out " + p("m1")), 0);
  ASSERT_EQ(run(tr + " --threads 4 --out " + p("m2")), 0);
  EXPECT_EQ(snapshot(p("m1")), snapshot(p("m2")));

  const std::string pr = "predict " + data_args() + " --model " + p("m1/model.json");
  ASSERT_EQ(run(pr + " --out " + p("p1")), 0);
  ASSERT_EQ(run(pr + " --threads 2 --out " + p("p2")), 0);
  EXPECT_EQ(snapshot(p("p1")), snapshot(p("p2")));
  // Every node is labeled, so predictions echo the labels.
  const auto truth = csv_pairs(p("data/labels.csv"), 1);
  const auto pred = csv_pairs(p("p1/predictions.csv"), 1);
  EXPECT_EQ(pred, truth);
}

TEST_F(Cli, EvaluateDeterministic) {
  synth();
  const std::string ev = "evaluate " + data_args() + " --epochs 20 --folds 3";
  ASSERT_EQ(run(ev + " --out " + p("a")), 0);
  ASSERT_EQ(run(ev + " --threads 3 --out " + p("b")), 0);
  const auto a = snapshot(p("a"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, snapshot(p("b")));
}

TEST_F(Cli, CorruptModelExitsFour) {
  synth();
  ASSERT_EQ(run("train " + data_args() + " --epochs 5 --out " + p("m")), 0);
  auto text = slurp(p("m/model.json"));
  text.resize(text.size() / 2);
  write(p("bad.json"), text);
  EXPECT_EQ(run("predict " + data_args() + " --model " + p("bad.json") + " --out " + p("out")), 4);
  EXPECT_FALSE(fs::exists(p("out")));
}

TEST_F(Cli, EmptyEventsExitsTwo) {
  write(p("empty.csv"), "");
  write(p("l.csv"), "node,status\na,M\n");
  EXPECT_EQ(run("analyze --events " + p("empty.csv") + " --labels " + p("l.csv") + " --out " + p("out"), p("err")), 2);
  EXPECT_NE(slurp(p("err")).find("empty.csv"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("out")));
}
