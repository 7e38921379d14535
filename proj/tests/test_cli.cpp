#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "divnet/scenario.hpp"

using namespace divnet;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("divnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(DIVNET_CLI) + " " + args + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return read_file(path("stderr.txt")); }

  ojson json(const std::string& name) const { return ojson::parse(read_file(path(name))); }

  void write(const std::string& name, const std::string& text) const { write_file(path(name), text); }

  fs::path dir_;
};

const char* kPair = R"({
  "hosts": [{"id": "a", "services": {"os": ["x", "y"]}}, {"id": "b", "services": {"os": ["x", "y"]}}],
  "links": [["a", "b"]],
  "tables": [{"service": "os", "products": ["x", "y"], "values": [[1, 0], [0, 1]]}]
})";

const char* kChain = R"({
  "hosts": [{"id": "h0", "services": {"wb": ["wb1"]}}, {"id": "h1", "services": {"wb": ["wb1"]}},
            {"id": "h2", "services": {"wb": ["wb3"]}}],
  "links": [["h0", "h1"], ["h1", "h2"]],
  "tables": [{"service": "wb", "products": ["wb1", "wb3"], "values": [[1, 0.9], [0.9, 1]]}]
})";

const char* kChainAssignment = R"({"h0": {"wb": "wb1"}, "h1": {"wb": "wb1"}, "h2": {"wb": "wb3"}})";

/// Four hosts in a line running the same product, so every rate is 1.
const char* kRateOne = R"({
  "hosts": [{"id": "h0", "services": {"os": ["x"]}}, {"id": "h1", "services": {"os": ["x"]}},
            {"id": "h2", "services": {"os": ["x"]}}, {"id": "h3", "services": {"os": ["x"]}}],
  "links": [["h0", "h1"], ["h1", "h2"], ["h2", "h3"]],
  "tables": [{"service": "os", "products": ["x"], "values": [[1]]}]
})";

}  // namespace

TEST_F(Cli, OptimizeAntiCorrelatedPair) {
  write("s.json", kPair);
  ASSERT_EQ(run("optimize --scenario " + path("s.json") + " --out " + path("a.json") + " --report " + path("r.json")), 0);
  const ojson a = json("a.json");
  EXPECT_NE(a["a"]["os"], a["b"]["os"]);
  const ojson r = json("r.json");
  EXPECT_EQ(r["gap"], 0.0);
  EXPECT_EQ(r["energy"], 0.0);
  EXPECT_TRUE(r["converged"].get<bool>());
}

TEST_F(Cli, ConflictingClampsExitOne) {
  ojson s = ojson::parse(kPair);
  s["clamps"] = ojson::array({{{"host", "a"}, {"service", "os"}, {"product", "x"}},
                              {{"host", "a"}, {"service", "os"}, {"product", "y"}}});
  write("s.json", s.dump());
  EXPECT_EQ(run("optimize --scenario " + path("s.json") + " --out " + path("a.json")), 1);
}

TEST_F(Cli, InvalidScenarioListsViolations) {
  ojson s = ojson::parse(kPair);
  s["links"].push_back({"a", "a"});
  write("s.json", s.dump());
  EXPECT_EQ(run("optimize --scenario " + path("s.json")), 1);
  EXPECT_NE(stderr_text().find("self-loop"), std::string::npos);
}

TEST_F(Cli, StrictUnknownKeys) {
  ojson s = ojson::parse(kPair);
  s["extra"] = 1;
  write("s.json", s.dump());
  EXPECT_EQ(run("optimize --scenario " + path("s.json") + " --out " + path("a.json")), 0);
  EXPECT_NE(stderr_text().find("warning: unknown key 'extra'"), std::string::npos);
  EXPECT_EQ(run("optimize --strict --scenario " + path("s.json") + " --out " + path("a.json")), 1);
}

TEST_F(Cli, StrictNonConvergenceExitTwo) {
  ASSERT_EQ(run("gen --hosts 30 --out " + path("g.json")), 0);
  EXPECT_EQ(run("optimize --strict --max-iters 1 --scenario " + path("g.json") + " --out " + path("a.json")), 2);
  EXPECT_EQ(run("optimize --max-iters 1 --scenario " + path("g.json") + " --out " + path("a.json")), 0);
}

TEST_F(Cli, EvaluateChainExact) {
  write("s.json", kChain);
  write("a.json", kChainAssignment);
  ASSERT_EQ(run("evaluate --scenario " + path("s.json") + " --assignment " + path("a.json") +
                " --entry h0 --target h2 --method exact --out " + path("e.json")),
            0);
  const ojson e = json("e.json");
  EXPECT_NEAR(e["p_marginal"].get<double>(), 0.08 * 0.9, 1e-15);
  EXPECT_NEAR(e["p_prime_marginal"].get<double>(), 0.08 * 0.08, 1e-15);
  EXPECT_NEAR(e["d_bn"].get<double>(), 0.08 / 0.9, 1e-12);
  EXPECT_NEAR(e["log10_p"].get<double>(), std::log10(0.072), 1e-12);
  EXPECT_EQ(e["method"], "exact");
  EXPECT_TRUE(e["dropped_edges"].empty());
}

TEST_F(Cli, EvaluateSampleWithinThreeStandardErrors) {
  ASSERT_EQ(run("gen --hosts 8 --degree 2.5 --seed 5 --out " + path("g.json")), 0);
  ASSERT_EQ(run("optimize --scenario " + path("g.json") + " --out " + path("a.json")), 0);
  const std::string base = "evaluate --scenario " + path("g.json") + " --assignment " + path("a.json") +
                           " --entry h0 --target h7 --method ";
  ASSERT_EQ(run(base + "exact --out " + path("x.json")), 0);
  ASSERT_EQ(run(base + "sample --samples 1000000 --out " + path("s.json")), 0);
  const ojson x = json("x.json"), s = json("s.json");
  EXPECT_EQ(s["samples"], 1000000);
  EXPECT_LE(std::abs(s["p_marginal"].get<double>() - x["p_marginal"].get<double>()), 3 * s["se"].get<double>());
  EXPECT_LE(std::abs(s["p_prime_marginal"].get<double>() - x["p_prime_marginal"].get<double>()),
            3 * s["se_prime"].get<double>());
}

TEST_F(Cli, EvaluateErrors) {
  write("s.json", kChain);
  write("a.json", kChainAssignment);
  const std::string base = "evaluate --scenario " + path("s.json") + " --assignment " + path("a.json");
  EXPECT_EQ(run(base + " --entry h0"), 1);
  EXPECT_NE(stderr_text().find("Usage"), std::string::npos);
  ojson cut = ojson::parse(kChain);
  cut["links"] = ojson::array({{"h0", "h1"}});
  write("cut.json", cut.dump());
  EXPECT_EQ(run("evaluate --scenario " + path("cut.json") + " --assignment " + path("a.json") +
                " --entry h0 --target h2"),
            1);
  EXPECT_EQ(run("evaluate --scenario " + path("s.json") + " --assignment " + path("missing.json") +
                " --entry h0 --target h2"),
            3);
}

TEST_F(Cli, SimulateRateOneChain) {
  write("s.json", kRateOne);
  write("a.json", R"({"h0": {"os": "x"}, "h1": {"os": "x"}, "h2": {"os": "x"}, "h3": {"os": "x"}})");
  ASSERT_EQ(run("simulate --scenario " + path("s.json") + " --assignment " + path("a.json") +
                " --entry h0 --target h3 --runs 200 --out " + path("r.json") + " --trace " + path("t.csv")),
            0);
  const ojson r = json("r.json");
  EXPECT_EQ(r["mttc_mean"], 3.0);
  EXPECT_EQ(r["mttc_std"], 0.0);
  EXPECT_EQ(r["success_count"], 200);
  EXPECT_EQ(read_file(path("t.csv")).substr(0, 20), "run,tick,host\n0,0,h0");
}

TEST_F(Cli, SimulateZeroRateCut) {
  ojson s = ojson::parse(kPair);
  write("s.json", s.dump());
  write("a.json", R"({"a": {"os": "x"}, "b": {"os": "y"}})");
  ASSERT_EQ(run("simulate --scenario " + path("s.json") + " --assignment " + path("a.json") +
                " --entry a --target b --runs 50 --out " + path("r.json")),
            0);
  const ojson r = json("r.json");
  EXPECT_EQ(r["success_count"], 0);
  EXPECT_EQ(r["censored_count"], 50);
  EXPECT_FALSE(r["mean_defined"].get<bool>());
  EXPECT_TRUE(r["mttc_mean"].is_null());
}

TEST_F(Cli, SimtabBrowserPairs) {
  const std::string feed = std::string(DIVNET_TEST_DATA) + "/browser_feed.json";
  ASSERT_EQ(run("simtab --feed " + feed +
                " --service browser --products cpe:/a:microsoft:internet_explorer:8,cpe:/a:microsoft:internet_explorer:10"
                " --out " + path("t.csv")),
            0);
  EXPECT_NE(stderr_text().find("pairs: 1"), std::string::npos);
  std::istringstream in(read_file(path("t.csv")));
  const SimilarityTable t = load_table(in);
  EXPECT_NEAR(t.at(0, 1), 0.386, 0.001);
  EXPECT_EQ(t.counts()->shared[1], 240u);
}

TEST_F(Cli, SimtabErrors) {
  const std::string feed = std::string(DIVNET_TEST_DATA) + "/browser_feed.json";
  EXPECT_EQ(run("simtab --feed " + feed + " --service browser --products '' --out " + path("t.csv")), 1);
  EXPECT_EQ(run("simtab --feed " + path("nope.json") + " --service browser --products cpe:/a:x:y --out " +
                path("t.csv")),
            3);
}

TEST_F(Cli, GenIsByteIdentical) {
  const std::string args = "gen --hosts 100 --degree 3 --services 3 --products 4 --seed 42 --out ";
  ASSERT_EQ(run(args + path("a.json")), 0);
  ASSERT_EQ(run(args + path("b.json")), 0);
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
  EXPECT_EQ(json("a.json")["links"].size(), 150u);
}

TEST_F(Cli, BenchVarietyRows) {
  ASSERT_EQ(run("bench variety --hosts 12 --products 3,4,5,6,7 --out " + path("v.csv")), 0);
  std::istringstream in(read_file(path("v.csv")));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6u);
}

TEST_F(Cli, BenchScaleRecordsTimes) {
  ASSERT_EQ(run("bench scale --hosts 100,300 --degree 20 --services 15 --out " + path("s.csv")), 0);
  std::istringstream in(read_file(path("s.csv")));
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto last = line.rfind(',');
    const auto prev = line.rfind(',', last - 1);
    EXPECT_GT(prev + 1, 0u);
    EXPECT_FALSE(line.substr(prev + 1, last - prev - 1).empty()) << line;
  }
  EXPECT_EQ(rows, 2u);
}

TEST_F(Cli, ThreadsDoNotChangeOutputs) {
  ASSERT_EQ(run("gen --hosts 40 --seed 3 --out " + path("g.json")), 0);
  for (const char* t : {"1", "4"}) {
    const std::string sfx = std::string("_") + t;
    const std::string common = " --threads " + std::string(t);
    ASSERT_EQ(run("optimize --scenario " + path("g.json") + common + " --out " + path("a" + sfx + ".json")), 0);
    ASSERT_EQ(run("evaluate --scenario " + path("g.json") + " --assignment " + path("a_1.json") +
                  " --entry h0 --entry h1 --target h39 --method sample --samples 50000" + common + " --out " +
                  path("e" + sfx + ".json")),
              0);
    ASSERT_EQ(run("simulate --scenario " + path("g.json") + " --assignment " + path("a_1.json") +
                  " --entry h0 --target h39 --runs 300" + common + " --out " + path("m" + sfx + ".json")),
              0);
    ASSERT_EQ(run("bench constraints --hosts 12 --constraints 0,3 --repeats 2 --no-times" + common + " --out " +
                  path("b" + sfx + ".csv")),
              0);
  }
  for (const char* f : {"a", "e", "m"})
    EXPECT_EQ(read_file(path(std::string(f) + "_1.json")), read_file(path(std::string(f) + "_4.json"))) << f;
  EXPECT_EQ(read_file(path("b_1.csv")), read_file(path("b_4.csv")));
}

TEST_F(Cli, ThreadsFromEnvironment) {
  ASSERT_EQ(run("gen --hosts 20 --out " + path("g.json")), 0);
  ASSERT_EQ(run("optimize --scenario " + path("g.json") + " --out " + path("a.json")), 0);
  const std::string cmd = "DIVNET_THREADS=3 " + std::string(DIVNET_CLI) + " optimize --scenario " + path("g.json") +
                          " --out " + path("b.json") + " 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
}
