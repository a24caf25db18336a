#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("treeising_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run cli(const std::string& args, const std::string& env = "") {
  const auto err = fs::temp_directory_path() / "treeising_cli_stderr.txt";
  const std::string cmd = env + " \"" TREEISING_CLI "\" " + args + " > /dev/null 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

}  // namespace

TEST(Cli, UCurveWritesAllOutputs) {
  const auto out = scratch("ucurve");
  const auto r = cli("run u-curve --law P3 --beta 0.2:1.4:0.05 --depth 30 --trees 1 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(out / "results.csv"));
  ASSERT_TRUE(fs::exists(out / "plotdata" / "u_vs_beta.csv"));
  std::istringstream csv(slurp(out / "results.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "experiment,beta,observable,mean,se,n_samples,ess,reference,seed");
  double prev = -1.0;
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 9u);
    const double u = std::stod(cells[3]);
    EXPECT_GE(u, prev);
    prev = u;
    ++rows;
  }
  EXPECT_EQ(rows, 25);

  const auto meta = nlohmann::json::parse(slurp(out / "meta.json"));
  EXPECT_EQ(meta.at("config").at("beta"), "0.2:1.4:0.05");
  EXPECT_EQ(meta.at("seed"), 1);
  EXPECT_TRUE(meta.at("versions").contains("compiler"));
  EXPECT_TRUE(meta.contains("runtime_seconds"));
}

TEST(Cli, LemmaRecursionReportsSmallW1) {
  const auto out = scratch("lemma");
  const auto r = cli("run lemma-recursion --law P34 --beta 0.8 --beta0 0.7 --pool 20000 --steps 40 --assert --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(out / "results.csv");
  const auto pos = csv.find("w1_dominating_vs_independent_plus,");
  ASSERT_NE(pos, std::string::npos);
  const double w1 = std::stod(csv.substr(pos + 34));
  EXPECT_LT(w1, 0.01);
  EXPECT_TRUE(fs::exists(out / "plotdata" / "w1_vs_t.csv"));
  EXPECT_TRUE(fs::exists(out / "plotdata" / "pool_trace.csv"));
}

TEST(Cli, RerunIsByteIdentical) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const std::string args = "run theorem-free --law P3 --n 80 --samples 500 --ball-samples 100 --seed 9 --out ";
  ASSERT_EQ(cli(args + a.string(), "TREEISING_THREADS=1").code, 0);
  ASSERT_EQ(cli(args + b.string(), "TREEISING_THREADS=4").code, 0);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  EXPECT_EQ(slurp(a / "plotdata" / "tv_vs_n.csv"), slurp(b / "plotdata" / "tv_vs_n.csv"));
}

TEST(Cli, OtherExperimentsRun) {
  for (const std::string args : {"capacity --law P34 --depth 5 --trees 20", "expander --law P3 --n 16",
                                 "theorem-plus --law P3 --n 60 --samples 400 --ball-samples 50",
                                 "u-curve --law poisson:3.5 --beta 0.5:1:0.25 --trees 30 --depth 4"}) {
    const auto out = scratch("other");
    const auto r = cli("run " + args + " --out " + out.string());
    EXPECT_EQ(r.code, 0) << args << ": " << r.err;
    EXPECT_TRUE(fs::exists(out / "results.csv")) << args;
  }
}

TEST(Cli, GraphFileInput) {
  const auto dir = scratch("graph");
  fs::create_directories(dir);
  ASSERT_EQ(cli("sample-graph --law P3 --n 16 --seed 3 --out " + (dir / "g.txt").string()).code, 0);
  const auto r = cli("run expander --graph " + (dir / "g.txt").string() + " --assert --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "out" / "results.csv").find("lambda_exact"), std::string::npos);
}

TEST(Cli, ConfigErrorsNameTheField) {
  const auto out = scratch("errors").string();
  struct Case {
    std::string args, field;
  };
  const Case cases[] = {
      {"run u-curve --beta 1:0:0.1", "beta.stop"},
      {"run u-curve --beta 0:1:0", "beta.step"},
      {"run u-curve --beta abc", "beta"},
      {"run lemma-recursion --law P34 --beta 0.8", "beta0"},
      {"run capacity --law '{\"Q\":1,\"theta\":[1],\"P\":{\"0\":[[3,\"x\"]]}}'", "P.0[0][1]"},
      {"run capacity --law '{\"Q\":1,\"theta\":[1]}'", "'P'"},
      {"run capacity --law no_such_law", "law"},
      {"run expander --delta1 0.9", "delta1"},
      {"run capacity --depth 0", "depth"},
      {"run theorem-free --B 0.1", "B"},
      {"run expander --graph /nonexistent/graph.txt", "graph"},
  };
  for (const auto& c : cases) {
    const auto r = cli(c.args + " --out " + out);
    EXPECT_EQ(r.code, 2) << c.args;
    EXPECT_NE(r.err.find("config error at"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find(c.field), std::string::npos) << c.args << " -> " << r.err;
  }
  EXPECT_EQ(cli("run not-an-experiment").code, 2);
}

TEST(Cli, ConfigFileAndFlagOverride) {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"law": "P3", "beta": "0.5:1.0:0.25", "depth": 20, "trees": 1, "seed": 4})";
  const auto r = cli("run u-curve --config " + (dir / "c.json").string() + " --seed 5 --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto meta = nlohmann::json::parse(slurp(dir / "out" / "meta.json"));
  EXPECT_EQ(meta.at("config").at("depth"), 20);
  EXPECT_EQ(meta.at("seed"), 5);
  std::ofstream(dir / "bad.json") << R"({"depht": 3})";
  const auto bad = cli("run u-curve --config " + (dir / "bad.json").string() + " --out " + (dir / "out").string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("config.depht"), std::string::npos);
}

TEST(Cli, AssertBreachExitsNonzero) {
  // The two-type quartic law has no strictly negative entropy certificate.
  const auto out = scratch("assert");
  const std::string law = R"('{"Q":["a","b"],"theta":[0.4444444444444444,0.5555555555555556],)"
                          R"("P":{"a":[[[1,3],0.5],[[2,2],0.5]],"b":[[[2,2],1]]}}')";
  EXPECT_EQ(cli("run expander --n 60 --delta1 0.1 --law " + law + " --out " + out.string()).code, 0);
  const auto r = cli("run expander --n 60 --delta1 0.1 --law " + law + " --assert --out " + out.string());
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("threshold"), std::string::npos);
}
