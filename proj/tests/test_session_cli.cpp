#include "cmes/benchmarks.hpp"
#include "cmes/cli.hpp"
#include "cmes/session.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cmes {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("cmes_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    ::unsetenv(kOutputDirEnv);
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, RunWritesTraceAndSession) {
  const CliResult r = cli({"run", "--problem", "gardner1", "--method", "cmes-ibo", "--iters", "5", "--seed", "7", "--out",
                           path("trace.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = lines(slurp(path("trace.csv")));
  // Header, the initial design row and one row per iteration.
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "iteration,x1_q1,x2_q1,rec_x1,rec_x2,utility_gap,best_observed_gap,feasible_flag");
  EXPECT_EQ(rows[1].substr(0, 4), "0,,,");
  EXPECT_EQ(rows[6].substr(0, 2), "5,");
  EXPECT_TRUE(fs::exists(path("trace.json")));
  const SessionState s = load_session(path("trace.json"));
  EXPECT_EQ(s.state.iteration, 5);
  EXPECT_EQ(s.state.inputs.rows(), 5 + gardner1().default_n_init);
  EXPECT_NE(r.out.find("recommendation"), std::string::npos);
}

TEST_F(CliTest, RerunGivesIdenticalBytes) {
  for (const char* name : {"a.csv", "b.csv"})
    ASSERT_EQ(cli({"run", "--problem", "gardner1", "--iters", "3", "--seed", "7", "--out", path(name)}).code, kExitOk);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
}

TEST_F(CliTest, BatchAddsQueryColumns) {
  const CliResult r = cli({"run", "--problem", "gardner1", "--method", "cmes", "--batch", "3", "--iters", "1", "--seed",
                           "2", "--k", "4", "--out", path("t.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = lines(slurp(path("t.csv")));
  EXPECT_EQ(rows[0],
            "iteration,x1_q1,x2_q1,x1_q2,x2_q2,x1_q3,x2_q3,rec_x1,rec_x2,utility_gap,best_observed_gap,feasible_flag");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(std::count(rows[2].begin(), rows[2].end(), ','), 11);
  EXPECT_EQ(rows[2].find(",,"), std::string::npos);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  ::setenv(kOutputDirEnv, path("outdir").c_str(), 1);
  ASSERT_EQ(cli({"run", "--problem", "gardner1", "--method", "random", "--iters", "1", "--seed", "4"}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "outdir" / "gardner1_random_s4.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "outdir" / "gardner1_random_s4.json"));
}

// Evaluates points from an ask CSV and writes the values file for tell.
void answer(const Problem& p, const std::string& points, const std::string& values) {
  std::ifstream in(points);
  std::ofstream out(values);
  out << std::setprecision(17) << "f,g1\n";
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string a, b;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    const Eigen::VectorXd y = p.evaluate(Eigen::Vector2d(std::stod(a), std::stod(b)));
    out << y(0) << ',' << y(1) << '\n';
  }
}

TEST_F(CliTest, AskTellMatchesRun) {
  ASSERT_EQ(cli({"run", "--problem", "gardner1", "--iters", "3", "--seed", "11", "--out", path("run.csv")}).code, kExitOk);
  ASSERT_EQ(cli({"init", "--problem", "gardner1", "--seed", "11", "--session", path("s.json")}).code, kExitOk);
  const Problem p = gardner1();
  for (int t = 0; t <= 3; ++t) {
    const CliResult a = cli({"ask", "--session", path("s.json"), "--out", path("pts.csv")});
    ASSERT_EQ(a.code, kExitOk) << a.err;
    answer(p, path("pts.csv"), path("vals.csv"));
    const CliResult b = cli({"tell", "--session", path("s.json"), "--values", path("vals.csv"), "--trace", path("at.csv")});
    ASSERT_EQ(b.code, kExitOk) << b.err;
  }
  EXPECT_EQ(slurp(path("at.csv")), slurp(path("run.csv")));
  const CliResult rec = cli({"recommend", "--session", path("s.json")});
  EXPECT_EQ(rec.code, kExitOk);
  EXPECT_NE(rec.out.find("utility_gap="), std::string::npos);
}

TEST_F(CliTest, TellArityAndOrderAreChecked) {
  ASSERT_EQ(cli({"init", "--problem", "gardner1", "--session", path("s.json")}).code, kExitOk);
  {
    std::ofstream v(path("v.csv"));
    v << "0,0\n";
  }
  const CliResult early = cli({"tell", "--session", path("s.json"), "--values", path("v.csv")});
  EXPECT_EQ(early.code, kExitUsage);
  EXPECT_NE(early.err.find("ask"), std::string::npos);

  ASSERT_EQ(cli({"ask", "--session", path("s.json"), "--out", path("pts.csv")}).code, kExitOk);
  EXPECT_EQ(cli({"ask", "--session", path("s.json")}).code, kExitUsage);
  {
    std::ofstream v(path("short.csv"));
    for (int i = 0; i < gardner1().default_n_init; ++i) v << "0.5\n";
  }
  EXPECT_EQ(cli({"tell", "--session", path("s.json"), "--values", path("short.csv")}).code, kExitUsage);
  answer(gardner1(), path("pts.csv"), path("ok.csv"));
  EXPECT_EQ(cli({"tell", "--session", path("s.json"), "--values", path("ok.csv")}).code, kExitOk);
}

TEST_F(CliTest, CustomProblemFileSession) {
  {
    std::ofstream f(path("problem.json"));
    f << R"({"name": "lab", "lower": [0, 0, 0], "upper": [1, 2, 3], "thresholds": [0.5, 0], "n_init": 4})";
  }
  ASSERT_EQ(cli({"init", "--problem-file", path("problem.json"), "--session", path("s.json"), "--method", "eic"}).code,
            kExitOk);
  const CliResult a = cli({"ask", "--session", path("s.json")});
  ASSERT_EQ(a.code, kExitOk);
  EXPECT_EQ(lines(a.out).size(), 5u);
  EXPECT_EQ(lines(a.out)[0], "x1,x2,x3");
  {
    std::ofstream v(path("v.csv"));
    for (int i = 0; i < 4; ++i) v << i * 0.1 << ',' << 1.0 - i * 0.3 << ',' << i - 1.5 << '\n';
  }
  const CliResult t = cli({"tell", "--session", path("s.json"), "--values", path("v.csv")});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_EQ(t.out.find("utility_gap"), std::string::npos);
}

TEST_F(CliTest, MalformedSessionsAreRejected) {
  {
    std::ofstream f(path("bad.json"));
    f << "{ not json";
  }
  EXPECT_EQ(cli({"ask", "--session", path("bad.json")}).code, kExitUsage);
  ASSERT_EQ(cli({"init", "--problem", "gardner1", "--session", path("s.json")}).code, kExitOk);
  std::string text = slurp(path("s.json"));
  const auto pos = text.find("\"format_version\": 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 19, "\"format_version\": 99");
  {
    std::ofstream f(path("v99.json"));
    f << text;
  }
  const CliResult r = cli({"ask", "--session", path("v99.json")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("version"), std::string::npos);
  EXPECT_EQ(cli({"ask", "--session", path("missing.json")}).code, kExitUsage);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({"run", "--problem", "nope"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--problem", "gardner1", "--method", "mes"}).code, kExitUsage);
  EXPECT_EQ(cli({"run"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"init", "--session", path("s.json")}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  const CliResult l = cli({"list-problems"});
  EXPECT_EQ(l.code, kExitOk);
  EXPECT_NE(l.out.find("gardner1"), std::string::npos);
}

TEST_F(CliTest, SessionJsonRoundTrip) {
  const RunResult r = run(gardner1(), [] {
    BoConfig c;
    c.T = 1;
    c.K = 3;
    c.seed = 9;
    c.n_init = 5;
    return c;
  }());
  const SessionState s{ProblemDescriptor::from_problem(gardner1()), true, BoConfig{}, r.state};
  save_session(s, path("s.json"));
  const SessionState back = load_session(path("s.json"));
  EXPECT_EQ(back.state.inputs, s.state.inputs);
  EXPECT_EQ(back.state.outputs, s.state.outputs);
  ASSERT_EQ(back.state.kernels.size(), s.state.kernels.size());
  for (std::size_t j = 0; j < s.state.kernels.size(); ++j)
    EXPECT_EQ(back.state.kernels[j].lengthscales, s.state.kernels[j].lengthscales);
  ASSERT_EQ(back.state.trace.size(), 2u);
  EXPECT_EQ(back.state.trace[1].utility_gap, s.state.trace[1].utility_gap);
  EXPECT_EQ(session_to_json(back).dump(), session_to_json(s).dump());
}

}  // namespace
}  // namespace cmes
