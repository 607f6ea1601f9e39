#include "pipmc/cli.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>

using testing_support::golden_path;
using testing_support::model_path;
using testing_support::slurp;

namespace {

struct Outcome
{
  int code;
  std::string out, err;
};

// "@name" in an argument expands to the bundled model path.
Outcome run_cli(std::vector<std::string> args)
{
  for (auto& a : args)
    if (a.starts_with("@"))
      a = model_path(a.substr(1));
  args.insert(args.begin(), "pipmc");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = pipmc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string strip_time(const std::string& text)
{
  return std::regex_replace(text, std::regex(R"(time: [^\n]*\n)"), "");
}

bool updating() { return std::getenv("PIPMC_UPDATE_GOLDEN") != nullptr; }

void expect_golden(const std::string& name, const std::string& actual)
{
  std::string path = golden_path(name);
  if (updating()) {
    std::ofstream(path) << actual;
    return;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << "missing golden " << path;
  EXPECT_EQ(actual, slurp(path)) << "golden " << name;
}

struct Case
{
  std::string golden;
  std::vector<std::string> args;
};

const std::vector<Case> cases{
    {"fig1_reach.txt", {"reach", "@fig1.dtmc", "s0", "s3", "--dump-grammar", "--dump-eqns"}},
    {"fig1_reach_union.txt", {"reach", "@fig1.dtmc", "s0", "s3", "--also", "s4", "--dump-eqns"}},
    {"fig1_reach_oracle.txt", {"reach", "@fig1.dtmc", "s0", "s2", "--oracle"}},
    {"fig1_pctl_next.txt", {"pctl", "@fig1.dtmc", "pr(next(prop(b)), geq, 0.3)", "s0"}},
    {"fig5_rmc_A_1.txt", {"rmc", "@fig5.rmc", "A", "1"}},
    {"fig5_rmc_A_2.txt", {"rmc", "@fig5.rmc", "A", "2"}},
    {"fig5_rmc_B_1.txt", {"rmc", "@fig5.rmc", "B", "1"}},
    {"fig5_rmc_B_2.txt", {"rmc", "@fig5.rmc", "B", "2"}},
    {"knuth_yao_die1.txt", {"pctl", "@knuth_yao.dtmc", "until(tt, prop(die1))", "s0", "--dump-eqns"}},
    {"knuth_yao_die6.txt", {"pctl", "@knuth_yao.dtmc", "until(tt, prop(die6))", "s0"}},
    {"leader_N3K2.txt", {"pctl", "@leader_N3K2.dtmc", "pr(until(tt, prop(elected)), geq, 1)", "round"}},
    {"gpl_demo_one.txt", {"gpl", "@gpl_demo.rplts", "@gpl_demo.gpl", "s0", "One", "--dump-grammar"}},
    {"gpl_demo_both.txt", {"gpl", "@gpl_demo.rplts", "@gpl_demo.gpl", "s0", "pr(Both, gt, 0)"}},
    {"gpl_demo_twice.txt", {"gpl", "@gpl_demo.rplts", "@gpl_demo.gpl", "s0", "Twice"}},
    {"gpl_demo_w.txt", {"gpl", "@gpl_demo.rplts", "@gpl_demo.gpl", "w", "W", "--dump-eqns"}},
    {"solve_quadratic.txt", {"solve", "x = 0.5*x*x + 0.5"}},
};

// Node and edge counts per DOT cluster, keyed by cluster label.
std::map<std::string, std::pair<int, int>> dot_counts(const std::string& dot)
{
  std::map<std::string, std::pair<int, int>> out;
  std::string current;
  std::istringstream in(dot);
  std::smatch m;
  for (std::string line; std::getline(in, line);) {
    if (std::regex_search(line, m, std::regex(R"re(^\s*label="([^"]*)";)re")))
      current = m[1];
    else if (line.find(" -> ") != std::string::npos)
      ++out[current].second;
    else if (std::regex_search(line, std::regex(R"(^\s*c\d+_n\d+ \[)")))
      ++out[current].first;
  }
  return out;
}

std::string counts_text(const std::map<std::string, std::pair<int, int>>& counts)
{
  std::string out;
  for (const auto& [label, c] : counts)
    out += label + " nodes=" + std::to_string(c.first) + " edges=" + std::to_string(c.second) + "\n";
  return out;
}

} // namespace

TEST(Cli, GoldenOutputs)
{
  for (const auto& c : cases) {
    Outcome o = run_cli(c.args);
    EXPECT_EQ(o.code, 0) << c.golden << ": " << o.err;
    expect_golden(c.golden, strip_time(o.out));
  }
}

TEST(Cli, Fig1FedDump)
{
  auto path = std::filesystem::temp_directory_path() / "pipmc_cli_test_fig1.dot";
  Outcome o = run_cli({"reach", "@fig1.dtmc", "s0", "s3", "--dump-feds", path.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  std::string dot = slurp(path.string());
  std::filesystem::remove(path);
  expect_golden("fig1_feds.dot", dot);
  expect_golden("fig1_feds.counts", counts_text(dot_counts(dot)));

  // the target goal is tt; the root switch sends s2 to ff
  auto counts = dot_counts(dot);
  EXPECT_EQ(counts.at("expl(reach(s3,s3),H)"), std::make_pair(1, 0));
  std::smatch m;
  ASSERT_TRUE(std::regex_search(dot, m, std::regex(R"((c0_n\d+) \[label="t\(s0\)@\[\]", shape=ellipse\])")));
  std::string root = m[1];
  ASSERT_TRUE(std::regex_search(dot, m, std::regex(R"((c0_n\d+) \[label="ff")")));
  EXPECT_NE(dot.find(root + " -> " + m[1].str() + " [label=\"s2\"]"), std::string::npos);
}

TEST(Cli, JsonReport)
{
  Outcome o = run_cli({"reach", "@fig1.dtmc", "s0", "s3", "--json", "--oracle", "--paths", "20000"});
  ASSERT_EQ(o.code, 0) << o.err;
  auto j = nlohmann::json::parse(o.out);
  EXPECT_EQ(j["command"], "reach");
  EXPECT_EQ(j["query"], "reach(s0,s3)");
  EXPECT_EQ(j["state"], "s0");
  EXPECT_NEAR(j["probability"].get<double>(), 0.6, 1e-12);
  EXPECT_TRUE(j["verdict"].is_null());
  EXPECT_EQ(j["counts"]["productions"], 7);
  EXPECT_EQ(j["counts"]["vars"], 4);
  ASSERT_EQ(j["vars"].size(), 4u);
  EXPECT_EQ(j["vars"][0]["goal"], "reach(s0,s3)");
  EXPECT_EQ(j["vars"][0]["kind"], "lfp");
  EXPECT_NEAR(j["oracle"]["enumeration"]["probability"].get<double>(), 0.6, 1e-3);
  EXPECT_EQ(j["oracle"]["simulation"]["paths"], 20000);
  EXPECT_TRUE(j["wall_seconds"].is_number());
  EXPECT_TRUE(j["warnings"].is_array());
}

TEST(Cli, StateFormulaVerdictInJson)
{
  Outcome o = run_cli({"pctl", "@fig1.dtmc", "pr(until(tt, prop(at_s3)), gt, 0.5)", "s0", "--json"});
  ASSERT_EQ(o.code, 0) << o.err;
  auto j = nlohmann::json::parse(o.out);
  EXPECT_EQ(j["verdict"], true);
  EXPECT_NEAR(j["probability"].get<double>(), 0.6, 1e-12);
}

TEST(Cli, ErrorsExitNonZero)
{
  for (std::vector<std::string> args : std::vector<std::vector<std::string>>{
           {"reach", "@fig1.dtmc", "s0", "nowhere"},
           {"reach", "/nonexistent/model.dtmc", "s0", "s3"},
           {"rmc", "@fig5.rmc", "A", "3"},
           {"pctl", "@fig1.dtmc", "until(tt,", "s0"},
           {"solve", "x = y"},
           {"reach", "@fig1.dtmc", "s0", "s3", "--epsilon", "0"},
       }) {
    Outcome o = run_cli(args);
    EXPECT_EQ(o.code, 1) << args[0] << " " << args[1];
    EXPECT_TRUE(o.err.starts_with("error: ")) << o.err;
  }
  EXPECT_NE(run_cli({"frobnicate"}).code, 0);
  EXPECT_NE(run_cli({}).code, 0);
}

TEST(Cli, SolverOptionsReachTheSolver)
{
  Outcome o = run_cli({"solve", "x = 0.5*x*x + 0.5", "--method", "kleene", "--max-iters", "5"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("no convergence within 5 iterations"), std::string::npos) << o.err;
}

TEST(Cli, MergeCapIsEnforced)
{
  Outcome o = run_cli({"rmc", "@fig5.rmc", "A", "1", "--merge-cap", "1"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("merge"), std::string::npos) << o.err;
}
