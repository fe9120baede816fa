#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dlalab/acceptance.hpp"
#include "dlalab/experiment.hpp"

using namespace dlalab;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("dla_lab_test_" + std::to_string(::getpid()) + "_" +
                                                   ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::vector<nlohmann::json> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST(Config, ParsesJsonValuesAndBareWords) {
  const auto c = ExperimentConfig::parse(
      "# comment\nkind = intermediate\nm = 8\nalpha = 0.1\nn = [8, 16]\nquick = true\n");
  EXPECT_EQ(c.get_string("kind", ""), "intermediate");
  EXPECT_EQ(c.get_int("m", 0), 8);
  EXPECT_DOUBLE_EQ(c.get_double("alpha", 0), 0.1);
  EXPECT_EQ(c.get_int_list("n", {}), (std::vector<std::int64_t>{8, 16}));
  EXPECT_TRUE(c.get_bool("quick", false));
  EXPECT_EQ(c.get_int("missing", 5), 5);
}

TEST(Config, ErrorsAreUsageErrors) {
  EXPECT_THROW(ExperimentConfig::parse("no equals sign\n"), UsageError);
  const auto c = ExperimentConfig::parse("m = \"eight\"\n");
  EXPECT_THROW(c.get_int("m", 0), UsageError);
  ExperimentConfig d;
  d.set_raw("n", "8,16,32");
  EXPECT_EQ(d.get_int_list("n", {}), (std::vector<std::int64_t>{8, 16, 32}));
}

TEST(Config, SeedFallsBackToEnvironment) {
  ExperimentConfig c;
  setenv("DLA_LAB_SEED", "77", 1);
  EXPECT_EQ(resolve_seed(c), 77u);
  c.set("seed", 5);
  EXPECT_EQ(resolve_seed(c), 5u);
  unsetenv("DLA_LAB_SEED");
  EXPECT_EQ(resolve_seed(ExperimentConfig{}), 1u);
}

TEST(SiteSets, Shorthands) {
  EXPECT_EQ(parse_site_set("D4").size(), 9u);
  EXPECT_EQ(parse_site_set("(0,0),(1,0)").size(), 2u);
  EXPECT_EQ(parse_site_set("D8\\D2").size(), 12u);
  EXPECT_EQ(parse_site_set("[[0,0],[0,1]]").size(), 2u);
  EXPECT_THROW(parse_site_set("Q3"), UsageError);
}

TEST(Header, HashCoversFields) {
  const auto a = make_header("simulate", {{"m", 1}}, 3);
  const auto b = make_header("simulate", {{"m", 2}}, 3);
  EXPECT_NE(a["hash"], b["hash"]);
  EXPECT_EQ(a["version"], kVersion);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Simulate, EventCountAndHeader) {
  TempDir dir;
  ExperimentConfig c;
  c.set("kind", "intermediate");
  c.set("m", 8);
  c.set("N", 256);
  c.set("seed", 7);
  c.set("out", (dir / "sim.jsonl").string());
  const CommandResult r = run_command("simulate", c);
  EXPECT_EQ(r.exit_code, 0);
  const auto lines = read_lines(r.outputs.at(0));
  EXPECT_EQ(lines.front()["type"], "header");
  EXPECT_EQ(lines.front()["seed"], 7);
  std::size_t events = 0;
  for (const auto& l : lines) events += l["type"] == "event";
  EXPECT_EQ(events, 512u);
}

TEST(Simulate, RerunWritesNewPathUnlessOverwrite) {
  TempDir dir;
  ExperimentConfig c;
  c.set("m", 2);
  c.set("N", 8);
  c.set("out", (dir / "a.jsonl").string());
  const auto first = run_command("simulate", c).outputs.at(0);
  const auto second = run_command("simulate", c).outputs.at(0);
  EXPECT_NE(first, second);
  std::ifstream f1(first), f2(second);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  EXPECT_EQ(s1.str(), s2.str());
  c.set("overwrite", true);
  EXPECT_EQ(run_command("simulate", c).outputs.at(0), first);
}

TEST(Simulate, PreconditionIsUsageError) {
  ExperimentConfig c;
  c.set("m", 9);
  c.set("N", 8);
  try {
    run_command("simulate", c);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("m <= N"), std::string::npos);
  }
}

TEST(Measure, ExactSegmentTable) {
  TempDir dir;
  ExperimentConfig c;
  c.set("set", "D1");
  c.set("method", "exact");
  c.set("out", (dir / "m.jsonl").string());
  const auto lines = read_lines(run_command("measure", c).outputs.at(0));
  double sum = 0;
  std::size_t edges = 0;
  for (const auto& l : lines) {
    if (l.contains("value")) {
      sum += l["value"].get<double>();
      ++edges;
      EXPECT_TRUE(l.contains("stderr"));
    }
  }
  EXPECT_EQ(edges, 8u);
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Measure, SolverOverflowNamesLimit) {
  ExperimentConfig c;
  c.set("set", "D1");
  c.set("method", "exact");
  c.set("max_unknowns", 10);
  try {
    run_command("measure", c);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("max_unknowns"), std::string::npos);
  }
}

TEST(Verify, UnknownSuiteIsUsageError) {
  ExperimentConfig c;
  c.set("suite", "nonsense");
  EXPECT_THROW(run_command("verify", c), UsageError);
  EXPECT_THROW(run_command("frobnicate", c), UsageError);
}

TEST(Verify, OracleSuiteWritesReport) {
  TempDir dir;
  ExperimentConfig c;
  c.set("suite", "oracle");
  c.set("out", (dir / "v.jsonl").string());
  const CommandResult r = run_command("verify", c);
  EXPECT_EQ(r.exit_code, 0);
  const auto lines = read_lines(r.outputs.at(0));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1]["suite"], "oracle");
  EXPECT_TRUE(lines[1]["passed"].get<bool>());
}

TEST(Report, DetectsTampering) {
  TempDir dir;
  ExperimentConfig c;
  c.set("m1", 2);
  c.set("m2", 3);
  c.set("N", 8);
  c.set("replicas", 2);
  c.set("out", (dir / "c.jsonl").string());
  const auto path = run_command("couple", c).outputs.at(0);
  ExperimentConfig r;
  r.set("in", path.string());
  r.set("out", (dir / "r.json").string());
  EXPECT_EQ(run_command("report", r).exit_code, 0);

  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  text.replace(text.find("\"N\":8"), 5, "\"N\":9");
  std::ofstream(path, std::ios::trunc) << text;
  EXPECT_NE(run_command("report", r).exit_code, 0);
}

TEST(Acceptance, SuiteListAndQuickTable) {
  EXPECT_EQ(acceptance_suites().size(), 10u);
  for (const auto& s : acceptance_suites()) {
    if (s != "oracle") EXPECT_TRUE(quick_mode_table().contains(s)) << s;
  }
  EXPECT_THROW(run_criterion("bogus", {}), UsageError);
}
