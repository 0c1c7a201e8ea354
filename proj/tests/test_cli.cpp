#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cqc/cli.hpp"

namespace cqc {
namespace {

namespace fs = std::filesystem;

const fs::path kConfigs = CQC_CONFIG_DIR;

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

std::string cfg(const char* name) { return (kConfigs / name).string(); }

fs::path scratch(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("cqc_test_" + name);
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST(Cli, AnalyzeRowaFive) {
  const CliRun r = cli({"analyze", "--config", cfg("rowa_5.cfg")});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto l = lines(r.out);
  EXPECT_EQ(l.at(0), "family: rowa(5)");
  EXPECT_EQ(l.at(2), "read_quorum_sizes: 1");
  EXPECT_EQ(l.at(5), "fault_tolerance: 4");
  EXPECT_EQ(l.at(6), "read_capacity: 5");
  EXPECT_EQ(l.at(8), "0.9,0.99999,0.59049,0.99999");
}

TEST(Cli, AnalyzeAlphaEightByTwo) {
  const CliRun r = cli({"analyze", "--config", cfg("alpha_8x2.cfg")});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto l = lines(r.out);
  EXPECT_EQ(l.at(2), "read_quorum_sizes: 2");
  EXPECT_EQ(l.at(3), "write_quorum_size_min: 15");
  EXPECT_EQ(l.at(5), "fault_tolerance: 14");
  EXPECT_EQ(l.at(6), "read_capacity: 8");
  // Structural writes need fifteen of sixteen sites up.
  const double p = 0.9;
  const double w = std::pow(p, 16) + 16 * std::pow(p, 15) * (1 - p);
  EXPECT_EQ(l.at(10), "0.9,1," + fmt12(w) + ",1");
}

TEST(Cli, AnalyzeBetaUsesGrid) {
  const CliRun r = cli({"analyze", "--config", cfg("beta_16x1.cfg"), "--p-grid", "0.5:0.6:0.1"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto l = lines(r.out);
  ASSERT_EQ(l.size(), 10u);
  EXPECT_EQ(l.at(8).substr(0, 4), "0.5,");
  EXPECT_EQ(l.at(9).substr(0, 4), "0.6,");
}

TEST(Cli, EnumerateSmallAlpha) {
  const CliRun reads = cli({"enumerate", "--config", cfg("alpha_2x2.cfg"), "--reads"});
  ASSERT_EQ(reads.status, 0) << reads.err;
  EXPECT_EQ(lines(reads.out), (std::vector<std::string>{"1 2", "1 3", "1 4", "2 3", "2 4", "3 4"}));
  const CliRun writes = cli({"enumerate", "--config", cfg("alpha_2x2.cfg"), "--writes"});
  EXPECT_EQ(lines(writes.out), (std::vector<std::string>{"1 2 3", "1 2 4", "1 3 4", "2 3 4"}));
}

TEST(Cli, EnumerateNeedsExactlyOneKind) {
  EXPECT_EQ(cli({"enumerate", "--config", cfg("alpha_2x2.cfg")}).status, 2);
  EXPECT_EQ(cli({"enumerate", "--config", cfg("alpha_2x2.cfg"), "--reads", "--writes"}).status, 2);
}

TEST(Cli, EnumerationGuard) {
  const auto big = scratch("big.cfg", "version: 1\nfamily: {kind: majority, n: 40, v_r: 20, v_w: 21}\n");
  const CliRun r = cli({"enumerate", "--config", big.string(), "--writes"});
  EXPECT_EQ(r.status, 4);
  EXPECT_EQ(r.err.rfind("error ", 0), 0u) << r.err;
}

TEST(Cli, CompareIsSortedCsv) {
  const CliRun r = cli({"compare", "--config", cfg("compare.cfg"), "--p-grid", "0.9:1:0.1"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto l = lines(r.out);
  EXPECT_EQ(l.at(0),
            "family,p,read_availability,structural_write_availability,protocol_write_availability,read_capacity,"
            "fault_tolerance,min_read_q,min_write_q");
  ASSERT_EQ(l.size(), 1u + 6 * 2);
  std::vector<std::string> names;
  for (std::size_t i = 1; i < l.size(); ++i) names.push_back(l[i].substr(0, l[i].find(',')));
  EXPECT_TRUE(std::is_sorted(names.begin(), names.end()));
  for (std::size_t i = 2; i < l.size(); i += 2) {
    // Every system is fully available when no site fails.
    EXPECT_NE(l[i].find(",1,1,1,1,"), std::string::npos) << l[i];
  }
}

TEST(Cli, SimulateWritesTraceAndChecks) {
  const fs::path out = fs::temp_directory_path() / "cqc_test_trace.log";
  const CliRun r = cli({"simulate", "--config", cfg("recover.cfg"), "--out", out.string(), "--seed", "3"});
  ASSERT_EQ(r.status, 0) << r.err << r.out;
  EXPECT_NE(r.out.find("PASS serial_isolation"), std::string::npos);
  EXPECT_NE(r.out.find("PASS liveness"), std::string::npos);
  std::ifstream in(out);
  EXPECT_FALSE(read_trace(in).empty());
}

TEST(Cli, SimulateFailsWhenExpectationIsUnmet) {
  // Every site but one crashes at once, yet the config demands success.
  const auto strict = scratch("strict.cfg",
                              "version: 1\nfamily: {kind: majority, n: 3, v_r: 2, v_w: 2}\n"
                              "scenario: {txn_count: 5, crashes: [{tick: 0, site: 1}, {tick: 0, site: 2}]}\n");
  const fs::path out = fs::temp_directory_path() / "cqc_test_strict.log";
  const CliRun r = cli({"simulate", "--config", strict.string(), "--out", out.string()});
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.err.find("error CheckFailed"), std::string::npos);
}

TEST(Cli, UsageAndConfigErrors) {
  EXPECT_EQ(cli({}).status, 2);
  EXPECT_EQ(cli({"bogus"}).status, 2);
  EXPECT_EQ(cli({"analyze"}).status, 2);
  const CliRun missing = cli({"analyze", "--config", "/nonexistent.cfg"});
  EXPECT_EQ(missing.status, 2);
  EXPECT_EQ(missing.err.rfind("error ConfigError", 0), 0u) << missing.err;
  EXPECT_EQ(cli({"analyze", "--config", cfg("rowa_5.cfg"), "--p-grid", "0.9:0.1:0.1"}).status, 0);  // p list wins
  EXPECT_EQ(cli({"compare", "--config", cfg("compare.cfg"), "--p-grid", "0.9:0.1:0.1"}).status, 2);
  EXPECT_EQ(cli({"--help"}).status, 0);
}

}  // namespace
}  // namespace cqc
