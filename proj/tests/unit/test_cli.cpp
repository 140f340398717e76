/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "commands.hpp"
#include "run_config.hpp"
#include "sdews/error.hpp"

namespace sdews::cli {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("sdews_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

TEST(ParseCount, ScientificAndLimits) {
  EXPECT_EQ(parse_count("1e6"), 1000000u);
  EXPECT_EQ(parse_count("2.5e3"), 2500u);
  EXPECT_EQ(parse_count("1E7"), 10000000u);
  EXPECT_EQ(parse_count("42"), 42u);
  EXPECT_EQ(parse_count("9223372036854775807"), 9223372036854775807u);
  EXPECT_EQ(parse_count("9.223372036854775807e18"), 9223372036854775807u);
  EXPECT_THROW(parse_count("9223372036854775808"), ConfigError);
  EXPECT_THROW(parse_count("1e19"), ConfigError);
  EXPECT_THROW(parse_count("1.5"), ConfigError);
  EXPECT_THROW(parse_count("-1"), ConfigError);
  EXPECT_THROW(parse_count("abc"), ConfigError);
  EXPECT_THROW(parse_count(""), ConfigError);
}

TEST(ParseScalars, RealsListsGrids) {
  EXPECT_EQ(parse_real("1e-4"), 1e-4);
  EXPECT_THROW(parse_real("inf"), ConfigError);
  EXPECT_EQ(parse_real_list("0.4,0.2,1e-1"), (std::vector<double>{0.4, 0.2, 0.1}));
  const GridSpec g = parse_grid("-6:6:0.5");
  EXPECT_EQ(g.lo, -6.0);
  EXPECT_EQ(g.hi, 6.0);
  EXPECT_EQ(g.step, 0.5);
  EXPECT_THROW(parse_grid("-6:6"), ConfigError);
  EXPECT_EQ(parse_ordering("simultaneous"), StepOrdering::kSimultaneous);
  EXPECT_THROW(parse_ordering("later"), ConfigError);
}

TEST(ParseConfig, UnknownKeyReportsLine) {
  const std::string text =
      "{\n"
      "  \"command\": \"sample\",\n"
      "  \"h\": 0.1,\n"
      "  \"rejection_raduis\": 100\n"
      "}\n";
  try {
    parse_config(text, "cfg.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cfg.json:4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("rejection_raduis"), std::string::npos) << msg;
  }
}

TEST(ParseConfig, NestedUnknownKey) {
  const std::string text =
      "{\"command\": \"sample\",\n \"h\": 0.1,\n"
      " \"mixture\": {\"components\": [\n"
      "   {\"type\": \"gaussian\", \"mean\": [0], \"sigma\": 1, \"alpah\": 1}]}}";
  EXPECT_THROW(parse_config(text), ConfigError);
  EXPECT_THROW(parse_config("{\"command\": \"sample\", \"M\": -3}"), ConfigError);
  EXPECT_THROW(parse_config("{\"command\": \"sample\", \"mixture\": \"example9\"}"),
               ConfigError);
  EXPECT_THROW(parse_config("{\"command\": "), ConfigError);
}

TEST(ParseConfig, InlineMixtureAndPolicy) {
  const std::string text = R"({
    "command": "converge",
    "mixture": {"components": [
      {"type": "gaussian", "mean": [0], "sigma": 2, "alpha": 0.5},
      {"type": "gaussian", "mean": [3], "covariance": [[0.25]], "alpha": 0.4}]},
    "rate_policy": {"type": "density_scaled", "betas": [1, 2]},
    "h": [0.4, 0.2],
    "T": 100,
    "M": "1e6",
    "seed": 42
  })";
  RunConfig c = parse_config(text);
  finalize(c);
  EXPECT_EQ(c.trajectories, 1000000u);
  EXPECT_EQ(c.h, (std::vector<double>{0.4, 0.2}));
  EXPECT_EQ(c.seed, 42u);
  const MixtureModel model = build_model(c);
  const MixtureModel ex1 = preset("example1");
  ASSERT_EQ(model.regimes(), 2u);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(model.component(m).gaussian().covariance,
              ex1.component(m).gaussian().covariance);
  }
  const RatePolicy policy = build_policy(c, &model);
  EXPECT_TRUE(std::holds_alternative<DensityScaled>(policy.kind()));
}

TEST(Finalize, CrossFieldChecks) {
  RunConfig c;
  c.command = "sample";
  c.h = {0.1, 0.2};
  EXPECT_THROW(finalize(c), ConfigError);
  c.h = {0.1};
  EXPECT_NO_THROW(finalize(c));
  c.command = "time-average";
  EXPECT_THROW(finalize(c), ConfigError);
  c.averaging_steps = 10;
  EXPECT_NO_THROW(finalize(c));
  c.command = "ctmc-check";
  EXPECT_THROW(finalize(c), ConfigError);
  c.command = "bogus";
  EXPECT_THROW(finalize(c), ConfigError);
  RunConfig f;
  f.command = "fpe-check";
  f.delta = 1e-2;
  EXPECT_THROW(finalize(f), ConfigError);
}

TEST(Finalize, OutputDirFromEnvironment) {
  RunConfig c;
  c.command = "oracle";
  ::setenv(kOutputDirEnv, "/tmp/from_env", 1);
  finalize(c);
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(c.output_dir, "/tmp/from_env");
  RunConfig d;
  d.command = "oracle";
  finalize(d);
  EXPECT_EQ(d.output_dir, kDefaultOutputDir);
}

TEST(Run, ManifestRoundTripIsBitIdentical) {
  const auto first = scratch("first");
  const auto second = scratch("second");
  RunConfig c;
  c.command = "converge";
  c.mixture = "example2";
  c.h = {0.4, 0.2};
  c.horizon = 4.0;
  c.trajectories = 3000;
  c.rejection_radius = 100.0;
  c.histogram = HistogramSpec{{-12.0}, {12.0}, {60}};
  c.seed = 5;
  c.output_dir = first.string();
  finalize(c);
  std::ostringstream log;
  ASSERT_EQ(run(c, log), 0);

  RunConfig again = load_config_file((first / "manifest.json").string());
  again.output_dir = second.string();
  finalize(again);
  ASSERT_EQ(run(again, log), 0);
  const std::string a = read_file(first / "convergence.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, read_file(second / "convergence.csv"));
  std::filesystem::remove_all(first);
  std::filesystem::remove_all(second);
}

TEST(Run, StepGuardMapsToNumericalExit) {
  RunConfig c;
  c.command = "sample";
  c.mixture = "example2";
  c.h = {0.5};
  c.trajectories = 10;
  c.output_dir = scratch("guard").string();
  finalize(c);
  std::ostringstream log;
  EXPECT_THROW(run(c, log), StepSizeViolation);
  std::filesystem::remove_all(c.output_dir);
}

TEST(Run, FpeCheckWritesResult) {
  RunConfig c;
  c.command = "fpe-check";
  c.mixture = "example3";
  c.grid = parse_grid("-6:6:0.5");
  c.output_dir = scratch("fpe").string();
  finalize(c);
  std::ostringstream log;
  EXPECT_EQ(run(c, log), 0);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(c.output_dir) / "manifest.json"));
  std::filesystem::remove_all(c.output_dir);
}

}  // namespace
}  // namespace sdews::cli
