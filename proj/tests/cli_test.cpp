// Copyright 2020 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "flowtime/pipeline.hpp"
#include "test_support.hpp"

namespace flowtime {
namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(FLOWTIME_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("flowtime_cli_test_" + name)).string();
}

std::string fixture_path() { return std::string(FLOWTIME_TESTDATA) + "/fixture.json"; }

TEST(Cli, GenIsDeterministic) {
  const CliRun a = run("gen --seed 7 --n 5");
  const CliRun b = run("gen --seed 7 --n 5");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, run("gen --seed 8 --n 5").out);
  const Instance inst = instance_from_json(nlohmann::json::parse(a.out));
  EXPECT_EQ(inst.n(), 5);
}

TEST(Cli, GenRejectsZeroJobs) { EXPECT_EQ(run("gen --n 0").code, 2); }

TEST(Cli, MissingFile) { EXPECT_NE(run("solve /nonexistent/instance.json").code, 0); }

TEST(Cli, SolveOracleOnFixture) {
  const CliRun r = run("solve " + fixture_path() + " --mode oracle");
  ASSERT_EQ(r.code, 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["cost"], 5);
}

TEST(Cli, SolveQpolyWritesSchedule) {
  const std::string out = tmp("schedule.json");
  const CliRun r = run("solve " + fixture_path() + " --mode qpoly -o " + out);
  ASSERT_EQ(r.code, 0);
  const Instance inst = testing::fixture();
  const Schedule s = schedule_from_json(nlohmann::json::parse(testing::read_text(out)));
  EXPECT_EQ(schedule_cost(inst, s), nlohmann::json::parse(r.out)["cost"].get<int64_t>());
}

TEST(Cli, VerifyFixture) {
  const CliRun r = run("verify " + fixture_path());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("PASS", 0), 0u) << r.out;
}

TEST(Cli, VerifyRejectsBrokenSelection) {
  const std::string sel = tmp("selection.json");
  ASSERT_EQ(run("solve " + fixture_path() + " --mode qpoly --selection-out " + sel).code, 0);
  ASSERT_EQ(run("verify " + fixture_path() + " --selection " + sel).code, 0);
  nlohmann::json doc = nlohmann::json::parse(testing::read_text(sel));
  doc["chains"] = nlohmann::json::array();
  const std::string bad = tmp("selection_bad.json");
  std::ofstream(bad) << doc.dump();
  const CliRun r = run("verify " + fixture_path() + " --selection " + bad);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out.rfind("FAIL", 0), 0u) << r.out;
}

TEST(Cli, RenderMatchesGolden) {
  const std::string data = FLOWTIME_TESTDATA;
  EXPECT_EQ(run("render " + fixture_path()).out, testing::read_text(data + "/fixture.svg"));
  EXPECT_EQ(run("render " + fixture_path() + " --selection " + data + "/fixture_selection.json").out,
            testing::read_text(data + "/fixture_selection.svg"));
}

TEST(Cli, BenchRowsAndDeterminism) {
  const CliRun a = run("bench --seeds 1..100 --n 3 --pmax 2 --rmax 2 --offsets sample:2 --jobs 4");
  ASSERT_EQ(a.code, 0);
  std::istringstream in(a.out);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 100);
  EXPECT_EQ(a.out.substr(0, a.out.find('\n')),
            "seed,n,T,opt,ip2opt_best,alg_qpoly,alg_poly,ratio_qpoly,ratio_poly,ms");
  const CliRun b = run("bench --seeds 1..100 --n 3 --pmax 2 --rmax 2 --offsets sample:2 --jobs 1");
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, OracleGuard) {
  const std::string big = tmp("big.json");
  ASSERT_EQ(run("gen --seed 3 --n 12 -o " + big).code, 0);
  EXPECT_EQ(run("solve " + big + " --mode oracle").code, 3);
}

}  // namespace
}  // namespace flowtime
