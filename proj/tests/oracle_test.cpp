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

#include <cstdlib>
#include <functional>

#include "flowtime/oracle.hpp"
#include "test_support.hpp"

namespace flowtime {
namespace {

// Plain enumeration of every slot assignment, for tiny horizons.
int64_t enumerate_schedules(const Instance& inst) {
  const int64_t T = horizon(inst);
  std::vector<int64_t> rem(inst.n()), done(inst.n(), 0);
  for (int j = 0; j < inst.n(); ++j) rem[j] = inst.jobs[j].proc;
  int64_t best = INT64_MAX;
  std::function<void(int64_t)> rec = [&](int64_t t) {
    bool left = false;
    for (int j = 0; j < inst.n(); ++j) left = left || rem[j] > 0;
    if (!left) {
      int64_t c = 0;
      for (int j = 0; j < inst.n(); ++j) c += inst.jobs[j].weight * (done[j] - inst.jobs[j].release);
      best = std::min(best, c);
      return;
    }
    if (t >= T) return;
    rec(t + 1);
    for (int j = 0; j < inst.n(); ++j) {
      if (rem[j] == 0 || inst.jobs[j].release > t) continue;
      --rem[j];
      const int64_t before = done[j];
      done[j] = t + 1;
      rec(t + 1);
      done[j] = before;
      ++rem[j];
    }
  };
  rec(0);
  return best;
}

// Minimum cost over all finish-time vectors that pass the IP constraints.
int64_t min_ip_cost(const Instance& inst) {
  const int64_t T = horizon(inst);
  std::vector<int64_t> d(inst.n());
  int64_t best = INT64_MAX;
  std::function<void(int)> rec = [&](int j) {
    if (j == inst.n()) {
      const IpSolution x = IpSolution::from_finish(inst, d);
      if (ip_check(inst, x).feasible) best = std::min(best, ip_cost(inst, x));
      return;
    }
    for (int64_t f = inst.jobs[j].release; f <= T; ++f) {
      d[j] = f;
      rec(j + 1);
    }
  };
  rec(0);
  return best;
}

TEST(Oracle, FixtureOptimum) {
  const Instance inst = testing::fixture();
  const OptResult r = opt_schedule(inst);
  EXPECT_EQ(r.cost, 5);
  EXPECT_EQ(schedule_cost(inst, r.schedule), 5);
  const std::vector<int64_t> done = completion_times(inst, r.schedule);
  EXPECT_EQ(done, (std::vector<int64_t>{3, 2}));
}

TEST(Oracle, SingleJob) {
  const Instance inst = Instance::make({{0, 2, 3, 5}});
  EXPECT_EQ(opt_schedule(inst).cost, 15);
}

TEST(Oracle, EmptyInstanceCostsNothing) {
  EXPECT_EQ(opt_schedule(Instance{}).cost, 0);
}

TEST(Oracle, MatchesSlotEnumeration) {
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    const Instance inst = gen_random(seed, 1 + seed % 3, 3, 4, 3);
    ASSERT_EQ(opt_schedule(inst).cost, enumerate_schedules(inst)) << dump_instance(inst);
  }
}

TEST(Oracle, MatchesBestFeasibleIp) {
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    const Instance inst = gen_random(seed, 1 + seed % 4, 3, 5, 4);
    ASSERT_EQ(opt_schedule(inst).cost, min_ip_cost(inst)) << dump_instance(inst);
  }
}

TEST(Oracle, GuardRejectsLargeInstances) {
  const Instance inst = gen_random(3, 9, 2, 2, 2);
  try {
    opt_schedule(inst, OracleGuard{8, 100});
    FAIL() << "expected the guard to fire";
  } catch (const GuardError& e) {
    EXPECT_STREQ(e.what(), "instance too large for oracle");
  }
  EXPECT_THROW(opt_schedule(testing::fixture(), OracleGuard{8, 3}), GuardError);
}

TEST(Oracle, GuardFromEnvironment) {
  ::setenv("FLOWTIME_ORACLE_GUARD", "2,3", 1);
  const OracleGuard g = OracleGuard::from_env();
  EXPECT_EQ(g.max_n, 2);
  EXPECT_EQ(g.max_T, 3);
  EXPECT_THROW(opt_schedule(testing::fixture()), GuardError);
  ::setenv("FLOWTIME_ORACLE_GUARD", "x", 1);
  EXPECT_THROW(OracleGuard::from_env(), Error);
  ::unsetenv("FLOWTIME_ORACLE_GUARD");
  EXPECT_EQ(OracleGuard::from_env().max_n, 8);
  EXPECT_EQ(OracleGuard::from_env().max_T, 24);
}

TEST(Schedule, InvalidSchedulesAreRejected) {
  const Instance inst = testing::fixture();
  EXPECT_THROW(completion_times(inst, Schedule{{1, 0, 0}}), Error);  // job 1 before r
  EXPECT_THROW(completion_times(inst, Schedule{{0, 1}}), Error);     // job 0 short
  EXPECT_THROW(completion_times(inst, Schedule{{0, 7, 0}}), Error);  // unknown id
  EXPECT_EQ(schedule_cost(inst, Schedule{{0, 0, 1}}), 2 + 4);
}

TEST(Ip, FixtureConstraints) {
  const Instance inst = testing::fixture();
  EXPECT_EQ(constraint_starts(inst), (std::vector<int64_t>{0, 1}));
  // Finishing both jobs at 2 is impossible: 3 units of work by time 2.
  const IpSolution bad = IpSolution::from_finish(inst, {2, 2});
  const IpReport rep = ip_check(inst, bad);
  EXPECT_FALSE(rep.feasible);
  const IpSolution good = IpSolution::from_finish(inst, {3, 2});
  EXPECT_TRUE(ip_check(inst, good).feasible);
  EXPECT_EQ(ip_cost(inst, good), 5);
}

TEST(Ip, FromScheduleMatchesCost) {
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    const Instance inst = gen_random(seed, 4, 3, 5, 5);
    const OptResult r = opt_schedule(inst);
    const IpSolution x = ip_from_schedule(inst, r.schedule);
    EXPECT_TRUE(ip_check(inst, x).feasible);
    EXPECT_EQ(ip_cost(inst, x), r.cost);
  }
}

TEST(Ip, EdfRealizesFeasibleFinishTimes) {
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    const Instance inst = gen_random(seed, 4, 3, 5, 5);
    const int64_t T = horizon(inst);
    std::vector<int64_t> late(inst.n(), T);
    const IpSolution x = IpSolution::from_finish(inst, late);
    ASSERT_TRUE(ip_check(inst, x).feasible);
    const Schedule s = schedule_from_ip(inst, x);
    EXPECT_LE(schedule_cost(inst, s), ip_cost(inst, x));
    const IpSolution opt = ip_from_schedule(inst, opt_schedule(inst).schedule);
    EXPECT_EQ(schedule_cost(inst, schedule_from_ip(inst, opt)), ip_cost(inst, opt));
  }
}

TEST(Ip, NonMonotoneRejected) {
  const Instance inst = testing::fixture();
  IpSolution x = IpSolution::from_finish(inst, {3, 2});
  x.x[0][2] = 0;
  x.x[0][3] = 1;
  EXPECT_THROW(ip_check(inst, x), Error);
}

TEST(Json, ScheduleAndIpRoundTrip) {
  const Instance inst = testing::fixture();
  const Schedule s{{0, 1, std::nullopt, 0}};
  EXPECT_EQ(schedule_to_json(s).dump(), "{\"slots\":[0,1,null,0]}");
  EXPECT_EQ(schedule_from_json(schedule_to_json(s)), s);
  const IpSolution x = IpSolution::from_finish(inst, {3, 2});
  EXPECT_EQ(ip_to_json(inst, x).dump(), "{\"finish\":[3,2]}");
  EXPECT_EQ(ip_from_json(inst, ip_to_json(inst, x)), x);
}

}  // namespace
}  // namespace flowtime
