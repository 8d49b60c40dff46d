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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flowtime/pipeline.hpp"
#include "flowtime/svg.hpp"
#include "test_support.hpp"

using namespace flowtime;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Failure detail keeps the first witness only.
struct Tally {
  Outcome out;
  int64_t count = 0;
  template <typename Witness>
  void check(bool cond, Witness&& what) {
    ++count;
    if (!cond && out.ok) {
      out.ok = false;
      out.detail = what();
    }
  }
};

std::vector<Instance> corpus() {
  static const std::vector<Instance> c = [] {
    std::vector<Instance> v = testing::random_corpus(30, 901, 5, 3, 5, 4, 1);
    for (const Instance& inst : testing::random_corpus(30, 902, 5, 3, 5, 4, 2)) v.push_back(inst);
    return v;
  }();
  return c;
}

std::vector<int64_t> oracle_flow(const Instance& inst) {
  const OptResult r = opt_schedule(inst);
  const std::vector<int64_t> done = completion_times(inst, r.schedule);
  std::vector<int64_t> f(inst.n());
  for (int j = 0; j < inst.n(); ++j) f[j] = done[j] - inst.jobs[j].release;
  return f;
}

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
    for (int64_t f = inst.jobs[j].release + 1; f <= T; ++f) {
      d[j] = f;
      rec(j + 1);
    }
  };
  rec(0);
  return best;
}

Outcome oracle_equivalence() {
  // Job kinds (r, p, w); multisets enumerated as nondecreasing index tuples.
  std::vector<std::array<int64_t, 3>> kinds;
  for (int64_t r = 0; r <= 3; ++r)
    for (int64_t p = 1; p <= 3; ++p)
      for (int64_t w = 1; w <= 2; ++w) kinds.push_back({r, p, w});
  Tally t;
  std::vector<size_t> idx;
  std::function<void(size_t, size_t)> rec = [&](size_t from, size_t n) {
    if (idx.size() == n) {
      std::vector<Job> jobs;
      for (size_t i = 0; i < n; ++i) {
        jobs.push_back({static_cast<int>(i), kinds[idx[i]][0], kinds[idx[i]][1], kinds[idx[i]][2]});
      }
      const Instance inst = Instance::make(jobs, 1);
      const int64_t opt = opt_schedule(inst).cost;
      const int64_t ip = min_ip_cost(inst);
      t.check(opt == ip, [&] {
        return std::string(dump_instance(inst) + ": oracle " + std::to_string(opt) + " vs IP " +
                           std::to_string(ip));
      });
      return;
    }
    for (size_t k = from; k < kinds.size(); ++k) {
      idx.push_back(k);
      rec(k, n);
      idx.pop_back();
    }
  };
  for (size_t n = 1; n <= 3; ++n) rec(0, n);
  if (t.out.ok) t.out.detail = std::to_string(t.count) + " instances";
  return t.out;
}

Outcome ray_intersect() {
  Tally t;
  for (const Instance& inst : corpus()) {
    testing::for_each_offset(inst, [&](const Geometry& g) {
      for (size_t i = 0; i < g.rays.size(); ++i) {
        for (size_t id = 0; id < g.rects.size(); ++id) {
          t.check(intersects(g.rays[i], g.rects[id]) ==
                      intersects_algebraic(inst, g.rays[i], g.rects[id]),
                  [&] {
                    return std::string(dump_instance(inst) + " ray " + std::to_string(i) +
                                       " rect " + std::to_string(id));
                  });
        }
      }
    });
  }
  if (t.out.ok) t.out.detail = std::to_string(t.count) + " ray/rect pairs";
  return t.out;
}

Outcome segment_properties() {
  Tally t;
  double freq_sum = 0;
  int64_t freq_n = 0;
  for (const Instance& inst : corpus()) {
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const SegmentReport r = check_segment_properties(inst, g.grid);
      t.check(r.ok, [&] {
        return std::string(r.property + " " + r.witness + " in " + dump_instance(inst));
      });
    });
    for (double f : flow_cell_statistics_exact(inst, inst.epsilon_inv).frequency()) {
      freq_sum += f;
      ++freq_n;
    }
  }
  std::ostringstream d;
  d << t.count << " grids; property 5 mean frequency " << (freq_n ? freq_sum / freq_n : 0.0);
  if (t.out.ok)
    t.out.detail = d.str();
  else
    t.out.detail += "; " + d.str();
  return t.out;
}

Outcome ip_le_ip2() {
  Tally t;
  std::mt19937_64 rng(4242);
  for (const Instance& inst : corpus()) {
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const std::vector<int> opt_len = prefix_lengths(g, ip2_opt(g).selection);
      for (int trial = 0; trial < 2; ++trial) {
        std::vector<int> len(g.chains.size());
        for (size_t c = 0; c < g.chains.size(); ++c) {
          const int r = static_cast<int>(rng() % (g.chains[c].rects.size() + 1));
          len[c] = trial == 0 ? std::max(r, opt_len[c]) : r;
        }
        const Selection sel = from_prefix_lengths(g, len);
        if (!ip2_check(g, sel).feasible) continue;
        const IpSolution x = ip2_to_ip(g, sel);
        t.check(ip_check(inst, x).feasible && ip_cost(inst, x) <= selection_cost(g, sel), [&] {
          return std::string(dump_instance(inst) + " at " + offset_str(g.grid.params()));
        });
      }
    });
  }
  if (t.count < 1000)
    t.check(false, [&] { return std::string("only " + std::to_string(t.count) + " selections"); });
  if (t.out.ok) t.out.detail = std::to_string(t.count) + " feasible selections";
  return t.out;
}

Outcome witness_bound() {
  Tally t;
  for (const Instance& inst : corpus()) {
    const std::vector<int64_t> flow = oracle_flow(inst);
    const int64_t opt = opt_schedule(inst).cost;
    int64_t best = INT64_MAX;
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const Selection w = opt_to_ip2_witness(g, flow);
      std::vector<int64_t> per_job(inst.n(), 0);
      for (int id : w.rects) per_job[g.rects[id].job] += g.rects[id].cost;
      for (int j = 0; j < inst.n(); ++j) {
        t.check(per_job[j] <= 8 * inst.jobs[j].weight * flow[j],
                [&] { return std::string(dump_instance(inst) + " job " + std::to_string(j)); });
      }
      t.check(ip2_check(g, w).feasible,
              [&] { return std::string("witness infeasible in " + dump_instance(inst)); });
      best = std::min(best, ip2_opt(g).cost);
    });
    t.check(best <= 8 * opt, [&] {
      return std::string(dump_instance(inst) + ": best covering optimum " + std::to_string(best) +
                         " > 8*" + std::to_string(opt));
    });
  }
  if (t.out.ok) t.out.detail = std::to_string(t.count) + " bounds";
  return t.out;
}

Outcome dp_exhaustive() {
  Tally t;
  std::mt19937_64 rng(77);
  int families = 0;
  for (uint64_t seed = 1; families < 120; ++seed) {
    const Instance inst = gen_random(seed, 1 + seed % 3, 3, 4, 4, 2);
    const int64_t T = horizon(inst);
    const OffsetsDomain d = offsets_domain(2, T);
    if (d.ell_max > 3) continue;
    const int64_t ox = -static_cast<int64_t>(rng() % (1 - d.off_x_min));
    const Geometry g = testing::geometry_at(inst, ox, d.off_y[rng() % d.off_y.size()]);
    const CandidateFamily fam = testing::random_family(g, ip2_opt(g).selection, rng, 3, 3000);
    const DpResult dp = dp_solve(g, fam);
    const std::optional<int64_t> ex = testing::exhaustive_consistent_min(g, fam);
    t.check(dp.feasible == ex.has_value() && (!dp.feasible || dp.cost == *ex), [&] {
      return std::string(dump_instance(inst) + " at " + offset_str(g.grid.params()));
    });
    ++families;
  }
  if (t.out.ok) t.out.detail = std::to_string(families) + " families";
  return t.out;
}

Outcome greedy_dominance() {
  Tally t;
  for (const Instance& inst : corpus()) {
    const Rational eps = epsilon_of(inst.epsilon_inv);
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const TypeTable tt = build_types(g);
      const Selection opt = ip2_opt(g).selection;
      const BudgetLedger led = budgets_from_solution(g, tt, opt);
      for (const auto& [key, chains] : tt.groups) {
        const auto& [cell, tau] = key;
        const Budgets b = budgets_for(led, cell, tau);
        const DominanceReport rep = check_greedy_dominance(g, tt, cell, tau, b, opt);
        Rational total = 0;
        for (int sp = 1; sp <= tau.s; ++sp) total += *b[sp];
        const GreedyOutput out = greedy_select(g, tt, cell, tau, b);
        t.check(rep.ok && Rational(out.cost) <= (2 + eps) * total,
                [&] { return std::string(rep.witness + " in " + dump_instance(inst)); });
      }
    });
  }
  if (t.out.ok) t.out.detail = std::to_string(t.count) + " (cell, type) calls";
  return t.out;
}

Outcome qpoly_end_to_end() {
  Tally t;
  double worst = 0, sum = 0;
  int rated = 0;
  for (const Instance& inst : corpus()) {
    const Rational eps = epsilon_of(inst.epsilon_inv);
    const RunReport rep = solve(inst, SolveMode::kQpoly, OffsetSpec{});
    for (const OffsetRun& r : rep.runs) {
      t.check(Rational(r.alg_cost) <= (2 + eps) * r.ip2opt,
              [&] { return std::string(dump_instance(inst) + " at " + offset_str(r.params)); });
    }
    const int64_t opt = *rep.opt;
    t.check(Rational(rep.cost) <= (2 + eps) * 8 * opt,
            [&] { return std::string(dump_instance(inst) + " schedule cost"); });
    if (inst.epsilon_inv == 1)
      t.check(rep.cost <= 24 * opt,
              [&] { return std::string(dump_instance(inst) + " ratio cap"); });
    const double ratio = static_cast<double>(rep.cost) / opt;
    worst = std::max(worst, ratio);
    sum += ratio;
    ++rated;
  }
  std::ostringstream d;
  d << t.count << " bounds; mean ratio " << sum / rated << ", max " << worst;
  if (t.out.ok) t.out.detail = d.str();
  return t.out;
}

Outcome poly_chains() {
  Tally t;
  std::vector<Instance> insts = corpus();
  for (uint64_t seed = 300; seed < 320; ++seed) {
    insts.push_back(testing::wide_weights(seed, 5, 3, 4, 7, seed % 2 ? 1 : 2));
  }
  int small = 0, paths = 0;
  for (const Instance& inst : insts) {
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const PolyResult r = build_poly_solution(g, ip2_opt(g).selection);
      const PolyChecks& c = r.checks;
      const std::string at = dump_instance(inst) + " at " + offset_str(g.grid.params());
      t.check(c.small_cost, [&] { return std::string("small chain " + at); });
      t.check(c.large_cost, [&] { return std::string("large chain " + at); });
      t.check(c.small_paths.ok(),
              [&] { return std::string("small paths " + c.small_paths.witness + " " + at); });
      t.check(c.large_paths.ok(),
              [&] { return std::string("large paths " + c.large_paths.witness + " " + at); });
      t.check(c.consistency.ok,
              [&] { return std::string("consistency " + c.consistency.witness + " " + at); });
      small += !r.small.rects.empty();
      paths += static_cast<int>(r.small_paths.size());
    });
  }
  std::ostringstream d;
  d << t.count << " checks; " << small << " grids with small rects, " << paths << " paths";
  if (t.out.ok) t.out.detail = d.str();
  return t.out;
}

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(FLOWTIME_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Outcome cli_determinism() {
  Tally t;
  const std::string data = FLOWTIME_TESTDATA;
  const std::string fx = data + "/fixture.json";
  const std::string dir = std::filesystem::temp_directory_path().string();
  const std::string gen = dir + "/flowtime_acceptance_gen.json";
  run_cli("gen --seed 5 --n 5 -o " + gen);
  const std::vector<std::string> cmds = {
      "gen --seed 5 --n 5",
      "solve " + fx + " --mode qpoly",
      "solve " + fx + " --mode poly",
      "solve " + fx + " --mode oracle",
      "solve " + gen + " --mode poly --offsets sample:5 --seed 3",
      "solve " + gen + " --mode qpoly --normalize",
      "verify " + fx,
      "verify " + gen + " --quick",
      "render " + fx,
      "render " + gen,
      "bench --seeds 1..20 --n 3 --offsets sample:3 --jobs 4",
  };
  for (const std::string& c : cmds) {
    const Run a = run_cli(c), b = run_cli(c);
    t.check(a.code == 0 && a.code == b.code && a.out == b.out,
            [&] { return std::string("flowtime " + c); });
  }
  t.check(run_cli("render " + fx).out == testing::read_text(data + "/fixture.svg"),
          [&] { return std::string("fixture.svg golden"); });
  t.check(run_cli("render " + fx + " --selection " + data + "/fixture_selection.json").out ==
              testing::read_text(data + "/fixture_selection.svg"),
          [&] { return std::string("fixture_selection.svg golden"); });
  if (t.out.ok) t.out.detail = std::to_string(cmds.size()) + " commands, 2 goldens";
  return t.out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"ray intersection", ray_intersect},
      {"segment properties", segment_properties},
      {"IP cost within covering cost", ip_le_ip2},
      {"witness bound", witness_bound},
      {"tree DP vs exhaustive", dp_exhaustive},
      {"greedy dominance", greedy_dominance},
      {"qpoly end to end", qpoly_end_to_end},
      {"poly cost chains and paths", poly_chains},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.ok;
    std::printf("criterion %zu %s: %s (%s) [%.1fs]\n", i + 1, criteria[i].first.c_str(),
                o.ok ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
