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


// End-to-end solve over grid offsets, and the invariant suite used by the
// verify command.

#ifndef FLOWTIME_PIPELINE_HPP_
#define FLOWTIME_PIPELINE_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flowtime/common.hpp"
#include "flowtime/dptree.hpp"
#include "flowtime/geom.hpp"
#include "flowtime/grid.hpp"
#include "flowtime/instance.hpp"
#include "flowtime/oracle.hpp"
#include "flowtime/poly.hpp"
#include "flowtime/qpoly.hpp"
#include "json.hpp"

namespace flowtime {

enum class SolveMode { kQpoly, kPoly, kOracle };

inline SolveMode parse_mode(const std::string& s) {
  if (s == "qpoly") return SolveMode::kQpoly;
  if (s == "poly") return SolveMode::kPoly;
  if (s == "oracle") return SolveMode::kOracle;
  throw Error("unknown mode '" + s + "'");
}

inline std::string mode_name(SolveMode m) {
  switch (m) {
    case SolveMode::kQpoly: return "qpoly";
    case SolveMode::kPoly: return "poly";
    case SolveMode::kOracle: return "oracle";
  }
  return "";
}

struct OffsetSpec {
  bool all = true;
  int sample = 16;
  uint64_t seed = 1;
};

inline OffsetSpec default_offsets(int64_t T, uint64_t seed = 1) {
  OffsetSpec s;
  s.all = T <= 64;
  s.seed = seed;
  return s;
}

// "all" or "sample:k".
inline OffsetSpec parse_offsets(const std::string& text, uint64_t seed) {
  OffsetSpec s;
  s.seed = seed;
  if (text == "all") return s;
  const std::string prefix = "sample:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      size_t used = 0;
      const int k = std::stoi(text.substr(prefix.size()), &used);
      if (used == text.size() - prefix.size() && k >= 1) {
        s.all = false;
        s.sample = k;
        return s;
      }
    } catch (const std::exception&) {
    }
  }
  throw Error("offsets must be 'all' or 'sample:k' with k >= 1");
}

// Offsets in domain order; a sample keeps the domain order of its picks.
inline std::vector<GridParams> pick_offsets(int64_t epsilon_inv, int64_t T,
                                            const OffsetSpec& spec) {
  const OffsetsDomain d = offsets_domain(epsilon_inv, std::max<int64_t>(T, 1));
  std::vector<GridParams> all;
  for (int64_t oy : d.off_y) {
    for (int64_t ox : d.off_x()) all.push_back({epsilon_inv, d.K, d.ell_max, ox, oy});
  }
  if (spec.all || spec.sample >= static_cast<int>(all.size())) return all;
  std::mt19937_64 rng(spec.seed);
  std::vector<size_t> idx(all.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (int i = 0; i < spec.sample; ++i) {
    const size_t j = i + static_cast<size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(spec.sample);
  std::sort(idx.begin(), idx.end());
  std::vector<GridParams> out;
  for (size_t i : idx) out.push_back(all[i]);
  return out;
}

struct OffsetRun {
  GridParams params;
  int64_t ip2opt = 0;
  int64_t alg_cost = 0;       // cost of the selected rectangles
  int64_t schedule_cost = 0;  // cost of the EDF schedule built from them
  bool bound_ok = true;       // alg_cost within the mode's bound of ip2opt
  Selection selection;
  Schedule schedule;
};

struct RunReport {
  SolveMode mode = SolveMode::kQpoly;
  int n = 0;
  int64_t T = 0;
  std::optional<int64_t> opt;  // oracle, when within the guard
  std::vector<OffsetRun> runs;
  int best = -1;
  int64_t ip2opt_best = 0;
  int64_t cost = 0;
  Schedule schedule;
  std::vector<Job> dropped;  // appended after the horizon

  std::optional<double> ratio() const {
    if (!opt || *opt == 0) return std::nullopt;
    return static_cast<double>(cost) / static_cast<double>(*opt);
  }
};

inline Rational mode_factor(SolveMode mode, const Rational& eps) {
  if (mode == SolveMode::kPoly) return 2 + poly_constant(eps) * eps;
  return 2 + eps;
}

inline std::optional<int64_t> try_oracle(const Instance& inst) {
  try {
    return opt_schedule(inst).cost;
  } catch (const GuardError&) {
    return std::nullopt;
  }
}

// Selection of the chosen algorithm on one grid, through the tree DP.
inline Selection algorithm_selection(const Geometry& g, SolveMode mode, const Selection& ref) {
  CandidateFamily fam;
  if (mode == SolveMode::kPoly) {
    fam = build_poly_solution(g, ref).family;
  } else {
    fam = build_qpoly_solution(g, ref).family;
  }
  const DpResult dp = dp_solve(g, fam);
  if (!dp.feasible) throw Error(mode_name(mode) + " family has no consistent solution");
  return Selection{dp.solution.global};
}

inline OffsetRun solve_offset(const Instance& inst, const GridParams& params, SolveMode mode) {
  OffsetRun run;
  run.params = params;
  const Grid grid = build_grid(horizon(inst), params);
  const Geometry g = build_geometry(inst, grid);
  const Ip2Result ref = ip2_opt(g);
  if (!ref.feasible) throw Error("no feasible covering selection");
  run.ip2opt = ref.cost;
  run.selection = algorithm_selection(g, mode, ref.selection);
  run.alg_cost = selection_cost(g, run.selection);
  const Rational eps = epsilon_of(inst.epsilon_inv);
  run.bound_ok = Rational(run.alg_cost) <= mode_factor(mode, eps) * run.ip2opt;
  const Ip2Report rep = ip2_check(g, run.selection);
  if (!rep.feasible) throw Error("algorithm selection infeasible: " + rep.message(g));
  run.schedule = schedule_from_ip(inst, ip2_to_ip(g, run.selection));
  run.schedule_cost = schedule_cost(inst, run.schedule);
  return run;
}

// Maps a schedule of the weight-normalized instance back to the original
// jobs: the dummy job's slots become idle and dropped jobs run from T on.
inline Schedule restore_schedule(const Instance& original, const Instance& normalized,
                                 const Schedule& sched, const std::vector<Job>& dropped) {
  Schedule out;
  for (const auto& slot : sched.slots) {
    if (slot && original.index_of_id(*slot) < 0) {
      out.slots.push_back(std::nullopt);
    } else {
      out.slots.push_back(slot);
    }
  }
  const int64_t T = std::max(horizon(original), horizon(normalized));
  out.slots.resize(std::max<int64_t>(static_cast<int64_t>(out.slots.size()), T));
  for (const Job& j : dropped) {
    for (int64_t k = 0; k < j.proc; ++k) out.slots.push_back(j.id);
  }
  while (!out.slots.empty() && !out.slots.back()) out.slots.pop_back();
  return out;
}

inline RunReport solve(const Instance& inst, SolveMode mode, const OffsetSpec& spec) {
  RunReport rep;
  rep.mode = mode;
  rep.n = inst.n();
  if (inst.empty()) return rep;
  rep.T = horizon(inst);
  if (mode == SolveMode::kOracle) {
    const OptResult r = opt_schedule(inst);
    rep.opt = r.cost;
    rep.cost = r.cost;
    rep.schedule = r.schedule;
    return rep;
  }
  rep.opt = try_oracle(inst);
  for (const GridParams& p : pick_offsets(inst.epsilon_inv, rep.T, spec)) {
    rep.runs.push_back(solve_offset(inst, p, mode));
    const OffsetRun& run = rep.runs.back();
    if (rep.best < 0 || run.ip2opt < rep.ip2opt_best) rep.ip2opt_best = run.ip2opt;
    if (rep.best < 0 || run.schedule_cost < rep.runs[rep.best].schedule_cost) {
      rep.best = static_cast<int>(rep.runs.size()) - 1;
    }
  }
  rep.cost = rep.runs[rep.best].schedule_cost;
  rep.schedule = rep.runs[rep.best].schedule;
  return rep;
}

inline nlohmann::json report_json(const RunReport& rep) {
  nlohmann::json j;
  j["mode"] = mode_name(rep.mode);
  j["n"] = rep.n;
  j["T"] = rep.T;
  j["opt"] = rep.opt ? nlohmann::json(*rep.opt) : nlohmann::json(nullptr);
  j["cost"] = rep.cost;
  j["ratio"] = rep.ratio() ? nlohmann::json(*rep.ratio()) : nlohmann::json(nullptr);
  if (rep.mode != SolveMode::kOracle) {
    j["offsets"] = rep.runs.size();
    j["ip2optBest"] = rep.ip2opt_best;
    if (rep.best >= 0) {
      const OffsetRun& b = rep.runs[rep.best];
      j["best"] = {{"offX", b.params.off_x}, {"offY", b.params.off_y}};
    }
    nlohmann::json per = nlohmann::json::array();
    for (const OffsetRun& r : rep.runs) {
      per.push_back({{"offX", r.params.off_x},
                     {"offY", r.params.off_y},
                     {"ip2opt", r.ip2opt},
                     {"alg", r.alg_cost},
                     {"schedule", r.schedule_cost},
                     {"boundOk", r.bound_ok}});
    }
    j["perOffset"] = per;
  }
  if (!rep.dropped.empty()) {
    nlohmann::json d = nlohmann::json::array();
    for (const Job& job : rep.dropped) d.push_back(job.id);
    j["dropped"] = d;
  }
  return j;
}

// ---------------------------------------------------------------- verify

struct CheckResult {
  std::string name;
  bool ok = true;
  std::string where;
  std::string witness;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok; });
  }
  const CheckResult* first_failure() const {
    for (const CheckResult& c : checks) {
      if (!c.ok) return &c;
    }
    return nullptr;
  }
};

struct VerifyOptions {
  bool quick = false;
  bool qpoly = true;
  bool poly = true;
};

inline std::string offset_str(const GridParams& p) {
  return "offset (" + std::to_string(p.off_x) + "," + std::to_string(p.off_y) + ")";
}

// Checks on one grid. `flow` is the oracle's flow time per job, if known.
inline void verify_offset(const Instance& inst, const GridParams& params,
                          const std::optional<std::vector<int64_t>>& flow,
                          const VerifyOptions& opt, VerifyReport& out, int64_t& ip2_best) {
  const std::string where = offset_str(params);
  auto add = [&](std::string name, bool ok, std::string witness = "") {
    out.checks.push_back({std::move(name), ok, where, ok ? "" : std::move(witness)});
  };
  const Grid grid = build_grid(horizon(inst), params);
  const SegmentReport seg = check_segment_properties(inst, grid);
  add("segment properties", seg.ok, seg.property + ": " + seg.witness);

  const Geometry g = build_geometry(inst, grid);
  std::string bad;
  for (size_t i = 0; i < g.rays.size() && bad.empty(); ++i) {
    for (size_t id = 0; id < g.rects.size(); ++id) {
      if (intersects(g.rays[i], g.rects[id]) != intersects_algebraic(inst, g.rays[i], g.rects[id])) {
        bad = "ray " + std::to_string(i) + " rect " + std::to_string(id);
        break;
      }
    }
  }
  add("ray intersection", bad.empty(), bad);

  const Ip2Result ref = ip2_opt(g);
  add("covering optimum exists", ref.feasible, "no feasible selection");
  if (!ref.feasible) return;
  ip2_best = std::min(ip2_best, ref.cost);
  const IpSolution x = ip2_to_ip(g, ref.selection);
  const IpReport ipr = ip_check(inst, x);
  add("covering to IP feasibility", ipr.feasible, ipr.message());
  add("IP cost at most covering cost", ip_cost(inst, x) <= ref.cost,
      std::to_string(ip_cost(inst, x)) + " > " + std::to_string(ref.cost));
  if (flow) {
    try {
      const Selection w = opt_to_ip2_witness(g, *flow);
      const Ip2Report wr = ip2_check(g, w);
      add("witness selection feasible", wr.feasible, wr.message(g));
    } catch (const Error& e) {
      add("witness cost bound", false, e.what());
    }
  }

  const Rational eps = epsilon_of(inst.epsilon_inv);
  const TypeTable tt = build_types(g);
  const BudgetLedger led = budgets_from_solution(g, tt, ref.selection);
  if (opt.qpoly) {
    std::string gbad;
    for (const auto& [key, chains] : tt.groups) {
      const auto& [cell, tau] = key;
      const Budgets b = budgets_for(led, cell, tau);
      try {
        const DominanceReport dr = check_greedy_dominance(g, tt, cell, tau, b, ref.selection);
        if (!dr.ok) gbad = dr.witness;
      } catch (const Error& e) {
        gbad = e.what();
      }
      if (!gbad.empty()) break;
    }
    add("greedy dominance and cost", gbad.empty(), gbad);
    try {
      const QpolyResult q = build_qpoly_solution(g, tt, led);
      const DpResult dp = dp_solve(g, q.family);
      add("qpoly consistent solution", dp.feasible, "dp infeasible");
      add("qpoly cost bound", Rational(dp.cost) <= (2 + eps) * ref.cost,
          std::to_string(dp.cost) + " vs " + std::to_string(ref.cost));
    } catch (const Error& e) {
      add("qpoly construction", false, e.what());
    }
  }
  if (opt.poly) {
    try {
      const PolyResult p = build_poly_solution(g, tt, ref.selection);
      const PolyChecks& c = p.checks;
      add("cell budgets", c.budgets.ok(), c.budgets.witness);
      add("small budget rounding", c.rounding.ok(), c.rounding.witness);
      add("small cost chain", c.small_cost,
          std::to_string(p.small_cost) + " > " + to_string(p.small_bound));
      add("large cost chain", c.large_cost,
          std::to_string(p.large_cost) + " > " + to_string(p.large_bound));
      add("poly cost bound", c.total_cost,
          std::to_string(p.cost) + " > " + to_string(p.total_bound));
      add("small path coverage", c.small_paths.coverage, c.small_paths.witness);
      add("small path monotonicity", c.small_paths.monotone, c.small_paths.witness);
      add("large path coverage", c.large_paths.coverage, c.large_paths.witness);
      add("large path monotonicity", c.large_paths.monotone, c.large_paths.witness);
      add("poly consistent solution", c.consistency.ok,
          c.consistency.property + " " + c.consistency.witness);
    } catch (const Error& e) {
      add("poly construction", false, e.what());
    }
  }
}

// With `quick`, only the two extreme horizontal offsets per vertical one.
inline VerifyReport verify_instance(const Instance& inst, const VerifyOptions& opt = {}) {
  VerifyReport out;
  if (inst.empty()) return out;
  const int64_t T = horizon(inst);
  std::optional<std::vector<int64_t>> flow;
  std::optional<int64_t> best;
  try {
    const OptResult r = opt_schedule(inst);
    const std::vector<int64_t> done = completion_times(inst, r.schedule);
    std::vector<int64_t> f(inst.n());
    for (int j = 0; j < inst.n(); ++j) f[j] = done[j] - inst.jobs[j].release;
    flow = f;
    best = r.cost;
  } catch (const GuardError&) {
  }
  int64_t ip2_best = INT64_MAX;
  for (const GridParams& p : pick_offsets(inst.epsilon_inv, T, OffsetSpec{})) {
    const OffsetsDomain d = offsets_domain(inst.epsilon_inv, T);
    if (opt.quick && p.off_x != 0 && p.off_x != d.off_x_min) continue;
    verify_offset(inst, p, flow, opt, out, ip2_best);
  }
  if (best) {
    out.checks.push_back({"best covering optimum within 8 OPT", ip2_best <= 8 * *best, "all offsets",
                          std::to_string(ip2_best) + " > 8*" + std::to_string(*best)});
  }
  return out;
}

// A user-supplied selection on one grid: prefix closure, coverage, and the
// cost of the induced IP solution.
inline VerifyReport verify_selection(const Geometry& g, const Selection& sel) {
  VerifyReport out;
  const std::string where = offset_str(g.grid.params());
  const Ip2Report rep = ip2_check(g, sel);
  const std::string name = rep.feasible ? "selection feasibility"
                           : rep.violation == "prefix" ? "selection prefix closure"
                                                       : "selection coverage";
  out.checks.push_back({name, rep.feasible, where, rep.feasible ? "" : rep.message(g)});
  if (!rep.feasible) return out;
  const IpSolution x = ip2_to_ip(g, sel);
  const int64_t c = ip_cost(g.instance, x);
  const int64_t s = selection_cost(g, sel);
  out.checks.push_back({"IP cost at most covering cost", c <= s, where,
                        c <= s ? "" : std::to_string(c) + " > " + std::to_string(s)});
  return out;
}

}  // namespace flowtime

#endif  // FLOWTIME_PIPELINE_HPP_
