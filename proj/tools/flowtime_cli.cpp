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


// flowtime: gen, solve, verify, render and bench on JSON instance files.
//
// Exit codes: 0 ok, 1 verification failure, 2 usage or input error,
// 3 oracle size guard exceeded.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "flowtime/pipeline.hpp"
#include "flowtime/svg.hpp"
#include "json.hpp"

namespace {

using namespace flowtime;

constexpr int kExitVerify = 1;
constexpr int kExitUsage = 2;
constexpr int kExitGuard = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

Instance load_instance(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return instance_from_json(doc);
}

// A selection file may carry its grid offset; flags fill in the rest.
struct LoadedSelection {
  GridParams params;
  nlohmann::json doc;
};

LoadedSelection load_selection(const std::string& path, const Instance& inst, int64_t off_x,
                               int64_t off_y) {
  LoadedSelection s;
  try {
    s.doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  if (s.doc.contains("offX")) off_x = s.doc.at("offX").get<int64_t>();
  if (s.doc.contains("offY")) off_y = s.doc.at("offY").get<int64_t>();
  s.params = make_params(inst.epsilon_inv, horizon(inst), off_x, off_y);
  return s;
}

std::string fmt_ratio(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", r);
  return buf;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  uint64_t seed = 1;
  int n = 4;
  int64_t pmax = 3;
  int64_t wmax = 5;
  int64_t rmax = 4;
  int64_t eps_inv = 1;
  std::string out;
};

int run_gen(const GenArgs& a) {
  write_output(a.out, dump_instance(gen_random(a.seed, a.n, a.pmax, a.wmax, a.rmax, a.eps_inv)));
  return 0;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string instance;
  std::string mode = "qpoly";
  std::string offsets;
  uint64_t seed = 1;
  bool normalize = false;
  std::string out;
  std::string selection_out;
};

int run_solve(const SolveArgs& a) {
  const Instance original = load_instance(a.instance);
  const SolveMode mode = parse_mode(a.mode);
  Instance inst = original;
  std::vector<Job> dropped;
  if (a.normalize) {
    NormalizedInstance norm = normalize_weights(original);
    inst = norm.instance;
    dropped = norm.dropped;
  }
  const int64_t T = inst.empty() ? 0 : horizon(inst);
  const OffsetSpec spec = a.offsets.empty() ? default_offsets(T, a.seed)
                                            : parse_offsets(a.offsets, a.seed);
  RunReport rep = solve(inst, mode, spec);
  if (a.normalize) {
    rep.schedule = restore_schedule(original, inst, rep.schedule, dropped);
    rep.cost = schedule_cost(original, rep.schedule);
    rep.opt = try_oracle(original);
    rep.dropped = dropped;
  }
  nlohmann::json doc = report_json(rep);
  doc["schedule"] = schedule_to_json(rep.schedule);
  if (!a.out.empty()) write_output(a.out, schedule_to_json(rep.schedule).dump() + "\n");
  if (!a.selection_out.empty()) {
    if (rep.best < 0) throw Error("no grid selection in this mode");
    const OffsetRun& b = rep.runs[rep.best];
    const Geometry g = build_geometry(inst, build_grid(T, b.params));
    nlohmann::json sel = selection_to_json(g, b.selection);
    sel["offX"] = b.params.off_x;
    sel["offY"] = b.params.off_y;
    write_output(a.selection_out, sel.dump(2) + "\n");
  }
  std::cout << doc.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string instance;
  bool quick = false;
  std::string selection;
  int64_t off_x = 0;
  int64_t off_y = 1;
};

int run_verify(const VerifyArgs& a) {
  const Instance inst = load_instance(a.instance);
  VerifyReport rep;
  if (!a.selection.empty()) {
    const LoadedSelection ls = load_selection(a.selection, inst, a.off_x, a.off_y);
    const Geometry g = build_geometry(inst, build_grid(horizon(inst), ls.params));
    Selection sel;
    try {
      sel = selection_from_json(g, ls.doc);
    } catch (const Error& e) {
      rep.checks.push_back({"selection format", false, offset_str(ls.params), e.what()});
    }
    if (rep.ok()) rep = verify_selection(g, sel);
  } else {
    VerifyOptions opt;
    opt.quick = a.quick;
    rep = verify_instance(inst, opt);
  }
  if (const CheckResult* f = rep.first_failure()) {
    std::cout << "FAIL " << f->name << " at " << f->where << ": " << f->witness << "\n";
    return kExitVerify;
  }
  std::cout << "PASS " << rep.checks.size() << " checks\n";
  return 0;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string instance;
  std::string selection;
  int64_t off_x = 0;
  int64_t off_y = 1;
  std::string out;
};

int run_render(const RenderArgs& a) {
  const Instance inst = load_instance(a.instance);
  const int64_t T = inst.empty() ? 1 : horizon(inst);
  GridParams params = make_params(inst.epsilon_inv, T, a.off_x, a.off_y);
  std::optional<nlohmann::json> doc;
  if (!a.selection.empty()) {
    const LoadedSelection ls = load_selection(a.selection, inst, a.off_x, a.off_y);
    params = ls.params;
    doc = ls.doc;
  }
  const Geometry g = build_geometry(inst, build_grid(T, params));
  std::optional<Selection> sel;
  if (doc) sel = selection_from_json(g, *doc);
  write_output(a.out, render_svg(g, sel));
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string seeds = "1..10";
  int n = 4;
  int64_t pmax = 3;
  int64_t wmax = 5;
  int64_t rmax = 4;
  int64_t eps_inv = 1;
  std::string offsets;
  int jobs = 1;
  bool timing = false;
  std::string out;
};

std::pair<uint64_t, uint64_t> parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const uint64_t v = std::stoull(s);
      return {v, v};
    }
    const uint64_t lo = std::stoull(s.substr(0, dots));
    const uint64_t hi = std::stoull(s.substr(dots + 2));
    if (lo <= hi) return {lo, hi};
  } catch (const std::exception&) {
  }
  throw Error("seeds must look like 'a..b' with a <= b");
}

struct BenchRow {
  uint64_t seed = 0;
  int n = 0;
  int64_t T = 0;
  std::optional<int64_t> opt;
  int64_t ip2opt_best = 0;
  int64_t qpoly = 0;
  int64_t poly = 0;
  int64_t ms = 0;
};

BenchRow bench_one(const BenchArgs& a, uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const Instance inst = gen_random(seed, a.n, a.pmax, a.wmax, a.rmax, a.eps_inv);
  BenchRow row;
  row.seed = seed;
  row.n = inst.n();
  row.T = horizon(inst);
  const OffsetSpec spec = a.offsets.empty() ? default_offsets(row.T, seed)
                                            : parse_offsets(a.offsets, seed);
  const RunReport q = solve(inst, SolveMode::kQpoly, spec);
  const RunReport p = solve(inst, SolveMode::kPoly, spec);
  row.opt = q.opt;
  row.ip2opt_best = q.ip2opt_best;
  row.qpoly = q.cost;
  row.poly = p.cost;
  if (a.timing) {
    row.ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::steady_clock::now() - start)
                 .count();
  }
  return row;
}

int run_bench(const BenchArgs& a) {
  const auto [lo, hi] = parse_seed_range(a.seeds);
  if (a.jobs < 1) throw Error("--jobs must be positive");
  std::vector<BenchRow> rows(hi - lo + 1);
  std::vector<std::string> errors(rows.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next++; i < rows.size(); i = next++) {
      try {
        rows[i] = bench_one(a, lo + i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < a.jobs; ++k) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!errors[i].empty()) throw Error("seed " + std::to_string(lo + i) + ": " + errors[i]);
  }

  std::ostringstream csv;
  csv << "seed,n,T,opt,ip2opt_best,alg_qpoly,alg_poly,ratio_qpoly,ratio_poly,ms\n";
  double sum_q = 0, sum_p = 0, max_q = 0, max_p = 0;
  int rated = 0;
  for (const BenchRow& r : rows) {
    std::string opt, rq, rp;
    if (r.opt && *r.opt > 0) {
      const double q = static_cast<double>(r.qpoly) / *r.opt;
      const double p = static_cast<double>(r.poly) / *r.opt;
      opt = std::to_string(*r.opt);
      rq = fmt_ratio(q);
      rp = fmt_ratio(p);
      sum_q += q;
      sum_p += p;
      max_q = std::max(max_q, q);
      max_p = std::max(max_p, p);
      ++rated;
    } else if (r.opt) {
      opt = "0";
    }
    csv << r.seed << "," << r.n << "," << r.T << "," << opt << "," << r.ip2opt_best << ","
        << r.qpoly << "," << r.poly << "," << rq << "," << rp << "," << r.ms << "\n";
  }
  write_output(a.out, csv.str());
  std::cerr << "rows=" << rows.size() << " rated=" << rated;
  if (rated > 0) {
    std::cerr << " mean_ratio_qpoly=" << fmt_ratio(sum_q / rated)
              << " max_ratio_qpoly=" << fmt_ratio(max_q)
              << " mean_ratio_poly=" << fmt_ratio(sum_p / rated)
              << " max_ratio_poly=" << fmt_ratio(max_p);
  }
  std::cerr << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted flow time on one machine: grid covering pipeline and exact oracle"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* g = app.add_subcommand("gen", "Write a random instance");
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--n", gen.n, "number of jobs")->check(CLI::PositiveNumber);
  g->add_option("--pmax", gen.pmax, "max processing time")->check(CLI::PositiveNumber);
  g->add_option("--wmax", gen.wmax, "max weight")->check(CLI::PositiveNumber);
  g->add_option("--rmax", gen.rmax, "max release")->check(CLI::NonNegativeNumber);
  g->add_option("--eps-inv", gen.eps_inv, "1/epsilon")->check(CLI::PositiveNumber);
  g->add_option("-o,--out", gen.out, "output file (stdout if omitted)");

  SolveArgs sol;
  CLI::App* s = app.add_subcommand("solve", "Solve an instance");
  s->add_option("instance", sol.instance, "instance JSON")->required();
  s->add_option("--mode", sol.mode, "qpoly, poly or oracle")
      ->check(CLI::IsMember({"qpoly", "poly", "oracle"}));
  s->add_option("--offsets", sol.offsets, "all or sample:k (default all when T <= 64)");
  s->add_option("--seed", sol.seed, "seed for offset sampling");
  s->add_flag("--normalize", sol.normalize, "normalize weights first");
  s->add_option("-o,--out", sol.out, "write the schedule JSON here");
  s->add_option("--selection-out", sol.selection_out, "write the best grid selection here");

  VerifyArgs ver;
  CLI::App* v = app.add_subcommand("verify", "Check the invariant suite on an instance");
  v->add_option("instance", ver.instance, "instance JSON")->required();
  v->add_flag("--quick", ver.quick, "extreme horizontal offsets only");
  v->add_option("--selection", ver.selection, "check this selection instead");
  v->add_option("--off-x", ver.off_x, "grid offset for --selection");
  v->add_option("--off-y", ver.off_y, "grid offset for --selection");

  RenderArgs ren;
  CLI::App* r = app.add_subcommand("render", "Draw rectangles and rays as SVG");
  r->add_option("instance", ren.instance, "instance JSON")->required();
  r->add_option("--selection", ren.selection, "hatch the rectangles of this selection");
  r->add_option("--off-x", ren.off_x, "grid offset");
  r->add_option("--off-y", ren.off_y, "grid offset");
  r->add_option("-o,--out", ren.out, "output file (stdout if omitted)");

  BenchArgs ben;
  CLI::App* b = app.add_subcommand("bench", "Run seeded instances and print CSV");
  b->add_option("--seeds", ben.seeds, "seed range a..b");
  b->add_option("--n", ben.n, "number of jobs")->check(CLI::PositiveNumber);
  b->add_option("--pmax", ben.pmax, "max processing time")->check(CLI::PositiveNumber);
  b->add_option("--wmax", ben.wmax, "max weight")->check(CLI::PositiveNumber);
  b->add_option("--rmax", ben.rmax, "max release")->check(CLI::NonNegativeNumber);
  b->add_option("--eps-inv", ben.eps_inv, "1/epsilon")->check(CLI::PositiveNumber);
  b->add_option("--offsets", ben.offsets, "all or sample:k");
  b->add_option("--jobs", ben.jobs, "worker threads")->check(CLI::PositiveNumber);
  b->add_flag("--timing", ben.timing, "fill the ms column");
  b->add_option("-o,--out", ben.out, "output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return run_gen(gen);
    if (*s) return run_solve(sol);
    if (*v) return run_verify(ver);
    if (*r) return run_render(ren);
    if (*b) return run_bench(ben);
  } catch (const GuardError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGuard;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
