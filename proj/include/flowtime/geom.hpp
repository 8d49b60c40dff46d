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

// Rectangles and demand rays of the covering formulation, selections and
// their exact optimisation.

#ifndef FLOWTIME_GEOM_HPP_
#define FLOWTIME_GEOM_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowtime/common.hpp"
#include "flowtime/grid.hpp"
#include "flowtime/instance.hpp"
#include "flowtime/oracle.hpp"
#include "json.hpp"

namespace flowtime {

struct Rect {
  int job = 0;  // position under the order; row = job + 1
  int64_t row = 1;
  int64_t beg = 0;
  int64_t end = 0;
  VertexId cell = 0;
  int64_t cap = 1;
  int64_t cost = 0;
  int index_in_chain = 1;
  int chain = 0;
};

// R(j, C): the rects of one job inside one cell, left to right.
struct Chain {
  int job = 0;
  VertexId cell = 0;
  std::vector<int> rects;
};

struct Ray {
  int64_t s = 0;
  int64_t t = 0;
  int64_t x2 = 1;     // doubled abscissa 2t + 1
  int64_t jbase = 1;  // first row at or below the ray start
  int64_t demand = 0;
};

struct Geometry {
  Instance instance;
  Grid grid;
  std::vector<Rect> rects;
  std::vector<Chain> chains;
  std::vector<Ray> rays;
  std::vector<std::vector<int>> ray_rects;  // R(I), sorted
  std::vector<std::vector<int>> job_chains;
  std::map<VertexId, std::vector<int>> cell_chains;

  int64_t T() const { return grid.T(); }
};

inline bool intersects(const Ray& ray, const Rect& rect) {
  return 2 * rect.beg < ray.x2 && ray.x2 < 2 * rect.end && rect.row >= ray.jbase;
}

inline bool intersects_algebraic(const Instance& inst, const Ray& ray, const Rect& rect) {
  const int64_t r = inst.jobs[rect.job].release;
  return ray.s <= r && r <= ray.t && rect.beg <= ray.t && ray.t < rect.end;
}

inline Geometry build_geometry(const Instance& inst, const Grid& grid) {
  Geometry g;
  g.instance = inst;
  g.grid = grid;
  if (inst.empty()) return g;
  const int64_t T = grid.T();
  if (T != horizon(inst)) throw Error("grid horizon differs from the instance");
  g.job_chains.resize(inst.n());
  for (int j = 0; j < inst.n(); ++j) {
    const Job& job = inst.jobs[j];
    const SegmentSet segs = build_segments(grid, job, T);
    for (const auto& grp : segs.chains) {
      Chain ch;
      ch.job = j;
      ch.cell = grp.cell;
      const int chain_id = static_cast<int>(g.chains.size());
      for (int k = 0; k < grp.count; ++k) {
        const Segment& s = segs.segments[grp.first + k];
        Rect r;
        r.job = j;
        r.row = j + 1;
        r.beg = s.beg;
        r.end = s.end;
        r.cell = s.cell;
        r.cap = job.proc;
        r.cost = job.weight * (k == 0 ? s.end - job.release : s.len());
        r.index_in_chain = k + 1;
        r.chain = chain_id;
        ch.rects.push_back(static_cast<int>(g.rects.size()));
        g.rects.push_back(r);
      }
      g.job_chains[j].push_back(chain_id);
      g.cell_chains[ch.cell].push_back(chain_id);
      g.chains.push_back(std::move(ch));
    }
  }
  for (int64_t s : constraint_starts(inst)) {
    int64_t jbase = 0;
    while (jbase < inst.n() && inst.jobs[jbase].release < s) ++jbase;
    for (int64_t t = s; t <= T; ++t) {
      int64_t d = -(t - s);
      for (const Job& job : inst.jobs) {
        if (s <= job.release && job.release <= t) d += job.proc;
      }
      if (d <= 0) continue;
      g.rays.push_back({s, t, 2 * t + 1, jbase + 1, d});
    }
  }
  for (const Ray& ray : g.rays) {
    std::vector<int> hit;
    for (int j = static_cast<int>(ray.jbase) - 1; j < inst.n(); ++j) {
      if (inst.jobs[j].release > ray.t) continue;
      for (int c : g.job_chains[j]) {
        for (int id : g.chains[c].rects) {
          if (g.rects[id].beg <= ray.t && ray.t < g.rects[id].end) hit.push_back(id);
        }
      }
    }
    std::sort(hit.begin(), hit.end());
    g.ray_rects.push_back(std::move(hit));
  }
  return g;
}

// Sorted rect ids.
struct Selection {
  std::vector<int> rects;

  static Selection of(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return {std::move(ids)};
  }
  bool contains(int id) const { return std::binary_search(rects.begin(), rects.end(), id); }
  size_t size() const { return rects.size(); }
  friend bool operator==(const Selection&, const Selection&) = default;
};

inline int64_t selection_cost(const Geometry& g, const std::vector<int>& ids) {
  int64_t c = 0;
  for (int id : ids) c += g.rects[id].cost;
  return c;
}

inline int64_t selection_cost(const Geometry& g, const Selection& sel) {
  return selection_cost(g, sel.rects);
}

inline std::vector<char> selection_mask(const Geometry& g, const Selection& sel) {
  std::vector<char> m(g.rects.size(), 0);
  for (int id : sel.rects) m[id] = 1;
  return m;
}

// Selected prefix length per chain; -1 where the chain is not a prefix.
inline std::vector<int> prefix_lengths(const Geometry& g, const Selection& sel) {
  const std::vector<char> m = selection_mask(g, sel);
  std::vector<int> out;
  for (const Chain& ch : g.chains) {
    int k = 0;
    while (k < static_cast<int>(ch.rects.size()) && m[ch.rects[k]]) ++k;
    bool prefix = true;
    for (size_t i = k; i < ch.rects.size(); ++i) prefix = prefix && !m[ch.rects[i]];
    out.push_back(prefix ? k : -1);
  }
  return out;
}

inline Selection from_prefix_lengths(const Geometry& g, const std::vector<int>& len) {
  std::vector<int> ids;
  for (size_t c = 0; c < g.chains.size(); ++c) {
    for (int k = 0; k < len[c]; ++k) ids.push_back(g.chains[c].rects[k]);
  }
  return Selection::of(std::move(ids));
}

inline int64_t covered_capacity(const Geometry& g, const std::vector<char>& mask, size_t ray) {
  int64_t cap = 0;
  for (int id : g.ray_rects[ray]) {
    if (mask[id]) cap += g.rects[id].cap;
  }
  return cap;
}

struct Ip2Report {
  bool feasible = true;
  std::string violation;  // "prefix" or "coverage"
  int chain = -1;
  int ray = -1;

  std::string message(const Geometry& g) const {
    if (feasible) return "feasible";
    if (violation == "prefix") {
      const Chain& ch = g.chains[chain];
      const Cell c = g.grid.cell(ch.cell);
      return "prefix violation in chain of job " +
             std::to_string(g.instance.jobs[ch.job].id) + " at cell level " +
             std::to_string(c.level) + " beg " + std::to_string(c.beg);
    }
    const Ray& r = g.rays[ray];
    return "ray [" + std::to_string(r.s) + "," + std::to_string(r.t) +
           "] uncovered (demand " + std::to_string(r.demand) + ")";
  }
};

inline Ip2Report ip2_check(const Geometry& g, const Selection& sel) {
  Ip2Report rep;
  const std::vector<int> pl = prefix_lengths(g, sel);
  for (size_t c = 0; c < pl.size(); ++c) {
    if (pl[c] < 0) {
      rep.feasible = false;
      rep.violation = "prefix";
      rep.chain = static_cast<int>(c);
      return rep;
    }
  }
  const std::vector<char> m = selection_mask(g, sel);
  for (size_t i = 0; i < g.rays.size(); ++i) {
    if (covered_capacity(g, m, i) < g.rays[i].demand) {
      rep.feasible = false;
      rep.violation = "coverage";
      rep.ray = static_cast<int>(i);
      return rep;
    }
  }
  return rep;
}

struct Ip2Result {
  bool feasible = false;
  int64_t cost = 0;
  Selection selection;
};

// Number of rects of a chain that start before T; the rest meet no ray.
inline int usable_prefix(const Geometry& g, const Chain& ch) {
  int k = 0;
  while (k < static_cast<int>(ch.rects.size()) && g.rects[ch.rects[k]].beg < g.T()) ++k;
  return k;
}

namespace internal {

class Ip2Brute {
 public:
  explicit Ip2Brute(const Geometry& g) : g_(g) {
    for (size_t c = 0; c < g.chains.size(); ++c) {
      if (usable_prefix(g, g.chains[c]) > 0) chains_.push_back(static_cast<int>(c));
    }
    ray_of_rect_.resize(g.rects.size());
    for (size_t i = 0; i < g.rays.size(); ++i) {
      for (int id : g.ray_rects[i]) ray_of_rect_[id].push_back(static_cast<int>(i));
    }
    deficit_.resize(g.rays.size());
    for (size_t i = 0; i < g.rays.size(); ++i) deficit_[i] = g.rays[i].demand;
    len_.assign(g.chains.size(), 0);
  }

  Ip2Result run() {
    dfs(0, 0);
    Ip2Result r;
    if (best_cost_ >= 0) {
      r.feasible = true;
      r.cost = best_cost_;
      r.selection = from_prefix_lengths(g_, best_len_);
    }
    return r;
  }

 private:
  void dfs(size_t i, int64_t cost) {
    if (best_cost_ >= 0 && cost >= best_cost_) return;
    if (i == chains_.size()) {
      for (int64_t d : deficit_) {
        if (d > 0) return;
      }
      best_cost_ = cost;
      best_len_ = len_;
      return;
    }
    const int c = chains_[i];
    const Chain& ch = g_.chains[c];
    const int max_k = usable_prefix(g_, ch);
    dfs(i + 1, cost);
    int64_t added = 0;
    int k = 0;
    for (; k < max_k; ++k) {
      const Rect& r = g_.rects[ch.rects[k]];
      for (int ray : ray_of_rect_[ch.rects[k]]) deficit_[ray] -= r.cap;
      added += r.cost;
      len_[c] = k + 1;
      dfs(i + 1, cost + added);
    }
    for (int q = 0; q < k; ++q) {
      const Rect& r = g_.rects[ch.rects[q]];
      for (int ray : ray_of_rect_[ch.rects[q]]) deficit_[ray] += r.cap;
    }
    len_[c] = 0;
  }

  const Geometry& g_;
  std::vector<int> chains_;
  std::vector<std::vector<int>> ray_of_rect_;
  std::vector<int64_t> deficit_;
  std::vector<int> len_;
  std::vector<int> best_len_;
  int64_t best_cost_ = -1;
};

}  // namespace internal

// Exhaustive search over per-chain prefix lengths.
inline Ip2Result ip2_opt_bruteforce(const Geometry& g, int max_rects = 24) {
  int count = 0;
  for (const Chain& ch : g.chains) count += usable_prefix(g, ch);
  if (count > max_rects) throw GuardError("too many rectangles for brute force");
  return internal::Ip2Brute(g).run();
}

// Exact optimum by sweeping time left to right. The state is the set of jobs
// whose current segment is selected; a chain that stops stays stopped.
inline Ip2Result ip2_opt(const Geometry& g, int max_jobs = 20) {
  const Instance& inst = g.instance;
  Ip2Result res;
  if (g.rays.empty()) {
    res.feasible = true;
    return res;
  }
  if (inst.n() > max_jobs) throw GuardError("too many jobs for the IP2 sweep");
  int64_t tmax = 0;
  for (const Ray& r : g.rays) tmax = std::max(tmax, r.t);
  // starts[t] lists rects beginning at t.
  std::vector<std::vector<int>> starts(tmax + 1);
  for (size_t id = 0; id < g.rects.size(); ++id) {
    if (g.rects[id].beg <= tmax) starts[g.rects[id].beg].push_back(static_cast<int>(id));
  }
  std::vector<std::vector<int>> rays_at(tmax + 1);
  for (size_t i = 0; i < g.rays.size(); ++i) rays_at[g.rays[i].t].push_back(static_cast<int>(i));

  struct State {
    uint32_t mask;
    int64_t cost;
    int parent;
    uint32_t chosen;  // bits of rects in starts[t] taken at this step
  };
  std::vector<std::vector<State>> layers;
  std::vector<State> cur{{0u, 0, -1, 0u}};
  for (int64_t t = 0; t <= tmax; ++t) {
    const std::vector<int>& st = starts[t];
    std::map<uint32_t, State> next;
    for (size_t si = 0; si < cur.size(); ++si) {
      const State& s = cur[si];
      // Options per starting rect: forced off, or free choice.
      std::vector<int> free_idx;
      uint32_t base = s.mask;
      for (size_t k = 0; k < st.size(); ++k) {
        const Rect& r = g.rects[st[k]];
        const uint32_t bit = 1u << r.job;
        if (r.index_in_chain == 1 || (s.mask & bit)) {
          free_idx.push_back(static_cast<int>(k));
        }
        base &= ~bit;
      }
      const uint32_t combos = 1u << free_idx.size();
      for (uint32_t c = 0; c < combos; ++c) {
        uint32_t mask = base, chosen = 0;
        int64_t cost = s.cost;
        for (size_t q = 0; q < free_idx.size(); ++q) {
          if (!(c >> q & 1)) continue;
          const Rect& r = g.rects[st[free_idx[q]]];
          mask |= 1u << r.job;
          chosen |= 1u << free_idx[q];
          cost += r.cost;
        }
        bool ok = true;
        for (int ri : rays_at[t]) {
          const Ray& ray = g.rays[ri];
          int64_t cap = 0;
          for (int j = static_cast<int>(ray.jbase) - 1; j < inst.n(); ++j) {
            if ((mask >> j & 1) && inst.jobs[j].release <= t) cap += inst.jobs[j].proc;
          }
          if (cap < ray.demand) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        auto it = next.find(mask);
        if (it == next.end() || cost < it->second.cost) {
          next[mask] = {mask, cost, static_cast<int>(si), chosen};
        }
      }
    }
    layers.push_back(std::move(cur));
    cur.clear();
    for (const auto& [m, s] : next) cur.push_back(s);
    if (cur.empty()) return res;
  }
  int best = 0;
  for (size_t i = 1; i < cur.size(); ++i) {
    if (cur[i].cost < cur[best].cost) best = static_cast<int>(i);
  }
  res.feasible = true;
  res.cost = cur[best].cost;
  std::vector<int> ids;
  int idx = best;
  for (int64_t t = tmax; t >= 0; --t) {
    const State& s = t == tmax ? cur[idx] : layers[t + 1][idx];
    for (size_t k = 0; k < starts[t].size(); ++k) {
      if (s.chosen >> k & 1) ids.push_back(starts[t][k]);
    }
    idx = s.parent;
  }
  res.selection = Selection::of(std::move(ids));
  return res;
}

// Completion of each job at the end of its rightmost selected segment.
inline IpSolution ip2_to_ip(const Geometry& g, const Selection& sel) {
  const Instance& inst = g.instance;
  std::vector<int64_t> finish(inst.n());
  for (int j = 0; j < inst.n(); ++j) finish[j] = inst.jobs[j].release;
  for (int id : sel.rects) {
    const Rect& r = g.rects[id];
    finish[r.job] = std::max(finish[r.job], r.end);
  }
  return IpSolution::from_finish(inst, finish);
}

// Selects the segments that meet [r_j, r_j + F_j); flow is per job position.
inline Selection opt_to_ip2_witness(const Geometry& g, const std::vector<int64_t>& flow) {
  const Instance& inst = g.instance;
  std::vector<int> ids;
  std::vector<int64_t> job_cost(inst.n(), 0);
  for (size_t id = 0; id < g.rects.size(); ++id) {
    const Rect& r = g.rects[id];
    if (r.beg < inst.jobs[r.job].release + flow[r.job]) {
      ids.push_back(static_cast<int>(id));
      job_cost[r.job] += r.cost;
    }
  }
  for (int j = 0; j < inst.n(); ++j) {
    if (job_cost[j] > 8 * inst.jobs[j].weight * flow[j]) {
      throw Error("witness cost bound violated for job " + std::to_string(inst.jobs[j].id));
    }
  }
  return Selection::of(std::move(ids));
}

inline nlohmann::json selection_to_json(const Geometry& g, const Selection& sel) {
  const std::vector<int> pl = prefix_lengths(g, sel);
  nlohmann::json chains = nlohmann::json::array();
  for (size_t c = 0; c < g.chains.size(); ++c) {
    if (pl[c] == 0) continue;
    if (pl[c] < 0) throw Error("selection is not prefix-closed");
    const Cell cell = g.grid.cell(g.chains[c].cell);
    chains.push_back({{"job", g.instance.jobs[g.chains[c].job].id},
                      {"cellLevel", cell.level},
                      {"cellBeg", cell.beg},
                      {"prefixLen", pl[c]}});
  }
  return {{"chains", chains}};
}

inline Selection selection_from_json(const Geometry& g, const nlohmann::json& doc) {
  std::vector<int> ids;
  for (const auto& item : doc.at("chains")) {
    const int64_t job_id = item.at("job").get<int64_t>();
    const int level = item.at("cellLevel").get<int>();
    const int64_t beg = item.at("cellBeg").get<int64_t>();
    const int len = item.at("prefixLen").get<int>();
    const int j = g.instance.index_of_id(job_id);
    if (j < 0) throw Error("selection names unknown job " + std::to_string(job_id));
    int found = -1;
    for (int c : g.job_chains[j]) {
      const Cell cell = g.grid.cell(g.chains[c].cell);
      if (cell.level == level && cell.beg == beg) found = c;
    }
    if (found < 0) throw Error("selection names a chain that does not exist");
    if (len < 0 || len > static_cast<int>(g.chains[found].rects.size())) {
      throw Error("selection prefix longer than its chain");
    }
    for (int k = 0; k < len; ++k) ids.push_back(g.chains[found].rects[k]);
  }
  return Selection::of(std::move(ids));
}

}  // namespace flowtime

#endif  // FLOWTIME_GEOM_HPP_
