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

// Root paths of the cell tree, consistent solutions and the exact dynamic
// program over candidate families.
//
// A path is identified by its bottom vertex. Families list candidates only
// for vertices whose subtree owns a rectangle; any other path has the same
// rectangle set R(Q) as its parent and inherits the parent's chosen set.

#ifndef FLOWTIME_DPTREE_HPP_
#define FLOWTIME_DPTREE_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "flowtime/common.hpp"
#include "flowtime/geom.hpp"
#include "flowtime/grid.hpp"
#include "json.hpp"

namespace flowtime {

using RectSet = std::vector<int>;  // sorted rect ids
using RootPath = std::vector<VertexId>;

struct CellTree {
  Grid grid;

  int64_t num_vertices() const { return grid.num_vertices(); }
  int64_t num_leaves() const { return grid.cells_at(grid.ell_max()); }
  VertexId parent(VertexId v) const { return grid.parent(v); }
  std::vector<VertexId> children(VertexId v) const {
    std::vector<VertexId> out;
    if (grid.is_leaf(v)) return out;
    const VertexId first = grid.first_child(v);
    for (int64_t i = 0; i < grid.K(); ++i) out.push_back(first + i);
    return out;
  }
};

inline CellTree build_tree(const Grid& grid) { return CellTree{grid}; }

// Cells containing t at every level, root first.
inline RootPath path_for_interval(const Grid& grid, int64_t t) {
  RootPath p;
  for (int l = 0; l <= grid.ell_max(); ++l) p.push_back(grid.cell_at(l, t));
  return p;
}

inline bool in_path_set(const Geometry& g, int rect, VertexId bottom) {
  return g.grid.is_ancestor_or_self(g.rects[rect].cell, bottom);
}

inline RectSet restrict_to_path(const Geometry& g, const RectSet& s, VertexId bottom) {
  RectSet out;
  for (int id : s) {
    if (in_path_set(g, id, bottom)) out.push_back(id);
  }
  return out;
}

inline bool is_subset(const RectSet& a, const RectSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline RectSet set_union(const RectSet& a, const RectSet& b) {
  RectSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline RectSet set_minus(const RectSet& a, const RectSet& b) {
  RectSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Vertices whose subtree owns at least one rect, in increasing id order.
inline std::vector<VertexId> active_vertices(const Geometry& g) {
  std::set<VertexId> s;
  for (const auto& [cell, chains] : g.cell_chains) {
    for (VertexId u = cell; u >= 0 && !s.count(u); u = g.grid.parent(u)) s.insert(u);
  }
  if (s.empty()) s.insert(g.grid.root());
  return {s.begin(), s.end()};
}

struct CandidateFamily {
  std::map<VertexId, std::vector<RectSet>> members;
};

struct ConsistentSolution {
  RectSet global;
  std::map<VertexId, RectSet> per_path;  // keyed like the family
  std::map<VertexId, int> choice;

  // Chosen set of an arbitrary path (inherited where the family is silent).
  const RectSet& at(const Grid& grid, VertexId v) const {
    for (VertexId u = v; u >= 0; u = grid.parent(u)) {
      auto it = per_path.find(u);
      if (it != per_path.end()) return it->second;
    }
    throw Error("no chosen set on the path");
  }
};

// Which rays a path is responsible for.
enum class RayScope {
  kBottomCell,          // t(I) in the bottom cell and R(I) within R(Q)
  kAllContainingPaths,  // every Q with R(I) within R(Q)
};

inline CandidateFamily singleton_family(const Geometry& g, const RectSet& global) {
  CandidateFamily f;
  for (VertexId v : active_vertices(g)) f.members[v] = {restrict_to_path(g, global, v)};
  return f;
}

struct ConsistencyReport {
  bool ok = true;
  std::string property;
  std::string witness;
};

namespace internal {

inline bool ray_within_path(const Geometry& g, size_t ray, VertexId bottom) {
  for (int id : g.ray_rects[ray]) {
    if (!in_path_set(g, id, bottom)) return false;
  }
  return true;
}

inline int64_t capacity_in(const Geometry& g, const RectSet& s, size_t ray) {
  int64_t cap = 0;
  for (int id : g.ray_rects[ray]) {
    if (std::binary_search(s.begin(), s.end(), id)) cap += g.rects[id].cap;
  }
  return cap;
}

inline std::string vertex_str(const Grid& grid, VertexId v) {
  const Cell c = grid.cell(v);
  return "cell level " + std::to_string(c.level) + " [" + std::to_string(c.beg) + "," +
         std::to_string(c.end) + ")";
}

// Rays a path ending at `bottom` must cover (restricted to rays whose
// check is attributed to this vertex for the given scope).
inline bool ray_served(const Geometry& g, size_t ray, VertexId bottom, RayScope scope) {
  if (scope == RayScope::kBottomCell &&
      !g.grid.cell(bottom).contains(g.rays[ray].t)) {
    return false;
  }
  return ray_within_path(g, ray, bottom);
}

}  // namespace internal

inline ConsistencyReport check_consistent(const Geometry& g, const ConsistentSolution& sol,
                                          const CandidateFamily& fam,
                                          RayScope scope = RayScope::kBottomCell) {
  ConsistencyReport rep;
  auto fail = [&](std::string p, std::string w) {
    rep.ok = false;
    rep.property = std::move(p);
    rep.witness = std::move(w);
    return rep;
  };
  for (const auto& [v, cands] : fam.members) {
    auto it = sol.per_path.find(v);
    if (it == sol.per_path.end()) return fail("membership", internal::vertex_str(g.grid, v));
    if (std::find(cands.begin(), cands.end(), it->second) == cands.end()) {
      return fail("membership", internal::vertex_str(g.grid, v));
    }
  }
  for (const auto& [v, s] : sol.per_path) {
    if (!fam.members.count(v)) return fail("membership", internal::vertex_str(g.grid, v));
    if (!is_subset(s, sol.global)) return fail("containment", internal::vertex_str(g.grid, v));
    for (VertexId a = g.grid.parent(v); a >= 0; a = g.grid.parent(a)) {
      const RectSet& sa = sol.at(g.grid, a);
      if (!is_subset(restrict_to_path(g, s, a), sa)) {
        return fail("path monotonicity", internal::vertex_str(g.grid, v) + " vs " +
                                             internal::vertex_str(g.grid, a));
      }
    }
  }
  for (size_t i = 0; i < g.rays.size(); ++i) {
    const Ray& ray = g.rays[i];
    for (const auto& [v, s] : sol.per_path) {
      if (!internal::ray_served(g, i, v, scope)) continue;
      if (internal::capacity_in(g, s, i) < ray.demand) {
        return fail("coverage", "ray [" + std::to_string(ray.s) + "," + std::to_string(ray.t) +
                                    "] at " + internal::vertex_str(g.grid, v));
      }
    }
  }
  return rep;
}

struct DpResult {
  bool feasible = false;
  int64_t cost = 0;
  ConsistentSolution solution;
  nlohmann::json table;  // per vertex and candidate: feasibility and cost
};

inline DpResult dp_solve(const Geometry& g, const CandidateFamily& fam,
                         RayScope scope = RayScope::kBottomCell) {
  const Grid& grid = g.grid;
  DpResult res;
  for (VertexId v : active_vertices(g)) {
    if (!fam.members.count(v)) throw Error("family misses a rect-owning path");
  }
  for (const auto& [v, cands] : fam.members) {
    if (v != grid.root() && !fam.members.count(grid.parent(v))) {
      throw Error("family vertex without a family parent");
    }
    for (const RectSet& s : cands) {
      if (restrict_to_path(g, s, v) != s) throw Error("candidate outside R(Q)");
    }
  }
  if (!fam.members.count(grid.root())) throw Error("family misses the root path");

  // Rays each subtree must check, attributed to the deepest family vertex
  // on the leaf path of t (default scope) or every leaf (literal scope).
  auto rays_for_inherited = [&](VertexId u) {
    std::vector<size_t> out;
    const Cell c = grid.cell(u);
    for (size_t i = 0; i < g.rays.size(); ++i) {
      if (scope == RayScope::kBottomCell) {
        if (c.contains(g.rays[i].t)) out.push_back(i);
      } else if (internal::ray_within_path(g, i, u)) {
        out.push_back(i);
      }
    }
    return out;
  };
  auto covers = [&](const RectSet& s, const std::vector<size_t>& rays) {
    for (size_t i : rays) {
      if (internal::capacity_in(g, s, i) < g.rays[i].demand) return false;
    }
    return true;
  };

  struct Entry {
    bool feasible = false;
    RectSet full;
    int64_t cost = 0;
    std::vector<std::pair<VertexId, int>> picks;
  };
  std::map<VertexId, std::vector<Entry>> table;
  std::vector<VertexId> order;
  for (const auto& [v, c] : fam.members) order.push_back(v);
  std::stable_sort(order.begin(), order.end(), [&](VertexId a, VertexId b) {
    return grid.level_of(a) > grid.level_of(b);
  });
  for (VertexId v : order) {
    const auto& cands = fam.members.at(v);
    std::vector<Entry> entries(cands.size());
    const bool leaf = grid.is_leaf(v);
    const std::vector<size_t> own = leaf ? rays_for_inherited(v) : std::vector<size_t>{};
    for (size_t ci = 0; ci < cands.size(); ++ci) {
      const RectSet& sp = cands[ci];
      Entry e;
      e.full = sp;
      e.feasible = true;
      if (leaf) {
        e.feasible = covers(sp, own);
      } else {
        const VertexId first = grid.first_child(v);
        for (int64_t k = 0; k < grid.K() && e.feasible; ++k) {
          const VertexId u = first + k;
          auto fu = table.find(u);
          if (fu == table.end()) {
            e.feasible = covers(sp, rays_for_inherited(u));
            continue;
          }
          int best = -1;
          int64_t best_cost = 0;
          RectSet best_extra;
          const auto& ucands = fam.members.at(u);
          for (size_t ui = 0; ui < ucands.size(); ++ui) {
            const Entry& ue = fu->second[ui];
            if (!ue.feasible) continue;
            if (!is_subset(restrict_to_path(g, ucands[ui], v), sp)) continue;
            RectSet extra = set_minus(ue.full, restrict_to_path(g, ue.full, v));
            const int64_t c = selection_cost(g, extra);
            if (best < 0 || c < best_cost) {
              best = static_cast<int>(ui);
              best_cost = c;
              best_extra = std::move(extra);
            }
          }
          if (best < 0) {
            e.feasible = false;
          } else {
            e.full = set_union(e.full, best_extra);
            e.picks.push_back({u, best});
          }
        }
      }
      if (e.feasible) e.cost = selection_cost(g, e.full);
      entries[ci] = std::move(e);
    }
    table[v] = std::move(entries);
  }

  nlohmann::json dump = nlohmann::json::array();
  for (const auto& [v, entries] : table) {
    const Cell c = grid.cell(v);
    nlohmann::json row = {{"level", c.level}, {"beg", c.beg}, {"end", c.end}};
    nlohmann::json es = nlohmann::json::array();
    for (const Entry& e : entries) {
      if (e.feasible) {
        es.push_back({{"feasible", true}, {"cost", e.cost}});
      } else {
        es.push_back({{"feasible", false}});
      }
    }
    row["entries"] = es;
    dump.push_back(row);
  }
  res.table = dump;

  const auto& root_entries = table.at(grid.root());
  int best = -1;
  for (size_t i = 0; i < root_entries.size(); ++i) {
    if (!root_entries[i].feasible) continue;
    if (best < 0 || root_entries[i].cost < root_entries[best].cost) best = static_cast<int>(i);
  }
  if (best < 0) return res;
  res.feasible = true;
  res.cost = root_entries[best].cost;
  res.solution.global = root_entries[best].full;
  std::vector<std::pair<VertexId, int>> stack{{grid.root(), best}};
  while (!stack.empty()) {
    const auto [v, ci] = stack.back();
    stack.pop_back();
    res.solution.choice[v] = ci;
    res.solution.per_path[v] = fam.members.at(v)[ci];
    for (const auto& pick : table.at(v)[ci].picks) stack.push_back(pick);
  }
  return res;
}

}  // namespace flowtime

#endif  // FLOWTIME_DPTREE_HPP_
