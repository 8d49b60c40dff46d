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


// Densities and types of rectangle chains, oracle budgets and the budgeted
// greedy selection used by the quasi-polynomial construction.

#ifndef FLOWTIME_QPOLY_HPP_
#define FLOWTIME_QPOLY_HPP_

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowtime/common.hpp"
#include "flowtime/dptree.hpp"
#include "flowtime/geom.hpp"
#include "json.hpp"

namespace flowtime {

// rho = (1+eps)^exp, or one of the two infinite sentinels.
struct Density {
  enum Kind : int { kNegInf = 0, kFinite = 1, kInf = 2 };
  Kind kind = kFinite;
  int64_t exp = 0;

  static Density of(int64_t e) { return {kFinite, e}; }
  static Density inf() { return {kInf, 0}; }
  static Density neg_inf() { return {kNegInf, 0}; }
  bool finite() const { return kind == kFinite; }
  Density shifted(int64_t k) const { return finite() ? of(exp + k) : *this; }

  friend auto operator<=>(const Density&, const Density&) = default;
  friend bool operator==(const Density&, const Density&) = default;
};

inline std::string to_string(const Density& d) {
  if (d.kind == Density::kInf) return "inf";
  if (d.kind == Density::kNegInf) return "-inf";
  return std::to_string(d.exp);
}

inline nlohmann::json density_json(const Density& d) {
  if (d.finite()) return d.exp;
  return d.kind == Density::kInf ? "inf" : "-inf";
}

// Lexicographic order on (rho, rho').
struct DensityPair {
  Density rho;
  Density rho2;

  static DensityPair top() { return {Density::inf(), Density::inf()}; }
  static DensityPair bottom() { return {Density::neg_inf(), Density::neg_inf()}; }
  DensityPair shifted(int64_t k) const { return {rho.shifted(k), rho2.shifted(k)}; }

  friend auto operator<=>(const DensityPair&, const DensityPair&) = default;
  friend bool operator==(const DensityPair&, const DensityPair&) = default;
};

inline std::string to_string(const DensityPair& p) {
  return "(" + to_string(p.rho) + "," + to_string(p.rho2) + ")";
}

struct RectType {
  Density rho = Density::inf();
  Density rho2 = Density::inf();
  int s = 0;

  DensityPair pair() const { return {rho, rho2}; }
  friend auto operator<=>(const RectType&, const RectType&) = default;
  friend bool operator==(const RectType&, const RectType&) = default;
};

inline nlohmann::json type_json(const RectType& t) {
  return {{"rhoExp", density_json(t.rho)}, {"rho2Exp", density_json(t.rho2)}, {"s", t.s}};
}

inline Density density_of(int64_t cost, int64_t cap, const Rational& eps) {
  if (cap < 1 || cost < 1) throw Error("density needs positive cost and capacity");
  return Density::of(floor_log(1 + eps, Rational(cost, cap)));
}

inline Density density_of(const Rect& r, const Rational& eps) {
  return density_of(r.cost, r.cap, eps);
}

inline RectType type_of(const Geometry& g, const Chain& ch) {
  RectType t;
  t.s = static_cast<int>(ch.rects.size());
  if (ch.rects.empty()) return t;
  const Rational eps = epsilon_of(g.instance.epsilon_inv);
  t.rho = density_of(g.rects[ch.rects[0]], eps);
  if (ch.rects.size() > 1) t.rho2 = density_of(g.rects[ch.rects[1]], eps);
  return t;
}

// Per-geometry cache: chain types and chains grouped by (cell, type).
struct TypeTable {
  std::vector<RectType> chain_type;
  std::map<std::pair<VertexId, RectType>, std::vector<int>> groups;  // chains, job order
  std::vector<std::vector<int64_t>> prefix_cost;  // [chain][k] cost of first k rects
};

inline TypeTable build_types(const Geometry& g) {
  TypeTable tt;
  tt.chain_type.reserve(g.chains.size());
  for (size_t c = 0; c < g.chains.size(); ++c) {
    const Chain& ch = g.chains[c];
    tt.chain_type.push_back(type_of(g, ch));
    tt.groups[{ch.cell, tt.chain_type.back()}].push_back(static_cast<int>(c));
    std::vector<int64_t> pc{0};
    for (int id : ch.rects) pc.push_back(pc.back() + g.rects[id].cost);
    tt.prefix_cost.push_back(std::move(pc));
  }
  for (auto& [key, chains] : tt.groups) {
    std::sort(chains.begin(), chains.end(),
              [&](int a, int b) { return g.chains[a].job < g.chains[b].job; });
  }
  return tt;
}

// Cost ratio window between the two densities of any chain.
inline bool type_window_ok(const RectType& t, int64_t K, const Rational& eps) {
  if (!t.rho.finite() || !t.rho2.finite()) return true;
  const Rational base = 1 + eps;
  const Rational ratio = rpow(base, t.rho2.exp - t.rho.exp);
  const Rational k2(K * K);
  return ratio * k2 * base >= 1 && ratio <= base * k2;
}

struct LedgerKey {
  VertexId cell = 0;
  RectType type;
  int s_prime = 0;
  friend auto operator<=>(const LedgerKey&, const LedgerKey&) = default;
};

using BudgetLedger = std::map<LedgerKey, int64_t>;

inline BudgetLedger budgets_from_solution(const Geometry& g, const TypeTable& tt,
                                          const Selection& sel) {
  BudgetLedger led;
  const std::vector<int> pl = prefix_lengths(g, sel);
  for (size_t c = 0; c < g.chains.size(); ++c) {
    if (pl[c] < 0) throw Error("selection is not prefix-closed");
    if (pl[c] == 0) continue;
    led[{g.chains[c].cell, tt.chain_type[c], pl[c]}] += tt.prefix_cost[c][pl[c]];
  }
  return led;
}

inline BudgetLedger budgets_from_solution(const Geometry& g, const Selection& sel) {
  return budgets_from_solution(g, build_types(g), sel);
}

inline int64_t ledger_total(const BudgetLedger& led) {
  int64_t s = 0;
  for (const auto& [k, v] : led) s += v;
  return s;
}

inline nlohmann::json ledger_to_json(const Geometry& g, const BudgetLedger& led) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, budget] : led) {
    const Cell c = g.grid.cell(key.cell);
    out.push_back({{"cell", {{"level", c.level}, {"beg", c.beg}, {"end", c.end}}},
                   {"type", type_json(key.type)},
                   {"sPrime", key.s_prime},
                   {"budget", budget}});
  }
  return out;
}

// Budgets B(1..s) for one greedy call; index 0 unused, nullopt is infinite.
using Budgets = std::vector<std::optional<Rational>>;

inline Budgets budgets_for(const BudgetLedger& led, VertexId cell, const RectType& t) {
  Budgets b(t.s + 1, Rational(0));
  for (int sp = 1; sp <= t.s; ++sp) {
    auto it = led.find({cell, t, sp});
    if (it != led.end()) b[sp] = Rational(it->second);
  }
  return b;
}

struct GreedyOutput {
  std::vector<int> rects;          // sorted
  std::vector<int> prefix;         // per considered chain, selected prefix length
  std::vector<int> chains;         // considered chains, decreasing job order
  std::vector<Rational> phase_spend;  // fractional spend per phase s'
  Rational fractional_cost = 0;
  int64_t cost = 0;
};

// Phased fractional greedy over the chains of one (cell, type), followed by
// rounding up every positive fraction. `filter` restricts eligible chains.
inline GreedyOutput greedy_select(const Geometry& g, const TypeTable& tt, VertexId cell,
                                  const RectType& tau, const Budgets& budgets,
                                  const std::function<bool(int)>& filter = {},
                                  bool check_invariant = true) {
  GreedyOutput out;
  const int s = tau.s;
  if (static_cast<int>(budgets.size()) != s + 1) throw Error("greedy needs budgets 1..s");
  out.phase_spend.assign(s + 1, Rational(0));
  auto git = tt.groups.find({cell, tau});
  if (git == tt.groups.end()) return out;
  for (auto it = git->second.rbegin(); it != git->second.rend(); ++it) {
    if (!filter || filter(*it)) out.chains.push_back(*it);
  }
  const Rational eps = epsilon_of(g.instance.epsilon_inv);
  const size_t m = out.chains.size();
  std::vector<std::vector<Rational>> x(m, std::vector<Rational>(s + 1, Rational(0)));
  std::vector<int> kind(m, 0);
  for (size_t i = 0; i < m; ++i) {
    const auto& pc = tt.prefix_cost[out.chains[i]];
    for (int k = s; k >= 1 && kind[i] == 0; --k) {
      if (!budgets[k] || Rational(pc[k]) <= *budgets[k]) kind[i] = k;
    }
  }
  for (int sp = s; sp >= 1; --sp) {
    const bool unlimited = !budgets[sp];
    Rational remaining = unlimited ? Rational(0) : (1 + eps) * *budgets[sp];
    Rational spent = 0;
    for (size_t i = 0; i < m; ++i) {
      if (kind[i] < sp) continue;
      if (!unlimited && remaining <= 0) break;
      const Rational a = x[i][1];
      for (int r = 2; r <= sp; ++r) {
        if (x[i][r] != a) throw Error("greedy prefix fractions diverged");
      }
      if (a == 1) continue;
      const Rational rate(tt.prefix_cost[out.chains[i]][sp]);
      const Rational need = (1 - a) * rate;
      Rational next;
      if (unlimited || need <= remaining) {
        next = 1;
        spent += need;
        if (!unlimited) remaining -= need;
      } else {
        next = a + remaining / rate;
        spent += remaining;
        remaining = 0;
      }
      for (int r = 1; r <= sp; ++r) x[i][r] = next;
    }
    out.phase_spend[sp] = spent;
    out.fractional_cost += spent;
  }
  if (check_invariant) {
    // At most one strictly fractional variable per (kind, r).
    std::map<std::pair<int, int>, int> frac;
    for (size_t i = 0; i < m; ++i) {
      for (int r = 1; r <= s; ++r) {
        if (x[i][r] > 0 && r > kind[i]) throw Error("greedy raised a rect above its kind");
        if (x[i][r] > 0 && x[i][r] < 1 && ++frac[{kind[i], r}] > 1) {
          throw Error("greedy left two fractional rects of one kind");
        }
      }
    }
  }
  out.prefix.assign(m, 0);
  for (size_t i = 0; i < m; ++i) {
    const Chain& ch = g.chains[out.chains[i]];
    for (int r = 1; r <= s; ++r) {
      if (x[i][r] > 0) {
        out.rects.push_back(ch.rects[r - 1]);
        out.prefix[i] = r;
      }
    }
  }
  std::sort(out.rects.begin(), out.rects.end());
  out.cost = selection_cost(g, out.rects);
  bool finite = true;
  Rational total = 0;
  for (int sp = 1; sp <= s; ++sp) {
    if (!budgets[sp]) finite = false;
    else total += *budgets[sp];
  }
  if (finite && Rational(out.cost) > (2 + eps) * total) {
    throw Error("greedy exceeded (2+eps) times its budgets");
  }
  return out;
}

struct DominanceReport {
  bool ok = true;
  bool precondition = true;
  std::string witness;
};

// Rects of `sel` in chains of (cell, tau), optionally filtered.
inline std::vector<char> type_mask(const Geometry& g, const TypeTable& tt, VertexId cell,
                                   const RectType& tau, const Selection& sel,
                                   const std::function<bool(int)>& filter = {}) {
  std::vector<char> m(g.rects.size(), 0);
  auto it = tt.groups.find({cell, tau});
  if (it == tt.groups.end()) return m;
  for (int c : it->second) {
    if (filter && !filter(c)) continue;
    for (int id : g.chains[c].rects) {
      if (sel.contains(id)) m[id] = 1;
    }
  }
  return m;
}

inline DominanceReport check_greedy_dominance(const Geometry& g, const TypeTable& tt,
                                              VertexId cell, const RectType& tau,
                                              const Budgets& budgets,
                                              const Selection& reference,
                                              const std::function<bool(int)>& filter = {}) {
  DominanceReport rep;
  BudgetLedger led;
  {
    const std::vector<int> pl = prefix_lengths(g, reference);
    auto it = tt.groups.find({cell, tau});
    if (it != tt.groups.end()) {
      for (int c : it->second) {
        if (filter && !filter(c)) continue;
        if (pl[c] > 0) led[{cell, tau, pl[c]}] += tt.prefix_cost[c][pl[c]];
      }
    }
  }
  for (int sp = 1; sp <= tau.s; ++sp) {
    auto it = led.find({cell, tau, sp});
    const Rational need = it == led.end() ? Rational(0) : Rational(it->second);
    if (budgets[sp] && *budgets[sp] < need) {
      rep.ok = false;
      rep.precondition = false;
      rep.witness = "budget below reference spend at s'=" + std::to_string(sp);
      return rep;
    }
  }
  GreedyOutput out;
  try {
    out = greedy_select(g, tt, cell, tau, budgets, filter, true);
  } catch (const Error& e) {
    rep.ok = false;
    rep.witness = e.what();
    return rep;
  }
  const std::vector<char> ref = type_mask(g, tt, cell, tau, reference, filter);
  std::vector<char> mine(g.rects.size(), 0);
  for (int id : out.rects) mine[id] = 1;
  for (size_t i = 0; i < g.rays.size(); ++i) {
    if (covered_capacity(g, mine, i) < covered_capacity(g, ref, i)) {
      rep.ok = false;
      rep.witness = "ray [" + std::to_string(g.rays[i].s) + "," + std::to_string(g.rays[i].t) +
                    "]";
      return rep;
    }
  }
  return rep;
}

struct QpolyResult {
  RectSet global;
  CandidateFamily family;
  ConsistentSolution solution;
  int64_t cost = 0;
  int64_t reference_cost = 0;
};

inline QpolyResult build_qpoly_solution(const Geometry& g, const TypeTable& tt,
                                        const BudgetLedger& led) {
  QpolyResult res;
  for (const auto& [key, chains] : tt.groups) {
    const auto& [cell, tau] = key;
    const GreedyOutput out = greedy_select(g, tt, cell, tau, budgets_for(led, cell, tau));
    res.global.insert(res.global.end(), out.rects.begin(), out.rects.end());
  }
  std::sort(res.global.begin(), res.global.end());
  res.family = singleton_family(g, res.global);
  res.solution.global = res.global;
  for (const auto& [v, cands] : res.family.members) {
    res.solution.per_path[v] = cands.front();
    res.solution.choice[v] = 0;
  }
  res.cost = selection_cost(g, res.global);
  res.reference_cost = ledger_total(led);
  const ConsistencyReport rep = check_consistent(g, res.solution, res.family);
  if (!rep.ok) throw Error("qpoly solution not consistent: " + rep.property + " " + rep.witness);
  const Rational eps = epsilon_of(g.instance.epsilon_inv);
  if (Rational(res.cost) > (2 + eps) * res.reference_cost) {
    throw Error("qpoly solution exceeds (2+eps) times the reference");
  }
  return res;
}

inline QpolyResult build_qpoly_solution(const Geometry& g, const Selection& reference) {
  const TypeTable tt = build_types(g);
  return build_qpoly_solution(g, tt, budgets_from_solution(g, tt, reference));
}

}  // namespace flowtime

#endif  // FLOWTIME_QPOLY_HPP_
