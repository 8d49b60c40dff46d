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


// Polynomial-size consistent solution: smoothed cell budgets, the small /
// large split, critical density pairs, rounded small budgets, the greedy
// small-rectangle solution and the easy / hard large-rectangle solution,
// together with their per-path restrictions. All budgets are read off an
// optimal covering selection instead of being enumerated.

#ifndef FLOWTIME_POLY_HPP_
#define FLOWTIME_POLY_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "flowtime/common.hpp"
#include "flowtime/dptree.hpp"
#include "flowtime/geom.hpp"
#include "flowtime/qpoly.hpp"
#include "json.hpp"

namespace flowtime {

// Smallest power of base that is >= x; zero stays zero.
inline Rational round_up_power(const Rational& base, const Rational& x) {
  if (x <= 0) return Rational(0);
  return rpow(base, ceil_log(base, x));
}

inline BigInt floor_div(const Rational& x) {
  return boost::multiprecision::numerator(x) / boost::multiprecision::denominator(x);
}

inline BigInt ceil_div(const Rational& x) {
  const BigInt f = floor_div(x);
  return Rational(f) == x ? f : f + 1;
}

// ---------------------------------------------------------------- budgets

struct CellBudgets {
  int64_t K = 2;
  Rational eps = 1;
  std::map<VertexId, int64_t> opt;
  std::map<VertexId, Rational> prime;
  std::map<VertexId, Rational> round;
  std::map<VertexId, Rational> add;
  // Over the complete tree, rect-free cells included.
  Rational sum_opt = 0;
  Rational sum_prime = 0;
  Rational sum_round = 0;
  Rational sum_add = 0;

  Rational round_at(VertexId v) const {
    auto it = round.find(v);
    return it == round.end() ? Rational(0) : it->second;
  }
  Rational add_split(VertexId v) const { return add.at(v) / Rational(ipow(K, 4)); }
};

inline std::map<VertexId, int64_t> cell_spend(const Geometry& g, const Selection& sel) {
  std::map<VertexId, int64_t> out;
  for (int id : sel.rects) out[g.rects[id].cell] += g.rects[id].cost;
  return out;
}

// Ancestors donate (eps/K)^dist of their spend. Cells without rects come in
// classes: below an active vertex v, the m inactive children and their
// subtrees share one value per depth d, with multiplicity m K^(d-1).
inline CellBudgets smooth_budgets(const Geometry& g, const std::map<VertexId, int64_t>& opt) {
  const Grid& grid = g.grid;
  CellBudgets cb;
  cb.K = grid.K();
  cb.eps = epsilon_of(g.instance.epsilon_inv);
  const Rational base = 1 + cb.eps;
  const Rational decay = cb.eps / cb.K;
  const std::vector<VertexId> act = active_vertices(g);
  const std::set<VertexId> active(act.begin(), act.end());
  for (const auto& [v, c] : opt) {
    if (!active.count(v) && c != 0) throw Error("spend on a cell without rects");
  }
  for (VertexId v : act) {
    const auto it = opt.find(v);
    const int64_t o = it == opt.end() ? 0 : it->second;
    cb.opt[v] = o;
    if (v == grid.root()) {
      cb.prime[v] = o;
      cb.add[v] = 0;
    } else {
      const VertexId p = grid.parent(v);
      cb.prime[v] = o + decay * cb.prime.at(p);
      cb.add[v] = decay * (cb.round.at(p) + cb.add.at(p));
    }
    cb.round[v] = round_up_power(base, cb.prime[v]);
    cb.sum_opt += o;
    cb.sum_prime += cb.prime[v];
    cb.sum_round += cb.round[v];
    cb.sum_add += cb.add[v];
  }
  for (VertexId v : act) {
    if (grid.is_leaf(v)) continue;
    int64_t m = grid.K();
    const VertexId first = grid.first_child(v);
    for (int64_t k = 0; k < grid.K(); ++k) m -= active.count(first + k);
    if (m == 0) continue;
    BigInt count = m;
    Rational pr = cb.prime.at(v), rd = cb.round.at(v), ad = cb.add.at(v);
    for (int d = 1; d <= grid.ell_max() - grid.level_of(v); ++d) {
      pr *= decay;
      ad = decay * (rd + ad);
      rd = round_up_power(base, pr);
      cb.sum_prime += Rational(count) * pr;
      cb.sum_round += Rational(count) * rd;
      cb.sum_add += Rational(count) * ad;
      count *= grid.K();
    }
  }
  return cb;
}

struct BudgetCheck {
  bool round_ge_opt = true;
  bool sum_round = true;  // sum round <= (1+4eps) sum opt
  bool sum_add = true;    // sum add <= 2 eps sum round
  // The sum chains need eps <= 1/2; above that they are only reported.
  bool sums_apply = true;
  std::string witness;
  bool ok() const { return round_ge_opt && (!sums_apply || (sum_round && sum_add)); }
};

inline BudgetCheck check_cell_budgets(const Geometry& g, const CellBudgets& cb) {
  BudgetCheck r;
  for (const auto& [v, o] : cb.opt) {
    if (cb.round.at(v) < o) {
      r.round_ge_opt = false;
      r.witness = internal::vertex_str(g.grid, v);
    }
  }
  r.sum_round = cb.sum_round <= (1 + 4 * cb.eps) * cb.sum_opt;
  r.sum_add = cb.sum_add <= 2 * cb.eps * cb.sum_round;
  r.sums_apply = cb.eps <= Rational(1, 2);
  return r;
}

// ------------------------------------------------------------ small/large

struct SmallLargeSplit {
  Rational delta = 0;
  std::vector<char> large;  // per chain
};

inline Rational split_delta(const Geometry& g) {
  const Rational eps = epsilon_of(g.instance.epsilon_inv);
  return eps / Rational(ipow(g.grid.K(), 8));
}

inline SmallLargeSplit split_small_large(const Geometry& g, const CellBudgets& cb) {
  SmallLargeSplit sp;
  sp.delta = split_delta(g);
  sp.large.reserve(g.chains.size());
  for (const Chain& ch : g.chains) {
    const Rational first(g.rects[ch.rects.front()].cost);
    sp.large.push_back(first > sp.delta * cb.round_at(ch.cell) ? 1 : 0);
  }
  return sp;
}

inline std::vector<char> large_rect_mask(const Geometry& g, const SmallLargeSplit& sp) {
  std::vector<char> m(g.rects.size(), 0);
  for (size_t c = 0; c < g.chains.size(); ++c) {
    for (int id : g.chains[c].rects) m[id] = sp.large[c];
  }
  return m;
}

// ------------------------------------------------------------ small side

using CellLength = std::pair<VertexId, int>;

struct SmallTables {
  // Density pairs of small chains per (cell, chain length), ascending.
  std::map<CellLength, std::vector<DensityPair>> pairs;
  std::map<LedgerKey, int64_t> opt;  // B_sm_opt
  std::map<std::tuple<VertexId, int, int>, DensityPair> gamma;
  std::map<LedgerKey, Rational> round;  // B_sm_round
};

inline int64_t sm_opt_at(const SmallTables& st, VertexId c, const RectType& t, int sp) {
  auto it = st.opt.find({c, t, sp});
  return it == st.opt.end() ? 0 : it->second;
}

// gamma for (cell, s, s'); lengths without small chains map to the top pair.
inline DensityPair gamma_at(const SmallTables& st, VertexId c, int s, int sp) {
  auto it = st.gamma.find({c, s, sp});
  return it == st.gamma.end() ? DensityPair::top() : it->second;
}

inline SmallTables small_tables(const Geometry& g, const TypeTable& tt,
                                const SmallLargeSplit& sp, const Selection& ref) {
  SmallTables st;
  const std::vector<int> pl = prefix_lengths(g, ref);
  for (size_t c = 0; c < g.chains.size(); ++c) {
    if (sp.large[c]) continue;
    const RectType& t = tt.chain_type[c];
    st.pairs[{g.chains[c].cell, t.s}].push_back(t.pair());
    if (pl[c] > 0) st.opt[{g.chains[c].cell, t, pl[c]}] += tt.prefix_cost[c][pl[c]];
  }
  for (auto& [key, v] : st.pairs) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return st;
}

struct IncreaseResult {
  std::vector<DensityPair> gamma;  // index s', 1..s
  std::vector<int> rects;
  // case (1 or 2) per density pair and s'
  std::map<DensityPair, std::vector<int>> cases;
};

// Walks density pairs of (cell, s) upwards and adds the descendant budget
// while the spend so far stays below the reference plus that budget.
inline IncreaseResult greedy_increase(const Geometry& g, const TypeTable& tt,
                                      const CellBudgets& cb, const SmallLargeSplit& sp,
                                      const SmallTables& st, VertexId cell, int s) {
  IncreaseResult res;
  res.gamma.assign(s + 1, DensityPair::bottom());
  std::vector<Rational> spent(s + 1, Rational(0)), below(s + 1, Rational(0));
  std::vector<char> case2(s + 1, 0);
  const Rational add = cb.add_split(cell);
  auto small = [&](int c) { return !sp.large[c]; };
  auto it = st.pairs.find({cell, s});
  if (it != st.pairs.end()) {
    for (const DensityPair& pr : it->second) {
      const RectType tau{pr.rho, pr.rho2, s};
      Budgets b(s + 1, Rational(0));
      std::vector<int>& cs = res.cases[pr];
      cs.assign(s + 1, 0);
      for (int k = 1; k <= s; ++k) {
        const Rational o(sm_opt_at(st, cell, tau, k));
        if (spent[k] < add + below[k]) {
          b[k] = o + add;
          res.gamma[k] = pr;
          cs[k] = 1;
        } else {
          b[k] = o;
          case2[k] = 1;
          cs[k] = 2;
        }
        below[k] += o;
      }
      const GreedyOutput out = greedy_select(g, tt, cell, tau, b, small);
      for (int k = 1; k <= s; ++k) spent[k] += out.phase_spend[k];
      res.rects.insert(res.rects.end(), out.rects.begin(), out.rects.end());
    }
  }
  for (int k = 1; k <= s; ++k) {
    if (!case2[k]) res.gamma[k] = DensityPair::top();
  }
  std::sort(res.rects.begin(), res.rects.end());
  return res;
}

inline void compute_gammas(const Geometry& g, const TypeTable& tt, const CellBudgets& cb,
                           const SmallLargeSplit& sp, SmallTables& st) {
  for (const auto& [key, prs] : st.pairs) {
    const auto [cell, s] = key;
    const IncreaseResult r = greedy_increase(g, tt, cb, sp, st, cell, s);
    for (int k = 1; k <= s; ++k) st.gamma[{cell, s, k}] = r.gamma[k];
  }
}

// Gamma(C): critical pairs of the cell, with the top pair whenever some
// chain length up to K^2 has no small chain.
inline std::vector<DensityPair> critical_set(const Geometry& g, const SmallTables& st,
                                             VertexId cell) {
  std::set<DensityPair> out;
  int lengths = 0;
  for (const auto& [key, prs] : st.pairs) {
    if (key.first != cell) continue;
    ++lengths;
    for (int k = 1; k <= key.second; ++k) out.insert(gamma_at(st, cell, key.second, k));
  }
  const int64_t k2 = g.grid.K() * g.grid.K();
  if (lengths < k2) out.insert(DensityPair::top());
  return {out.begin(), out.end()};
}

struct RoundCheck {
  bool claim1 = true;
  bool claim2 = true;
  std::string witness;
  bool ok() const { return claim1 && claim2; }
};

// Per stretch between consecutive critical pairs: geometric smoothing, then
// rounding up to a power of 1 + eps/4.
inline RoundCheck round_small_budgets(const Geometry& g, const CellBudgets& cb,
                                      SmallTables& st) {
  RoundCheck chk;
  const Rational eps = cb.eps;
  const Rational k8(ipow(cb.K, 8));
  const Rational base = 1 + eps / 4;
  const Rational geo = eps / (4 * k8);
  const Rational dec = eps / 4;
  std::set<VertexId> cells;
  for (const auto& [key, prs] : st.pairs) cells.insert(key.first);
  for (VertexId cell : cells) {
    std::vector<DensityPair> bounds{DensityPair::bottom()};
    for (const DensityPair& p : critical_set(g, st, cell)) {
      if (p != bounds.back()) bounds.push_back(p);
    }
    if (bounds.back() != DensityPair::top()) bounds.push_back(DensityPair::top());
    const Rational bround = cb.round_at(cell);
    for (const auto& [key, prs] : st.pairs) {
      if (key.first != cell) continue;
      const int s = key.second;
      for (int k = 1; k <= s; ++k) {
        for (size_t h = 0; h + 1 < bounds.size(); ++h) {
          const DensityPair lo = bounds[h], hi = bounds[h + 1];
          // stretch members: the boundary pair first, then the real pairs
          std::vector<std::optional<DensityPair>> members{std::nullopt};
          for (const DensityPair& p : prs) {
            if (p == lo) members[0] = p;
            else if (lo < p && p < hi) members.push_back(p);
          }
          Rational acc = 0;  // sum_{j<=i} (eps/4)^(i-j) opt_j
          Rational geo_pow = geo;
          Rational lhs = 0, rhs_opt = 0;
          for (size_t i = 0; i < members.size(); ++i) {
            Rational o = 0;
            if (members[i]) o = sm_opt_at(st, cell, {members[i]->rho, members[i]->rho2, s}, k);
            acc = (i == 0 ? Rational(0) : acc * dec) + o;
            const Rational bprime = geo_pow * bround + acc;
            geo_pow *= geo;
            if (!members[i]) continue;
            const Rational r = round_up_power(base, bprime);
            st.round[{cell, {members[i]->rho, members[i]->rho2, s}, k}] = r;
            if (r < o) {
              chk.claim1 = false;
              chk.witness = internal::vertex_str(g.grid, cell) + " pair " + to_string(*members[i]);
            }
            lhs += r;
            rhs_opt += o;
          }
          if (lhs > eps / k8 * bround + (1 + eps) * rhs_opt) {
            chk.claim2 = false;
            chk.witness = internal::vertex_str(g.grid, cell) + " stretch from " + to_string(lo);
          }
        }
      }
    }
  }
  return chk;
}

inline Rational sm_round_at(const SmallTables& st, VertexId c, const RectType& t, int sp) {
  auto it = st.round.find({c, t, sp});
  return it == st.round.end() ? Rational(0) : it->second;
}

struct SmallSolution {
  RectSet rects;
  std::vector<int> prefix;  // per chain
};

// Case table per (cell, s, pair, s'): below gamma unlimited, at gamma the
// rounded budget plus the donation, above gamma the rounded budget.
inline SmallSolution build_small_solution(const Geometry& g, const TypeTable& tt,
                                          const CellBudgets& cb, const SmallLargeSplit& sp,
                                          const SmallTables& st) {
  SmallSolution sol;
  sol.prefix.assign(g.chains.size(), 0);
  auto small = [&](int c) { return !sp.large[c]; };
  for (const auto& [key, prs] : st.pairs) {
    const auto [cell, s] = key;
    const Rational add = cb.add_split(cell);
    for (const DensityPair& pr : prs) {
      const RectType tau{pr.rho, pr.rho2, s};
      Budgets b(s + 1, Rational(0));
      for (int k = 1; k <= s; ++k) {
        const DensityPair gm = gamma_at(st, cell, s, k);
        if (pr < gm) b[k] = std::nullopt;
        else if (pr == gm) b[k] = sm_round_at(st, cell, tau, k) + add;
        else b[k] = sm_round_at(st, cell, tau, k);
      }
      const GreedyOutput out = greedy_select(g, tt, cell, tau, b, small);
      sol.rects.insert(sol.rects.end(), out.rects.begin(), out.rects.end());
      for (size_t i = 0; i < out.chains.size(); ++i) sol.prefix[out.chains[i]] = out.prefix[i];
    }
  }
  std::sort(sol.rects.begin(), sol.rects.end());
  return sol;
}

// Index of the chain rect (1-based) lying over the bottom cell, or 0.
inline int rect_over(const Geometry& g, VertexId cell, int s, VertexId bottom) {
  const int64_t k2 = g.grid.K() * g.grid.K();
  const Cell c = g.grid.cell(cell), b = g.grid.cell(bottom);
  const int64_t sub = c.len() / k2;
  const int64_t m = (b.beg - c.beg) / sub;
  const int64_t r = m - (k2 - s) + 1;
  return (r >= 1 && r <= s) ? static_cast<int>(r) : 0;
}

inline int64_t h_exponent(const Geometry& g) {
  const Rational eps = epsilon_of(g.instance.epsilon_inv);
  return floor_log(1 + eps, Rational(ipow(g.grid.K(), 7)) / eps);
}

struct PathThresholds {
  std::vector<VertexId> path;
  std::vector<DensityPair> sigma_minus;  // per path position; top when undefined
  std::vector<DensityPair> sigma_plus;
};

inline PathThresholds small_thresholds(const Geometry& g, const SmallTables& st,
                                       VertexId bottom) {
  PathThresholds pt;
  pt.path = g.grid.path_to(bottom);
  const int L = static_cast<int>(pt.path.size());
  pt.sigma_minus.assign(L, DensityPair::top());
  pt.sigma_plus.assign(L, DensityPair::top());
  for (int j = 0; j + 2 < L; ++j) {
    const VertexId c = pt.path[j];
    for (const auto& [key, prs] : st.pairs) {
      if (key.first != c) continue;
      const int r = rect_over(g, c, key.second, bottom);
      if (r == 0) continue;
      pt.sigma_minus[j] = std::min(pt.sigma_minus[j], gamma_at(st, c, key.second, r));
    }
  }
  const int64_t hexp = h_exponent(g);
  for (int i = 0; i + 3 < L; ++i) {
    for (int j = i + 1; j + 2 < L; ++j) {
      pt.sigma_plus[i] = std::min(pt.sigma_plus[i], pt.sigma_minus[j].shifted(hexp * (j - i)));
    }
  }
  return pt;
}

inline RectSet restrict_small_to_path(const Geometry& g, const TypeTable& tt,
                                      const SmallTables& st, const SmallSolution& sol,
                                      VertexId bottom) {
  const PathThresholds pt = small_thresholds(g, st, bottom);
  const int L = static_cast<int>(pt.path.size());
  RectSet out;
  for (int i = 0; i < L; ++i) {
    const VertexId c = pt.path[i];
    auto it = g.cell_chains.find(c);
    if (it == g.cell_chains.end()) continue;
    for (int ch : it->second) {
      int keep = sol.prefix[ch];
      if (keep == 0) continue;
      if (i + 2 < L) {
        const int r = rect_over(g, c, tt.chain_type[ch].s, bottom);
        keep = (r == 0 || keep < r) ? 0 : r;
        if (i + 3 < L && tt.chain_type[ch].pair() >= pt.sigma_plus[i]) keep = 0;
      }
      for (int k = 0; k < keep; ++k) out.push_back(g.chains[ch].rects[k]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ------------------------------------------------------------ large side

struct GroupKey {
  bool rho2_inf = true;
  int64_t diff = 0;  // exponent of rho / rho'
  int s = 0;
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

inline GroupKey group_of(const RectType& t) {
  GroupKey k;
  k.s = t.s;
  k.rho2_inf = !t.rho2.finite();
  if (!k.rho2_inf) k.diff = t.rho.exp - t.rho2.exp;
  return k;
}

struct LargeSolution {
  RectSet rects;
  std::vector<int> prefix;  // per chain
  std::vector<int> easy_prefix;
  // Selections made for hard jobs, keyed by the hard job's pbar class.
  std::vector<std::map<int64_t, int>> hard_prefix;
  std::vector<int64_t> pbar_exp;  // per job: largest h with (1+eps)^h <= p_j
  std::map<VertexId, std::set<int>> easy;  // jobs
  std::map<VertexId, std::set<int>> hard;
  std::map<VertexId, Rational> large_round;  // B_large_round(C)
  // per cell, hard job -> budget bound B_large_round(C,g,k') and prefix
  std::map<VertexId, std::map<int, std::pair<Rational, int>>> hard_budget;
  int substitutions = 0;
};

inline LargeSolution build_large_solution(const Geometry& g, const TypeTable& tt,
                                          const CellBudgets& cb, const SmallLargeSplit& sp,
                                          const Selection& ref) {
  LargeSolution sol;
  sol.prefix.assign(g.chains.size(), 0);
  sol.easy_prefix.assign(g.chains.size(), 0);
  sol.hard_prefix.assign(g.chains.size(), {});
  const Rational eps = cb.eps;
  for (const Job& j : g.instance.jobs) {
    sol.pbar_exp.push_back(floor_log(1 + eps, Rational(j.proc)));
  }
  const std::vector<int> pl = prefix_lengths(g, ref);
  for (const auto& [cell, chains] : g.cell_chains) {
    std::map<GroupKey, std::vector<int>> groups;  // large chains, increasing job
    Rational large_opt = 0;
    for (int c : chains) {
      if (!sp.large[c]) continue;
      groups[group_of(tt.chain_type[c])].push_back(c);
      if (pl[c] > 0) large_opt += tt.prefix_cost[c][pl[c]];
    }
    if (groups.empty()) continue;
    const Rational step = eps * cb.round_at(cell);
    Rational large_round = 0;
    if (step > 0) large_round = Rational(floor_div(large_opt / step) + 1) * step;
    sol.large_round[cell] = large_round;
    const Rational unit = eps * sp.delta * large_round;
    std::set<int> selected;  // chains with rects chosen in this cell
    auto select = [&](int c, int k, std::optional<int64_t> cls) {
      sol.prefix[c] = std::max(sol.prefix[c], k);
      int& slot = cls ? sol.hard_prefix[c][*cls] : sol.easy_prefix[c];
      slot = std::max(slot, k);
      selected.insert(c);
    };
    for (auto& [gk, members] : groups) {
      std::sort(members.begin(), members.end(),
                [&](int a, int b) { return g.chains[a].job < g.chains[b].job; });
      std::vector<int> chosen;  // j_1..j_k
      for (int c : members) {
        if (pl[c] > 0) chosen.push_back(c);
      }
      const size_t k = chosen.size();
      if (k == 0) continue;
      std::vector<Rational> budget(k);
      for (size_t i = 0; i < k; ++i) {
        const Rational spend(tt.prefix_cost[chosen[i]][pl[chosen[i]]]);
        budget[i] = unit > 0 ? Rational(ceil_div(spend / unit)) * unit : spend;
      }
      auto fits = [&](int c, size_t i) {
        return Rational(tt.prefix_cost[c][pl[chosen[i]]]) <= budget[i];
      };
      auto by_proc = [&](int a, int b) {  // larger p first, ties to the later job
        const int64_t pa = g.instance.jobs[g.chains[a].job].proc;
        const int64_t pb = g.instance.jobs[g.chains[b].job].proc;
        if (pa != pb) return pa > pb;
        return g.chains[a].job > g.chains[b].job;
      };
      std::set<int> high;  // chains
      for (size_t i = 0; i < k; ++i) {
        std::vector<int> cand;
        for (int c : members) {
          if (fits(c, i)) cand.push_back(c);
        }
        std::sort(cand.begin(), cand.end(), by_proc);
        for (size_t t = 0; t < cand.size() && t < k; ++t) high.insert(cand[t]);
      }
      std::map<int64_t, std::vector<size_t>> parts;  // hard jobs by pbar
      for (size_t i = 0; i < k; ++i) {
        const int job = g.chains[chosen[i]].job;
        if (high.count(chosen[i])) {
          sol.easy[cell].insert(job);
          select(chosen[i], pl[chosen[i]], std::nullopt);
        } else {
          sol.hard[cell].insert(job);
          sol.hard_budget[cell][job] = {budget[i], pl[chosen[i]]};
          parts[sol.pbar_exp[job]].push_back(i);
        }
      }
      for (auto& [pexp, idx] : parts) {
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
          return g.chains[chosen[a]].job > g.chains[chosen[b]].job;
        });
        std::optional<int> hat;  // job bound for later candidates
        for (size_t i : idx) {
          const int cur = chosen[i];
          const int cur_job = g.chains[cur].job;
          const int need = pl[cur];
          std::vector<int> cand;
          for (int c : members) {
            const int job = g.chains[c].job;
            if (sol.pbar_exp[job] != pexp || !fits(c, i)) continue;
            if (hat && !(job < *hat)) continue;
            cand.push_back(c);
          }
          std::sort(cand.begin(), cand.end(),
                    [&](int a, int b) { return g.chains[a].job > g.chains[b].job; });
          if (cand.empty()) {
            throw Error("large construction: no first substitute for hard job " +
                        std::to_string(g.instance.jobs[cur_job].id));
          }
          const int j1 = cand[0];
          std::vector<int> picked{j1};
          if (j1 != cur) {
            if (cand.size() < 2) {
              throw Error("large construction: no second substitute for hard job " +
                          std::to_string(g.instance.jobs[cur_job].id));
            }
            picked.push_back(cand[1]);
          } else {
            std::vector<int> pool;
            for (int c : high) {
              if (sol.easy[cell].count(g.chains[c].job)) continue;
              if (selected.count(c) || !fits(c, i)) continue;
              pool.push_back(c);
            }
            std::sort(pool.begin(), pool.end(), by_proc);
            if (pool.empty()) {
              throw Error("large construction: no spare high job for hard job " +
                          std::to_string(g.instance.jobs[cur_job].id));
            }
            picked.push_back(pool[0]);
            ++sol.substitutions;
          }
          for (int c : picked) {
            select(c, need, pexp);
            const int job = g.chains[c].job;
            if (!high.count(c) && sol.pbar_exp[job] == pexp && (!hat || job < *hat)) hat = job;
          }
        }
      }
    }
  }
  for (size_t c = 0; c < g.chains.size(); ++c) {
    for (int r = 0; r < sol.prefix[c]; ++r) sol.rects.push_back(g.chains[c].rects[r]);
  }
  std::sort(sol.rects.begin(), sol.rects.end());
  return sol;
}

inline bool overlaps(const Rect& r, const Cell& c) { return r.beg < c.end && c.beg < r.end; }
inline bool spans(const Rect& r, const Cell& c) { return r.beg <= c.beg && c.end <= r.end; }

// Whether (cell at path position i, pbar) is relevant for the path.
inline bool large_pair_relevant(const Geometry& g, const LargeSolution& sol,
                                const Selection& ref, const std::vector<VertexId>& path,
                                size_t i, int64_t pexp) {
  const Cell bottom = g.grid.cell(path.back());
  const Rational eps = epsilon_of(g.instance.epsilon_inv);
  const Rational delta = split_delta(g);
  auto ref_rect = [&](int job, VertexId cell, auto pred) {
    for (int c : g.job_chains[job]) {
      if (g.chains[c].cell != cell) continue;
      for (int id : g.chains[c].rects) {
        if (ref.contains(id) && pred(g.rects[id])) return true;
      }
    }
    return false;
  };
  const VertexId cell = path[i];
  bool witness = false;
  if (auto it = sol.hard.find(cell); it != sol.hard.end()) {
    for (int job : it->second) {
      if (sol.pbar_exp[job] != pexp) continue;
      if (ref_rect(job, cell, [&](const Rect& r) { return overlaps(r, bottom); })) witness = true;
    }
  }
  if (!witness) return false;
  const Rational pbar = rpow(1 + eps, pexp);
  for (size_t j = i + 1; j + 2 < path.size(); ++j) {
    auto it = sol.hard.find(path[j]);
    if (it == sol.hard.end()) continue;
    for (int job : it->second) {
      const Rational limit =
          rpow(1 + eps, sol.pbar_exp[job]) * delta * rpow(eps, static_cast<int64_t>(j - i));
      if (pbar > limit) continue;
      if (ref_rect(job, path[j], [&](const Rect& r) { return spans(r, bottom); })) return false;
    }
  }
  return true;
}

inline RectSet restrict_large_to_path(const Geometry& g, const LargeSolution& sol,
                                      const Selection& ref, VertexId bottom) {
  const std::vector<VertexId> path = g.grid.path_to(bottom);
  RectSet out;
  for (size_t i = 0; i < path.size(); ++i) {
    auto it = g.cell_chains.find(path[i]);
    if (it == g.cell_chains.end()) continue;
    std::map<int64_t, bool> relevant;
    for (int ch : it->second) {
      int keep = sol.easy_prefix[ch];
      for (const auto& [pexp, k] : sol.hard_prefix[ch]) {
        if (k <= keep) continue;
        auto r = relevant.find(pexp);
        if (r == relevant.end()) {
          r = relevant.emplace(pexp, large_pair_relevant(g, sol, ref, path, i, pexp)).first;
        }
        if (r->second) keep = k;
      }
      for (int k = 0; k < keep; ++k) out.push_back(g.chains[ch].rects[k]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ------------------------------------------------------------ combined

struct PathCheck {
  bool coverage = true;
  bool monotone = true;
  std::string witness;
  bool ok() const { return coverage && monotone; }
};

// Coverage domination against `target` on the rays a path serves (t in the
// bottom cell, rects inside R(Q)), and path monotonicity, over every
// rect-owning path.
inline PathCheck check_path_family(const Geometry& g,
                                   const std::map<VertexId, RectSet>& per_path,
                                   const std::vector<char>& target) {
  PathCheck pc;
  for (const auto& [v, s] : per_path) {
    std::vector<char> m(g.rects.size(), 0);
    for (int id : s) m[id] = 1;
    for (size_t i = 0; i < g.rays.size() && pc.coverage; ++i) {
      if (!internal::ray_served(g, i, v, RayScope::kBottomCell)) continue;
      if (covered_capacity(g, m, i) < covered_capacity(g, target, i)) {
        pc.coverage = false;
        pc.witness = "ray [" + std::to_string(g.rays[i].s) + "," + std::to_string(g.rays[i].t) +
                     "] at " + internal::vertex_str(g.grid, v);
      }
    }
    for (VertexId a = g.grid.parent(v); a >= 0 && pc.monotone; a = g.grid.parent(a)) {
      auto it = per_path.find(a);
      if (it == per_path.end()) continue;
      if (!is_subset(restrict_to_path(g, s, a), it->second)) {
        pc.monotone = false;
        pc.witness = internal::vertex_str(g.grid, v) + " vs " + internal::vertex_str(g.grid, a);
      }
    }
  }
  return pc;
}

struct PolyChecks {
  BudgetCheck budgets;
  RoundCheck rounding;
  bool small_cost = true;  // c(R'_sm) <= (2+4e) c(R* sm) + (K^8 d + 6e)(1+e) c(R*)
  bool large_cost = true;  // c(R'_l) <= 2 c(R* l) + 3e c(R*)
  bool total_cost = true;  // c(R') <= (2 + (14+7e) e) c(R*)
  PathCheck small_paths;
  PathCheck large_paths;
  ConsistencyReport consistency;

  bool ok() const {
    return budgets.ok() && rounding.ok() && small_cost && large_cost && total_cost &&
           small_paths.ok() && large_paths.ok() && consistency.ok;
  }
};

struct PolyResult {
  CellBudgets budgets;
  SmallLargeSplit split;
  SmallTables small_tables;
  SmallSolution small;
  LargeSolution large;
  std::map<VertexId, RectSet> small_paths;
  std::map<VertexId, RectSet> large_paths;
  RectSet global;
  CandidateFamily family;
  ConsistentSolution solution;
  int64_t cost = 0;
  int64_t small_cost = 0;
  int64_t large_cost = 0;
  int64_t reference_cost = 0;
  int64_t reference_small = 0;
  int64_t reference_large = 0;
  Rational small_bound = 0;
  Rational large_bound = 0;
  Rational total_bound = 0;
  PolyChecks checks;
};

inline Rational poly_constant(const Rational& eps) { return 14 + 7 * eps; }

inline PolyResult build_poly_solution(const Geometry& g, const TypeTable& tt,
                                      const Selection& ref) {
  PolyResult res;
  const Rational eps = epsilon_of(g.instance.epsilon_inv);
  res.budgets = smooth_budgets(g, cell_spend(g, ref));
  res.checks.budgets = check_cell_budgets(g, res.budgets);
  res.split = split_small_large(g, res.budgets);

  res.small_tables = small_tables(g, tt, res.split, ref);
  compute_gammas(g, tt, res.budgets, res.split, res.small_tables);
  res.checks.rounding = round_small_budgets(g, res.budgets, res.small_tables);
  res.small = build_small_solution(g, tt, res.budgets, res.split, res.small_tables);
  res.large = build_large_solution(g, tt, res.budgets, res.split, ref);

  const std::vector<char> lmask = large_rect_mask(g, res.split);
  std::vector<char> ref_small(g.rects.size(), 0), ref_large(g.rects.size(), 0);
  for (int id : ref.rects) {
    (lmask[id] ? ref_large : ref_small)[id] = 1;
    (lmask[id] ? res.reference_large : res.reference_small) += g.rects[id].cost;
  }
  res.reference_cost = res.reference_small + res.reference_large;
  res.small_cost = selection_cost(g, res.small.rects);
  res.large_cost = selection_cost(g, res.large.rects);
  const Rational k8(ipow(g.grid.K(), 8));
  const Rational c_ref(res.reference_cost);
  res.small_bound = (2 + 4 * eps) * res.reference_small +
                    (k8 * res.split.delta + 6 * eps) * (1 + eps) * c_ref;
  res.large_bound = 2 * Rational(res.reference_large) + 3 * eps * c_ref;
  res.checks.small_cost = Rational(res.small_cost) <= res.small_bound;
  res.checks.large_cost = Rational(res.large_cost) <= res.large_bound;

  for (VertexId v : active_vertices(g)) {
    res.small_paths[v] = restrict_small_to_path(g, tt, res.small_tables, res.small, v);
    res.large_paths[v] = restrict_large_to_path(g, res.large, ref, v);
  }
  res.checks.small_paths = check_path_family(g, res.small_paths, ref_small);
  res.checks.large_paths = check_path_family(g, res.large_paths, ref_large);

  res.global = set_union(res.small.rects, res.large.rects);
  res.cost = selection_cost(g, res.global);
  res.total_bound = (2 + poly_constant(eps) * eps) * c_ref;
  res.checks.total_cost = Rational(res.cost) <= res.total_bound;
  res.solution.global = res.global;
  for (VertexId v : active_vertices(g)) {
    RectSet s = set_union(res.small_paths[v], res.large_paths[v]);
    res.family.members[v] = {s};
    res.solution.per_path[v] = std::move(s);
    res.solution.choice[v] = 0;
  }
  res.checks.consistency = check_consistent(g, res.solution, res.family);
  return res;
}

inline PolyResult build_poly_solution(const Geometry& g, const Selection& ref) {
  return build_poly_solution(g, build_types(g), ref);
}

inline nlohmann::json poly_tables_json(const Geometry& g, const PolyResult& r) {
  auto cell_json = [&](VertexId v) {
    const Cell c = g.grid.cell(v);
    return nlohmann::json{{"level", c.level}, {"beg", c.beg}, {"end", c.end}};
  };
  nlohmann::json budgets = nlohmann::json::array();
  for (const auto& [v, o] : r.budgets.opt) {
    budgets.push_back({{"cell", cell_json(v)},
                       {"opt", o},
                       {"round", to_string(r.budgets.round.at(v))},
                       {"add", to_string(r.budgets.add.at(v))}});
  }
  nlohmann::json large = nlohmann::json::array();
  for (size_t c = 0; c < g.chains.size(); ++c) {
    large.push_back({{"job", g.instance.jobs[g.chains[c].job].id},
                     {"cell", cell_json(g.chains[c].cell)},
                     {"large", static_cast<bool>(r.split.large[c])}});
  }
  nlohmann::json gammas = nlohmann::json::array();
  for (const auto& [key, p] : r.small_tables.gamma) {
    const auto& [v, s, sp] = key;
    gammas.push_back({{"cell", cell_json(v)}, {"s", s}, {"sPrime", sp}, {"gamma", to_string(p)}});
  }
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& [key, val] : r.small_tables.round) {
    rounds.push_back({{"cell", cell_json(key.cell)},
                      {"type", type_json(key.type)},
                      {"sPrime", key.s_prime},
                      {"round", to_string(val)}});
  }
  return {{"cellBudgets", budgets}, {"split", large}, {"gamma", gammas}, {"smallRound", rounds}};
}

}  // namespace flowtime

#endif  // FLOWTIME_POLY_HPP_
