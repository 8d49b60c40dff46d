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

// The shifted hierarchical grid and the per-job segment partitions.

#ifndef FLOWTIME_GRID_HPP_
#define FLOWTIME_GRID_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "flowtime/common.hpp"
#include "flowtime/instance.hpp"
#include "flowtime/oracle.hpp"
#include "json.hpp"

namespace flowtime {

using VertexId = int64_t;

struct GridParams {
  int64_t epsilon_inv = 1;
  int64_t K = 2;
  int64_t ell_max = 2;
  int64_t off_x = 0;
  int64_t off_y = 1;

  friend bool operator==(const GridParams&, const GridParams&) = default;
};

inline int64_t branching(int64_t epsilon_inv) {
  return ipow(2 * epsilon_inv, epsilon_inv);
}

inline int64_t min_ell_max(int64_t K, int64_t T) {
  int64_t k = 2;
  int64_t p = 1;  // K^{k-2}
  while (p < T) {
    p = checked_mul(p, K);
    ++k;
  }
  return k;
}

struct OffsetsDomain {
  int64_t K = 2;
  int64_t ell_max = 2;
  std::vector<int64_t> off_y;
  int64_t off_x_min = 0;  // off_x ranges over [off_x_min, 0]

  std::vector<int64_t> off_x() const {
    std::vector<int64_t> v;
    for (int64_t x = off_x_min; x <= 0; ++x) v.push_back(x);
    return v;
  }
  int64_t size() const {
    return static_cast<int64_t>(off_y.size()) * (1 - off_x_min);
  }
};

inline OffsetsDomain offsets_domain(int64_t epsilon_inv, int64_t T) {
  if (epsilon_inv < 1 || T < 1) throw Error("offsets domain needs eps_inv, T >= 1");
  OffsetsDomain d;
  d.K = branching(epsilon_inv);
  d.ell_max = min_ell_max(d.K, T);
  for (int64_t i = 0; i < epsilon_inv; ++i) d.off_y.push_back(ipow(2 * epsilon_inv, i));
  d.off_x_min = -ipow(d.K, d.ell_max - 1) + 1;
  return d;
}

inline GridParams make_params(int64_t epsilon_inv, int64_t T, int64_t off_x,
                              int64_t off_y) {
  const OffsetsDomain d = offsets_domain(epsilon_inv, T);
  GridParams p{epsilon_inv, d.K, d.ell_max, off_x, off_y};
  if (off_x < d.off_x_min || off_x > 0) throw Error("off_x out of domain");
  if (std::find(d.off_y.begin(), d.off_y.end(), off_y) == d.off_y.end()) {
    throw Error("off_y out of domain");
  }
  return p;
}

struct Cell {
  int level = 0;
  int64_t index = 0;
  int64_t beg = 0;
  int64_t end = 0;

  int64_t len() const { return end - beg; }
  bool contains(int64_t t) const { return beg <= t && t < end; }
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Complete K-ary tree of cells. Vertex ids number cells level by level.
class Grid {
 public:
  Grid() = default;

  Grid(int64_t T, const GridParams& p) : T_(T), p_(p) {
    if (p.K < 2 || p.ell_max < 0 || p.off_y < 1 || p.off_y >= std::max<int64_t>(p.K, 2)) {
      throw Error("grid parameters out of domain");
    }
    level_offset_.push_back(0);
    len_.push_back(checked_mul(p.off_y, ipow(p.K, p.ell_max)));
    int64_t width = 1;
    for (int64_t l = 1; l <= p.ell_max + 1; ++l) {
      level_offset_.push_back(checked_add(level_offset_.back(), width));
      width = checked_mul(width, p.K);
      if (l <= p.ell_max) len_.push_back(len_.back() / p.K);
    }
    if (!(p.off_x <= 0 && p.off_x + len_[0] >= T)) {
      throw Error("root cell does not contain [0,T)");
    }
  }

  int64_t T() const { return T_; }
  const GridParams& params() const { return p_; }
  int64_t K() const { return p_.K; }
  int ell_max() const { return static_cast<int>(p_.ell_max); }
  int64_t len(int level) const { return len_[level]; }
  int64_t cells_at(int level) const {
    return level_offset_[level + 1] - level_offset_[level];
  }
  int64_t num_vertices() const { return level_offset_.back(); }
  VertexId root() const { return 0; }

  VertexId id(int level, int64_t index) const { return level_offset_[level] + index; }

  int level_of(VertexId v) const {
    int l = 0;
    while (level_offset_[l + 1] <= v) ++l;
    return l;
  }

  Cell cell(VertexId v) const {
    const int l = level_of(v);
    const int64_t i = v - level_offset_[l];
    return {l, i, p_.off_x + i * len_[l], p_.off_x + (i + 1) * len_[l]};
  }

  VertexId cell_at(int level, int64_t x) const {
    const int64_t rel = x - p_.off_x;
    if (rel < 0 || rel >= len_[0]) throw Error("point outside the root cell");
    return id(level, rel / len_[level]);
  }

  VertexId parent(VertexId v) const {
    const int l = level_of(v);
    if (l == 0) return -1;
    return id(l - 1, (v - level_offset_[l]) / p_.K);
  }

  VertexId first_child(VertexId v) const {
    const int l = level_of(v);
    return id(l + 1, (v - level_offset_[l]) * p_.K);
  }

  bool is_leaf(VertexId v) const { return level_of(v) == ell_max(); }

  // True when a is b or an ancestor of b.
  bool is_ancestor_or_self(VertexId a, VertexId b) const {
    const int la = level_of(a), lb = level_of(b);
    if (la > lb) return false;
    const int64_t ia = a - level_offset_[la];
    int64_t ib = b - level_offset_[lb];
    for (int l = lb; l > la; --l) ib /= p_.K;
    return ia == ib;
  }

  // Root first.
  std::vector<VertexId> path_to(VertexId v) const {
    std::vector<VertexId> path;
    for (VertexId u = v; u >= 0; u = parent(u)) path.push_back(u);
    std::reverse(path.begin(), path.end());
    return path;
  }

  std::vector<Cell> all_cells() const {
    std::vector<Cell> out;
    out.reserve(num_vertices());
    for (VertexId v = 0; v < num_vertices(); ++v) out.push_back(cell(v));
    return out;
  }

 private:
  int64_t T_ = 0;
  GridParams p_;
  std::vector<int64_t> level_offset_;
  std::vector<int64_t> len_;
};

inline Grid build_grid(int64_t T, const GridParams& params) {
  const GridParams checked = make_params(params.epsilon_inv, T, params.off_x, params.off_y);
  if (!(checked == params)) throw Error("grid parameters out of domain");
  return Grid(T, params);
}

struct Segment {
  int64_t beg = 0;
  int64_t end = 0;
  VertexId cell = 0;

  int64_t len() const { return end - beg; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

// Segments of one job in time order; `chains` groups them by owning cell,
// deepest cell first.
struct SegmentSet {
  struct Group {
    VertexId cell = 0;
    int first = 0;
    int count = 0;
  };
  std::vector<Segment> segments;
  std::vector<Group> chains;
};

inline SegmentSet build_segments(const Grid& grid, const Job& job, int64_t T) {
  if (job.release < 0 || job.release >= T) throw Error("release outside [0,T)");
  SegmentSet out;
  int level = grid.ell_max();
  VertexId c = grid.cell_at(level, job.release);
  int64_t from = job.release;
  while (true) {
    const Cell cell = grid.cell(c);
    const int64_t step = level <= grid.ell_max() - 2 ? grid.len(level + 2) : 1;
    SegmentSet::Group g{c, static_cast<int>(out.segments.size()), 0};
    for (int64_t b = from; b < cell.end; b += step) {
      out.segments.push_back({b, b + step, c});
      ++g.count;
    }
    out.chains.push_back(g);
    if (cell.end >= T || level == 0) break;
    from = cell.end;
    --level;
    c = grid.cell_at(level, cell.end);
  }
  return out;
}

struct SegmentReport {
  bool ok = true;
  std::string property;
  std::string witness;
};

namespace internal {

inline bool is_power_of(int64_t value, int64_t base, int64_t min_exp) {
  int64_t p = ipow(base, min_exp);
  while (p < value) p = checked_mul(p, base);
  return p == value;
}

inline std::string seg_str(const Segment& s) {
  return "[" + std::to_string(s.beg) + "," + std::to_string(s.end) + ")";
}

}  // namespace internal

// Checks the four structural properties and cross-job nesting on given
// segment sets (segs[j] belongs to inst.jobs[j]).
inline SegmentReport check_segment_properties(const Instance& inst, const Grid& grid,
                                              const std::vector<SegmentSet>& segs) {
  SegmentReport rep;
  auto fail = [&](const std::string& prop, const std::string& w) {
    rep.ok = false;
    rep.property = prop;
    rep.witness = w;
    return rep;
  };
  const int64_t T = grid.T();
  const int64_t K = grid.K();
  for (int j = 0; j < inst.n(); ++j) {
    const Job& job = inst.jobs[j];
    const std::string who = "job " + std::to_string(job.id) + " ";
    const auto& s = segs[j].segments;
    // (1) partition of [r_j, T).
    int64_t at = job.release;
    for (const Segment& seg : s) {
      if (at >= T) break;
      if (seg.beg != at || seg.end <= seg.beg) {
        return fail("partition", who + internal::seg_str(seg));
      }
      at = seg.end;
    }
    if (at < T) return fail("partition", who + "stops at " + std::to_string(at));
    for (const auto& g : segs[j].chains) {
      const Cell c = grid.cell(g.cell);
      const int64_t seg_len = s[g.first].len();
      for (int k = g.first; k < g.first + g.count; ++k) {
        const Segment& seg = s[k];
        if (seg.cell != g.cell) return fail("grouping", who + internal::seg_str(seg));
        // (2) containment and alignment.
        if (seg.beg < c.beg || seg.end > c.end) {
          return fail("containment", who + internal::seg_str(seg));
        }
        if (c.level <= grid.ell_max() - 2) {
          const VertexId sub = grid.cell_at(c.level + 2, seg.beg);
          const Cell sc = grid.cell(sub);
          if (sc.beg != seg.beg || sc.end != seg.end) {
            return fail("alignment", who + internal::seg_str(seg));
          }
        } else if (seg.len() != 1) {
          return fail("alignment", who + internal::seg_str(seg));
        }
        // (3) equal sizes.
        if (seg.len() != seg_len) return fail("equal size", who + internal::seg_str(seg));
      }
      // (3) right alignment and count.
      if (s[g.first + g.count - 1].end != c.end) {
        return fail("right alignment", who + "cell level " + std::to_string(c.level));
      }
      if (g.count > K * K) return fail("segment count", who + std::to_string(g.count));
    }
    // (4) length growth across cells.
    for (size_t a = 0; a < s.size(); ++a) {
      for (size_t b = a + 1; b < s.size(); ++b) {
        if (s[a].cell == s[b].cell) continue;
        const int64_t la = s[a].len(), lb = s[b].len();
        bool good;
        if (la == 1 && lb == 1) {
          good = true;
        } else if (la == 1) {
          good = lb % grid.params().off_y == 0 &&
                 internal::is_power_of(lb / grid.params().off_y, K, 0);
        } else {
          good = lb % la == 0 && internal::is_power_of(lb / la, K, 1);
        }
        if (!good) {
          return fail("length growth",
                      who + internal::seg_str(s[a]) + " then " + internal::seg_str(s[b]));
        }
      }
    }
  }
  // Nesting: a later release has finer segments.
  for (int j = 0; j < inst.n(); ++j) {
    for (int k = 0; k < inst.n(); ++k) {
      if (inst.jobs[j].release > inst.jobs[k].release || j == k) continue;
      for (const Segment& sk : segs[k].segments) {
        if (sk.beg >= T) continue;
        bool inside = false;
        for (const Segment& sj : segs[j].segments) {
          if (sj.beg <= sk.beg && sk.end <= sj.end) {
            inside = true;
            break;
          }
        }
        if (!inside) {
          return fail("nesting", "job " + std::to_string(inst.jobs[k].id) + " " +
                                     internal::seg_str(sk) + " vs job " +
                                     std::to_string(inst.jobs[j].id));
        }
      }
    }
  }
  return rep;
}

inline std::vector<SegmentSet> build_all_segments(const Instance& inst, const Grid& grid) {
  std::vector<SegmentSet> segs;
  for (const Job& j : inst.jobs) segs.push_back(build_segments(grid, j, grid.T()));
  return segs;
}

inline SegmentReport check_segment_properties(const Instance& inst, const Grid& grid) {
  return check_segment_properties(inst, grid, build_all_segments(inst, grid));
}

// Per job, how often F*_j >= len(C*_j) / (eps K) holds over sampled offsets.
struct FlowCellStats {
  int64_t samples = 0;
  std::vector<int64_t> hits;  // indexed by job position

  std::vector<double> frequency() const {
    std::vector<double> f;
    for (int64_t h : hits) f.push_back(samples ? static_cast<double>(h) / samples : 0.0);
    return f;
  }
};

namespace internal {

inline void flow_cell_sample(const Instance& inst, const std::vector<int64_t>& flow,
                             const Grid& grid, FlowCellStats& st) {
  const int64_t T = grid.T();
  for (int j = 0; j < inst.n(); ++j) {
    const SegmentSet s = build_segments(grid, inst.jobs[j], T);
    const int64_t last = inst.jobs[j].release + flow[j] - 1;
    for (const Segment& seg : s.segments) {
      if (seg.beg <= last && last < seg.end) {
        const int64_t len = grid.cell(seg.cell).len();
        if (flow[j] * grid.K() >= len * inst.epsilon_inv) ++st.hits[j];
        break;
      }
    }
  }
  ++st.samples;
}

inline std::vector<int64_t> oracle_flow_times(const Instance& inst) {
  const OptResult opt = opt_schedule(inst);
  const std::vector<int64_t> done = completion_times(inst, opt.schedule);
  std::vector<int64_t> flow(inst.n());
  for (int j = 0; j < inst.n(); ++j) flow[j] = done[j] - inst.jobs[j].release;
  return flow;
}

}  // namespace internal

inline FlowCellStats flow_cell_statistics(const Instance& inst, int64_t epsilon_inv,
                                          int64_t trials, uint64_t seed) {
  FlowCellStats st;
  st.hits.assign(inst.n(), 0);
  if (trials <= 0 || inst.empty()) return st;
  const std::vector<int64_t> flow = internal::oracle_flow_times(inst);
  const int64_t T = horizon(inst);
  const OffsetsDomain d = offsets_domain(epsilon_inv, T);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> xs(d.off_x_min, 0);
  std::uniform_int_distribution<size_t> ys(0, d.off_y.size() - 1);
  for (int64_t i = 0; i < trials; ++i) {
    const int64_t x = xs(rng);
    const int64_t y = d.off_y[ys(rng)];
    internal::flow_cell_sample(inst, flow, Grid(T, make_params(epsilon_inv, T, x, y)), st);
  }
  return st;
}

// Same statistic over the whole offset domain.
inline FlowCellStats flow_cell_statistics_exact(const Instance& inst, int64_t epsilon_inv) {
  FlowCellStats st;
  st.hits.assign(inst.n(), 0);
  if (inst.empty()) return st;
  const std::vector<int64_t> flow = internal::oracle_flow_times(inst);
  const int64_t T = horizon(inst);
  const OffsetsDomain d = offsets_domain(epsilon_inv, T);
  for (int64_t y : d.off_y) {
    for (int64_t x = d.off_x_min; x <= 0; ++x) {
      internal::flow_cell_sample(inst, flow, Grid(T, make_params(epsilon_inv, T, x, y)), st);
    }
  }
  return st;
}

inline nlohmann::json grid_to_json(const Grid& grid, VertexId v = 0) {
  const Cell c = grid.cell(v);
  nlohmann::json node = {{"level", c.level}, {"beg", c.beg}, {"end", c.end}};
  nlohmann::json kids = nlohmann::json::array();
  if (!grid.is_leaf(v)) {
    const VertexId first = grid.first_child(v);
    for (int64_t i = 0; i < grid.K(); ++i) kids.push_back(grid_to_json(grid, first + i));
  }
  node["children"] = kids;
  return node;
}

}  // namespace flowtime

#endif  // FLOWTIME_GRID_HPP_
