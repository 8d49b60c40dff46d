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

// Exact optimal schedules, the time-indexed integer program and the
// translations between the two.

#ifndef FLOWTIME_ORACLE_HPP_
#define FLOWTIME_ORACLE_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowtime/common.hpp"
#include "flowtime/instance.hpp"
#include "json.hpp"

namespace flowtime {

// slots[t] is the id of the job run in [t, t+1), or empty for idle.
struct Schedule {
  std::vector<std::optional<int64_t>> slots;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct OracleGuard {
  int64_t max_n = 8;
  int64_t max_T = 24;

  // FLOWTIME_ORACLE_GUARD="N,T" overrides the defaults.
  static OracleGuard from_env() {
    OracleGuard g;
    const char* env = std::getenv("FLOWTIME_ORACLE_GUARD");
    if (env == nullptr) return g;
    std::string s(env);
    const auto comma = s.find(',');
    try {
      if (comma == std::string::npos) {
        g.max_n = g.max_T = std::stoll(s);
      } else {
        g.max_n = std::stoll(s.substr(0, comma));
        g.max_T = std::stoll(s.substr(comma + 1));
      }
    } catch (const std::exception&) {
      throw Error("malformed FLOWTIME_ORACLE_GUARD");
    }
    return g;
  }
};

// Completion time per job index; throws on an invalid schedule.
inline std::vector<int64_t> completion_times(const Instance& inst,
                                             const Schedule& sched) {
  std::vector<int64_t> done(inst.n(), 0), count(inst.n(), 0);
  for (size_t t = 0; t < sched.slots.size(); ++t) {
    if (!sched.slots[t]) continue;
    const int j = inst.index_of_id(*sched.slots[t]);
    if (j < 0) throw Error("schedule names unknown job " +
                           std::to_string(*sched.slots[t]));
    if (static_cast<int64_t>(t) < inst.jobs[j].release) {
      throw Error("job " + std::to_string(inst.jobs[j].id) +
                  " runs before its release");
    }
    ++count[j];
    done[j] = static_cast<int64_t>(t) + 1;
  }
  for (int j = 0; j < inst.n(); ++j) {
    if (count[j] != inst.jobs[j].proc) {
      throw Error("job " + std::to_string(inst.jobs[j].id) +
                  " receives wrong slot count");
    }
  }
  return done;
}

inline int64_t schedule_cost(const Instance& inst, const Schedule& sched) {
  const std::vector<int64_t> done = completion_times(inst, sched);
  int64_t cost = 0;
  for (int j = 0; j < inst.n(); ++j) {
    cost += inst.jobs[j].weight * (done[j] - inst.jobs[j].release);
  }
  return cost;
}

struct OptResult {
  int64_t cost = 0;
  Schedule schedule;
};

namespace internal {

class OptSearch {
 public:
  explicit OptSearch(const Instance& inst) : inst_(inst) {
    radix_.resize(inst.n());
    uint64_t r = 1;
    for (int j = 0; j < inst.n(); ++j) {
      radix_[j] = r;
      r *= static_cast<uint64_t>(inst.jobs[j].proc + 1);
    }
    span_ = r;
  }

  OptResult run() {
    std::vector<int64_t> rem(inst_.n());
    for (int j = 0; j < inst_.n(); ++j) rem[j] = inst_.jobs[j].proc;
    OptResult res;
    res.cost = solve(0, rem);
    // Walk the memo to rebuild the slot sequence.
    int64_t t = 0;
    while (true) {
      const auto it = memo_.find(key(t, rem));
      if (it == memo_.end() || it->second.choice == kDone) break;
      if (it->second.choice == kIdle) {
        const int64_t next = next_release(t, rem);
        while (t < next) {
          res.schedule.slots.push_back(std::nullopt);
          ++t;
        }
        continue;
      }
      const int j = it->second.choice;
      res.schedule.slots.push_back(inst_.jobs[j].id);
      --rem[j];
      ++t;
    }
    return res;
  }

 private:
  static constexpr int kDone = -2;
  static constexpr int kIdle = -1;
  struct Entry {
    int64_t value;
    int choice;
  };

  uint64_t key(int64_t t, const std::vector<int64_t>& rem) const {
    uint64_t k = static_cast<uint64_t>(t) * span_;
    for (size_t j = 0; j < rem.size(); ++j) {
      k += static_cast<uint64_t>(rem[j]) * radix_[j];
    }
    return k;
  }

  int64_t next_release(int64_t t, const std::vector<int64_t>& rem) const {
    int64_t next = -1;
    for (int j = 0; j < inst_.n(); ++j) {
      if (rem[j] > 0 && inst_.jobs[j].release > t &&
          (next < 0 || inst_.jobs[j].release < next)) {
        next = inst_.jobs[j].release;
      }
    }
    return next;
  }

  int64_t solve(int64_t t, std::vector<int64_t>& rem) {
    const uint64_t k = key(t, rem);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second.value;
    int64_t alive_weight = 0;
    bool any_left = false;
    for (int j = 0; j < inst_.n(); ++j) {
      if (rem[j] == 0) continue;
      any_left = true;
      if (inst_.jobs[j].release <= t) alive_weight += inst_.jobs[j].weight;
    }
    Entry e{0, kDone};
    if (any_left && alive_weight == 0) {
      e.choice = kIdle;
      e.value = solve(next_release(t, rem), rem);
    } else if (any_left) {
      e.value = -1;
      for (int j = 0; j < inst_.n(); ++j) {
        if (rem[j] == 0 || inst_.jobs[j].release > t) continue;
        --rem[j];
        const int64_t v = alive_weight + solve(t + 1, rem);
        ++rem[j];
        if (e.value < 0 || v < e.value) {
          e.value = v;
          e.choice = j;
        }
      }
    }
    memo_.emplace(k, e);
    return e.value;
  }

  const Instance& inst_;
  std::vector<uint64_t> radix_;
  uint64_t span_ = 1;
  std::unordered_map<uint64_t, Entry> memo_;
};

}  // namespace internal

inline OptResult opt_schedule(const Instance& inst,
                              const OracleGuard& guard = OracleGuard::from_env()) {
  if (inst.empty()) return {};
  if (inst.n() > guard.max_n || horizon(inst) > guard.max_T) {
    throw GuardError("instance too large for oracle");
  }
  return internal::OptSearch(inst).run();
}

// x[j][t - r_j] for t in r_j..T.
struct IpSolution {
  std::vector<std::vector<uint8_t>> x;

  static IpSolution from_finish(const Instance& inst,
                                const std::vector<int64_t>& finish) {
    const int64_t T = horizon(inst);
    IpSolution sol;
    sol.x.resize(inst.n());
    for (int j = 0; j < inst.n(); ++j) {
      const int64_t r = inst.jobs[j].release;
      sol.x[j].assign(T - r + 1, 0);
      for (int64_t t = r; t <= T; ++t) sol.x[j][t - r] = t < finish[j] ? 1 : 0;
    }
    return sol;
  }

  friend bool operator==(const IpSolution&, const IpSolution&) = default;
};

inline void require_monotone(const Instance& inst, const IpSolution& x) {
  if (static_cast<int>(x.x.size()) != inst.n()) throw Error("IP size mismatch");
  for (int j = 0; j < inst.n(); ++j) {
    const int64_t r = inst.jobs[j].release;
    for (size_t i = 1; i + 1 < x.x[j].size(); ++i) {
      if (x.x[j][i] < x.x[j][i + 1]) {
        throw Error("prefix violation at (" + std::to_string(inst.jobs[j].id) +
                    "," + std::to_string(r + static_cast<int64_t>(i) + 1) + ")");
      }
    }
  }
}

// d_j = 1 + last t with x = 1, or r_j when x is all zero.
inline std::vector<int64_t> ip_finish(const Instance& inst, const IpSolution& x) {
  std::vector<int64_t> d(inst.n());
  for (int j = 0; j < inst.n(); ++j) {
    d[j] = inst.jobs[j].release;
    for (size_t i = 0; i < x.x[j].size(); ++i) {
      if (x.x[j][i]) d[j] = inst.jobs[j].release + static_cast<int64_t>(i) + 1;
    }
  }
  return d;
}

inline IpSolution ip_from_schedule(const Instance& inst, const Schedule& sched) {
  return IpSolution::from_finish(inst, completion_times(inst, sched));
}

struct IpReport {
  bool feasible = true;
  int64_t s = 0;
  int64_t t = 0;

  std::string message() const {
    if (feasible) return "feasible";
    return "constraint violated at (s=" + std::to_string(s) +
           ",t=" + std::to_string(t) + ")";
  }
};

// Start points of the constraint family: release dates and 0.
inline std::vector<int64_t> constraint_starts(const Instance& inst) {
  std::vector<int64_t> s{0};
  for (const Job& j : inst.jobs) s.push_back(j.release);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline IpReport ip_check(const Instance& inst, const IpSolution& x) {
  require_monotone(inst, x);
  IpReport rep;
  if (inst.empty()) return rep;
  const int64_t T = horizon(inst);
  for (int64_t s : constraint_starts(inst)) {
    for (int64_t t = s; t <= T; ++t) {
      int64_t lhs = 0, total = 0;
      for (int j = 0; j < inst.n(); ++j) {
        const Job& job = inst.jobs[j];
        if (job.release < s || job.release > t) continue;
        total += job.proc;
        if (x.x[j][t - job.release]) lhs += job.proc;
      }
      if (lhs < total - (t - s)) {
        rep.feasible = false;
        rep.s = s;
        rep.t = t;
        return rep;
      }
    }
  }
  return rep;
}

inline int64_t ip_cost(const Instance& inst, const IpSolution& x) {
  int64_t cost = 0;
  for (int j = 0; j < inst.n(); ++j) {
    for (uint8_t v : x.x[j]) cost += v ? inst.jobs[j].weight : 0;
  }
  return cost;
}

inline Schedule schedule_from_ip(const Instance& inst, const IpSolution& x) {
  require_monotone(inst, x);
  const std::vector<int64_t> d = ip_finish(inst, x);
  std::vector<int64_t> rem(inst.n());
  int64_t left = 0;
  for (int j = 0; j < inst.n(); ++j) {
    rem[j] = inst.jobs[j].proc;
    left += rem[j];
  }
  Schedule sched;
  for (int64_t t = 0; left > 0; ++t) {
    int pick = -1;
    for (int j = 0; j < inst.n(); ++j) {
      if (rem[j] == 0 || inst.jobs[j].release > t) continue;
      if (pick < 0 || d[j] < d[pick]) pick = j;
    }
    if (pick < 0) {
      sched.slots.push_back(std::nullopt);
      continue;
    }
    sched.slots.push_back(inst.jobs[pick].id);
    --left;
    if (--rem[pick] == 0 && t + 1 > d[pick]) {
      throw Error("IP feasibility witness failed");
    }
  }
  return sched;
}

inline nlohmann::json schedule_to_json(const Schedule& s) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& v : s.slots) {
    if (v) {
      slots.push_back(*v);
    } else {
      slots.push_back(nullptr);
    }
  }
  return {{"slots", slots}};
}

inline Schedule schedule_from_json(const nlohmann::json& doc) {
  Schedule s;
  for (const auto& v : doc.at("slots")) {
    if (v.is_null()) {
      s.slots.push_back(std::nullopt);
    } else {
      s.slots.push_back(v.get<int64_t>());
    }
  }
  return s;
}

// Finish times are listed in job-id order.
inline nlohmann::json ip_to_json(const Instance& inst, const IpSolution& x) {
  const std::vector<int64_t> d = ip_finish(inst, x);
  std::vector<std::pair<int64_t, int64_t>> by_id;
  for (int j = 0; j < inst.n(); ++j) by_id.push_back({inst.jobs[j].id, d[j]});
  std::sort(by_id.begin(), by_id.end());
  nlohmann::json finish = nlohmann::json::array();
  for (const auto& [id, dj] : by_id) finish.push_back(dj);
  return {{"finish", finish}};
}

inline IpSolution ip_from_json(const Instance& inst, const nlohmann::json& doc) {
  const auto& f = doc.at("finish");
  if (static_cast<int>(f.size()) != inst.n()) throw Error("finish size mismatch");
  std::vector<std::pair<int64_t, int>> ids;
  for (int j = 0; j < inst.n(); ++j) ids.push_back({inst.jobs[j].id, j});
  std::sort(ids.begin(), ids.end());
  std::vector<int64_t> finish(inst.n());
  for (size_t k = 0; k < ids.size(); ++k) finish[ids[k].second] = f[k].get<int64_t>();
  return IpSolution::from_finish(inst, finish);
}

}  // namespace flowtime

#endif  // FLOWTIME_ORACLE_HPP_
