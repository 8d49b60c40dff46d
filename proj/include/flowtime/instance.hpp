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

// Jobs, instances and the preprocessing steps applied before the grid
// reduction.

#ifndef FLOWTIME_INSTANCE_HPP_
#define FLOWTIME_INSTANCE_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "flowtime/common.hpp"
#include "json.hpp"

namespace flowtime {

struct Job {
  int64_t id = 0;
  int64_t release = 0;
  int64_t proc = 1;
  int64_t weight = 1;

  friend bool operator==(const Job&, const Job&) = default;
};

// The order used for rows: release first, then id.
inline bool precedes(const Job& a, const Job& b) {
  if (a.release != b.release) return a.release < b.release;
  return a.id < b.id;
}

// Jobs are kept sorted under `precedes`; jobs[i] has label i + 1.
struct Instance {
  int64_t epsilon_inv = 1;
  std::vector<Job> jobs;

  static Instance make(std::vector<Job> jobs, int64_t epsilon_inv = 1) {
    if (epsilon_inv < 1) throw Error("epsilon_inv must be positive");
    for (const Job& j : jobs) {
      if (j.release < 0) throw Error("negative release");
      if (j.proc < 1) throw Error("processing time must be positive");
      if (j.weight < 1) throw Error("weight must be positive");
    }
    std::sort(jobs.begin(), jobs.end(), precedes);
    for (size_t i = 1; i < jobs.size(); ++i) {
      if (jobs[i].id == jobs[i - 1].id) throw Error("duplicate job id");
    }
    Instance inst;
    inst.epsilon_inv = epsilon_inv;
    inst.jobs = std::move(jobs);
    return inst;
  }

  int n() const { return static_cast<int>(jobs.size()); }
  bool empty() const { return jobs.empty(); }

  // Position under the order, or -1.
  int index_of_id(int64_t id) const {
    for (int i = 0; i < n(); ++i) {
      if (jobs[i].id == id) return i;
    }
    return -1;
  }

  friend bool operator==(const Instance&, const Instance&) = default;
};

inline int64_t horizon(const Instance& inst) {
  if (inst.empty()) throw Error("empty instance");
  int64_t max_r = 0;
  int64_t sum_p = 0;
  for (const Job& j : inst.jobs) {
    max_r = std::max(max_r, j.release);
    sum_p = checked_add(sum_p, j.proc);
  }
  return checked_add(max_r, sum_p);
}

inline Rational proc_ratio(const Instance& inst) {
  if (inst.empty()) throw Error("empty instance");
  int64_t lo = inst.jobs[0].proc, hi = lo;
  for (const Job& j : inst.jobs) {
    lo = std::min(lo, j.proc);
    hi = std::max(hi, j.proc);
  }
  return Rational(hi, lo);
}

inline Instance shift_releases(const Instance& inst) {
  if (inst.empty()) return inst;
  int64_t lo = inst.jobs[0].release;
  for (const Job& j : inst.jobs) lo = std::min(lo, j.release);
  Instance out = inst;
  for (Job& j : out.jobs) j.release -= lo;
  return out;
}

struct IdlePart {
  Instance instance;  // releases shifted to start at 0
  int64_t offset = 0;  // amount subtracted from the original releases
};

// Splits at every point t* where the jobs released before t* can all be
// finished by t* and no job is released in [previous work end, t*).
inline std::vector<IdlePart> split_at_idle(const Instance& inst) {
  std::vector<IdlePart> parts;
  if (inst.empty()) return parts;
  std::vector<Job> current;
  int64_t busy_until = 0;
  auto flush = [&]() {
    if (current.empty()) return;
    Instance part = Instance::make(current, inst.epsilon_inv);
    const int64_t offset = part.jobs.front().release;
    parts.push_back({shift_releases(part), offset});
    current.clear();
  };
  for (const Job& j : inst.jobs) {
    if (!current.empty() && busy_until <= j.release) flush();
    busy_until = std::max(busy_until, j.release) + j.proc;
    current.push_back(j);
  }
  flush();
  return parts;
}

struct NormalizedInstance {
  Instance instance;
  std::vector<Job> dropped;
};

// Scales weights so the largest equals `target_max`, drops jobs whose scaled
// weight is below 1/eps and rounds the rest up.
inline NormalizedInstance scale_weights_to(const Instance& inst,
                                           const Rational& target_max) {
  NormalizedInstance out;
  out.instance.epsilon_inv = inst.epsilon_inv;
  if (inst.empty()) return out;
  int64_t max_w = 0;
  for (const Job& j : inst.jobs) max_w = std::max(max_w, j.weight);
  const Rational factor = target_max / max_w;
  const Rational threshold(inst.epsilon_inv);
  std::vector<Job> kept;
  for (const Job& j : inst.jobs) {
    const Rational scaled = factor * j.weight;
    if (scaled < threshold) {
      out.dropped.push_back(j);
      continue;
    }
    Job k = j;
    BigInt up = boost::multiprecision::numerator(scaled) /
                boost::multiprecision::denominator(scaled);
    if (Rational(up) < scaled) ++up;
    k.weight = static_cast<int64_t>(up);
    kept.push_back(k);
  }
  out.instance = Instance::make(std::move(kept), inst.epsilon_inv);
  return out;
}

inline NormalizedInstance normalize_weights(const Instance& inst,
                                            int64_t dummy_weight = 1) {
  if (inst.empty()) return {inst, {}};
  const int64_t e = inst.epsilon_inv;
  const int64_t n = inst.n();
  const Rational target = Rational(4 * e * e) * n * n * proc_ratio(inst);
  NormalizedInstance out = scale_weights_to(inst, target);
  int64_t min_p = 0;
  int64_t next_id = 0;
  for (const Job& j : inst.jobs) {
    min_p = min_p == 0 ? j.proc : std::min(min_p, j.proc);
    next_id = std::max(next_id, j.id + 1);
  }
  if (min_p > 1) {
    std::vector<Job> jobs = out.instance.jobs;
    jobs.push_back({next_id, 0, 1, dummy_weight});
    out.instance = Instance::make(std::move(jobs), e);
  }
  return out;
}

inline Instance gen_random(uint64_t seed, int n, int64_t pmax, int64_t wmax,
                           int64_t rmax, int64_t epsilon_inv = 1) {
  if (n < 1 || pmax < 1 || wmax < 1 || rmax < 0 || epsilon_inv < 1) {
    throw Error("invalid generator bounds");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> rd(0, rmax), pd(1, pmax), wd(1, wmax);
  std::vector<Job> jobs;
  for (int i = 0; i < n; ++i) {
    Job j;
    j.id = i;
    j.release = rd(rng);
    j.proc = pd(rng);
    j.weight = wd(rng);
    jobs.push_back(j);
  }
  return shift_releases(Instance::make(std::move(jobs), epsilon_inv));
}

inline nlohmann::json instance_to_json(const Instance& inst) {
  std::vector<Job> by_id = inst.jobs;
  std::sort(by_id.begin(), by_id.end(),
            [](const Job& a, const Job& b) { return a.id < b.id; });
  nlohmann::json jobs = nlohmann::json::array();
  for (const Job& j : by_id) {
    jobs.push_back({{"r", j.release}, {"p", j.proc}, {"w", j.weight}});
  }
  return {{"epsilon_inv", inst.epsilon_inv}, {"jobs", jobs}};
}

// Ids are positions in the file, so a round trip requires ids 0..n-1.
inline Instance instance_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("jobs")) {
    throw Error("instance JSON needs a jobs array");
  }
  const int64_t e = doc.value("epsilon_inv", int64_t{1});
  std::vector<Job> jobs;
  int64_t id = 0;
  for (const auto& item : doc.at("jobs")) {
    Job j;
    j.id = id++;
    j.release = item.at("r").get<int64_t>();
    j.proc = item.at("p").get<int64_t>();
    j.weight = item.at("w").get<int64_t>();
    jobs.push_back(j);
  }
  return Instance::make(std::move(jobs), e);
}

inline std::string dump_instance(const Instance& inst) {
  return instance_to_json(inst).dump() + "\n";
}

}  // namespace flowtime

#endif  // FLOWTIME_INSTANCE_HPP_
