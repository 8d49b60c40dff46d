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


// Walks the two-job fixture through every stage and prints what each one
// produces. Reads an instance file when given one.

#include <fstream>
#include <iostream>

#include "flowtime/pipeline.hpp"

using namespace flowtime;

int main(int argc, char** argv) {
  Instance inst = Instance::make({{0, 0, 2, 1}, {1, 1, 1, 2}}, 1);
  if (argc > 1) {
    std::ifstream in(argv[1]);
    inst = instance_from_json(nlohmann::json::parse(in));
  }
  const int64_t T = horizon(inst);
  std::cout << "jobs " << inst.n() << ", T = " << T << "\n";

  const OptResult opt = opt_schedule(inst);
  std::cout << "optimal weighted completion time " << opt.cost << "\n";

  const Geometry g = build_geometry(inst, build_grid(T, make_params(inst.epsilon_inv, T, 0, 1)));
  std::cout << "K = " << g.grid.K() << ", levels 0.." << g.grid.ell_max() << ", "
            << g.rects.size() << " rects, " << g.rays.size() << " rays\n";
  for (const Rect& r : g.rects) {
    std::cout << "  job " << inst.jobs[r.job].id << " [" << r.beg << "," << r.end
              << ") cap " << r.cap << " cost " << r.cost << "\n";
  }

  const Ip2Result ip2 = ip2_opt(g);
  std::cout << "covering optimum " << ip2.cost << " with " << ip2.selection.size() << " rects\n";

  const QpolyResult q = build_qpoly_solution(g, ip2.selection);
  std::cout << "greedy per type: cost " << q.cost << "\n";
  const PolyResult p = build_poly_solution(g, ip2.selection);
  std::cout << "small/large split: cost " << p.cost << " (small " << p.small_cost << ", large "
            << p.large_cost << "), checks " << (p.checks.ok() ? "ok" : "failed") << "\n";

  for (SolveMode mode : {SolveMode::kQpoly, SolveMode::kPoly}) {
    const RunReport rep = solve(inst, mode, default_offsets(T));
    std::cout << mode_name(mode) << ": best schedule cost " << rep.cost << " over "
              << rep.runs.size() << " offsets\n";
  }
  return 0;
}
