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


#include <gtest/gtest.h>

#include "flowtime/poly.hpp"
#include "test_support.hpp"

namespace flowtime {
namespace {

using testing::fixture;
using testing::geometry_at;

VertexId vid(const Geometry& g, int level, int64_t beg) { return g.grid.cell_at(level, beg); }

TEST(Smooth, AllZero) {
  const Geometry g = geometry_at(fixture(), 0);
  const CellBudgets cb = smooth_budgets(g, {});
  for (const auto& [v, r] : cb.round) {
    EXPECT_EQ(r, 0);
    EXPECT_EQ(cb.add.at(v), 0);
  }
  EXPECT_EQ(cb.sum_round, 0);
}

TEST(Smooth, RootDonatesToChildren) {
  const Instance inst = Instance::make({{0, 0, 5, 1}, {1, 2, 3, 2}, {2, 9, 1, 4}}, 1);
  const Geometry g = geometry_at(inst, 0);
  const CellBudgets cb = smooth_budgets(g, {{g.grid.root(), 64}});
  for (const auto& [v, p] : cb.prime) {
    if (v != g.grid.root() && g.grid.parent(v) == g.grid.root()) {
      EXPECT_EQ(p, Rational(32));
    }
  }
  EXPECT_THROW(smooth_budgets(g, {{g.grid.num_vertices() - 1, 1}}), Error);
}

TEST(Smooth, FixtureGolden) {
  const Geometry g = geometry_at(fixture(), 0);
  const Selection opt = ip2_opt(g).selection;
  const CellBudgets cb = smooth_budgets(g, cell_spend(g, opt));
  EXPECT_EQ(cb.prime.at(vid(g, 3, 0)), Rational(7, 2));
  EXPECT_EQ(cb.round.at(vid(g, 3, 0)), 4);
  EXPECT_EQ(cb.add.at(vid(g, 3, 0)), 2);
  EXPECT_EQ(cb.prime.at(vid(g, 4, 0)), Rational(11, 4));
  EXPECT_EQ(cb.add.at(vid(g, 4, 0)), 3);
  EXPECT_EQ(cb.round.at(vid(g, 3, 2)), 2);
  EXPECT_EQ(cb.sum_opt, 8);
  EXPECT_EQ(cb.sum_round, 20);
  const BudgetCheck bc = check_cell_budgets(g, cb);
  EXPECT_TRUE(bc.round_ge_opt);
  EXPECT_FALSE(bc.sums_apply);
  EXPECT_TRUE(bc.ok());
}

TEST(Smooth, BoundsOnCorpus) {
  for (const Instance& inst : testing::random_corpus(15, 71, 6, 4, 6, 5, 2)) {
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const CellBudgets cb = smooth_budgets(g, cell_spend(g, ip2_opt(g).selection));
      const BudgetCheck bc = check_cell_budgets(g, cb);
      EXPECT_TRUE(bc.sums_apply);
      EXPECT_TRUE(bc.ok()) << bc.witness << "\n" << dump_instance(inst);
    });
  }
}

TEST(Split, Thresholds) {
  const Geometry g = geometry_at(fixture(), 0);
  EXPECT_EQ(split_delta(g), Rational(1, 256));
  // No budget anywhere: every chain is large.
  const SmallLargeSplit none = split_small_large(g, smooth_budgets(g, {}));
  for (char l : none.large) EXPECT_TRUE(l);
  CellBudgets huge = smooth_budgets(g, {});
  for (auto& [v, r] : huge.round) r = Rational(1000000);
  const SmallLargeSplit all_small = split_small_large(g, huge);
  for (char l : all_small.large) EXPECT_FALSE(l);
  const std::vector<char> mask = large_rect_mask(g, none);
  EXPECT_EQ(std::count(mask.begin(), mask.end(), 1), static_cast<long>(g.rects.size()));
}

TEST(Split, FixtureAllLarge) {
  const Geometry g = geometry_at(fixture(), 0);
  const PolyResult r = build_poly_solution(g, ip2_opt(g).selection);
  for (char l : r.split.large) EXPECT_TRUE(l);
  EXPECT_TRUE(r.small.rects.empty());
}

TEST(Increase, SinglePairIsCaseOne) {
  int seen = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const Instance inst = testing::wide_weights(seed, 5, 3, 4, 6, 1);
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const TypeTable tt = build_types(g);
      const Selection opt = ip2_opt(g).selection;
      const CellBudgets cb = smooth_budgets(g, cell_spend(g, opt));
      const SmallLargeSplit sp = split_small_large(g, cb);
      const SmallTables st = small_tables(g, tt, sp, opt);
      for (const auto& [key, prs] : st.pairs) {
        const auto [cell, s] = key;
        if (prs.size() != 1 || cb.add_split(cell) <= 0) continue;
        const IncreaseResult r = greedy_increase(g, tt, cb, sp, st, cell, s);
        for (int k = 1; k <= s; ++k) {
          EXPECT_EQ(r.cases.at(prs[0])[k], 1);
          EXPECT_EQ(r.gamma[k], DensityPair::top());
        }
        ++seen;
      }
    });
  }
  EXPECT_GT(seen, 0);
}

TEST(Increase, NoSmallChains) {
  const Geometry g = geometry_at(fixture(), 0);
  const TypeTable tt = build_types(g);
  const CellBudgets cb = smooth_budgets(g, {});
  const SmallLargeSplit sp = split_small_large(g, cb);
  const SmallTables st;
  const IncreaseResult r = greedy_increase(g, tt, cb, sp, st, vid(g, 2, 0), 2);
  EXPECT_TRUE(r.rects.empty());
  EXPECT_EQ(r.gamma[1], DensityPair::top());
  EXPECT_EQ(gamma_at(st, vid(g, 2, 0), 2, 1), DensityPair::top());
}

TEST(Round, SingleBoundaryPair) {
  const Geometry g = geometry_at(fixture(), 0);
  const Selection opt = ip2_opt(g).selection;
  const CellBudgets cb = smooth_budgets(g, cell_spend(g, opt));
  const VertexId c = vid(g, 2, 0);
  const DensityPair p{Density::of(0), Density::of(-1)};
  const RectType tau{p.rho, p.rho2, 2};
  SmallTables st;
  st.pairs[{c, 2}] = {p};
  st.gamma[{c, 2, 1}] = p;
  st.gamma[{c, 2, 2}] = p;
  st.opt[{c, tau, 1}] = 3;
  const RoundCheck chk = round_small_budgets(g, cb, st);
  EXPECT_TRUE(chk.ok()) << chk.witness;
  const Rational geo(1, 4 * 256);
  const Rational base(5, 4);
  ASSERT_EQ(cb.round_at(c), 4);
  EXPECT_EQ(sm_round_at(st, c, tau, 1), round_up_power(base, geo * 4 + 3));
  EXPECT_EQ(sm_round_at(st, c, tau, 1), Rational(3125, 1024));
  // Zero opt: only the geometric term is left.
  EXPECT_EQ(sm_round_at(st, c, tau, 2), round_up_power(base, geo * 4));
}

TEST(Round, ClaimsOnWideCorpus) {
  int pairs = 0;
  for (uint64_t seed = 1; seed <= 15; ++seed) {
    const Instance inst = testing::wide_weights(seed, 5, 3, 4, 6, 1);
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const PolyResult r = build_poly_solution(g, ip2_opt(g).selection);
      EXPECT_TRUE(r.checks.rounding.ok()) << r.checks.rounding.witness;
      for (const auto& [key, v] : r.small_tables.round) {
        EXPECT_GE(v, Rational(sm_opt_at(r.small_tables, key.cell, key.type, key.s_prime)));
        ++pairs;
      }
    });
  }
  EXPECT_GT(pairs, 0);
}

TEST(Helpers, RectOverBottomCell) {
  const Geometry g = geometry_at(fixture(), 0);
  // Chain of length 2 in [0,4) covers [2,3) and [3,4).
  EXPECT_EQ(rect_over(g, vid(g, 2, 0), 2, vid(g, 4, 2)), 1);
  EXPECT_EQ(rect_over(g, vid(g, 2, 0), 2, vid(g, 4, 3)), 2);
  EXPECT_EQ(rect_over(g, vid(g, 2, 0), 2, vid(g, 4, 0)), 0);
  EXPECT_EQ(h_exponent(g), 7);
}

TEST(Large, PbarClasses) {
  const Geometry g = geometry_at(fixture(), 0);
  const PolyResult r = build_poly_solution(g, ip2_opt(g).selection);
  ASSERT_EQ(r.large.pbar_exp.size(), 2u);
  EXPECT_EQ(r.large.pbar_exp[0], 1);
  EXPECT_EQ(r.large.pbar_exp[1], 0);
  EXPECT_EQ(group_of(RectType{Density::of(3), Density::of(1), 2}),
            group_of(RectType{Density::of(5), Density::of(3), 2}));
  EXPECT_NE(group_of(RectType{Density::of(3), Density::inf(), 1}),
            group_of(RectType{Density::of(3), Density::of(3), 1}));
}

TEST(Build, FixtureGolden) {
  const Geometry g = geometry_at(fixture(), 0);
  const PolyResult r = build_poly_solution(g, ip2_opt(g).selection);
  EXPECT_TRUE(r.checks.ok());
  EXPECT_EQ(r.reference_cost, 8);
  EXPECT_EQ(r.cost, 8);
  EXPECT_EQ(r.large_cost, 8);
  EXPECT_EQ(r.global, (RectSet{0, 1, 2, 4}));
  EXPECT_EQ(r.total_bound, Rational(23 * 8));
  EXPECT_EQ(poly_constant(Rational(1, 2)), Rational(35, 2));
  const nlohmann::json j = poly_tables_json(g, r);
  EXPECT_EQ(j["cellBudgets"].size(), 7u);
  EXPECT_EQ(j["split"].size(), 5u);
  EXPECT_TRUE(j["gamma"].empty());
}

void check_corpus(const std::vector<Instance>& corpus, int* small, int* large, int* drops,
                  int* small_drops = nullptr) {
  for (const Instance& inst : corpus) {
    testing::for_each_offset(inst, [&](const Geometry& g) {
      const Selection opt = ip2_opt(g).selection;
      const PolyResult r = build_poly_solution(g, opt);
      const PolyChecks& c = r.checks;
      EXPECT_TRUE(c.ok()) << "budgets " << c.budgets.ok() << " round " << c.rounding.ok()
                          << " small " << c.small_cost << " large " << c.large_cost
                          << " total " << c.total_cost << " spaths " << c.small_paths.witness
                          << " lpaths " << c.large_paths.witness << "\n"
                          << dump_instance(inst);
      *small += !r.small.rects.empty();
      *large += !r.large.rects.empty();
      for (const auto& [v, s] : r.large_paths) {
        if (s.size() < restrict_to_path(g, r.large.rects, v).size()) ++*drops;
      }
      if (small_drops == nullptr) return;
      for (const auto& [v, s] : r.small_paths) {
        if (s.size() < restrict_to_path(g, r.small.rects, v).size()) ++*small_drops;
      }
    });
  }
}

TEST(Build, ChecksOnUniformCorpus) {
  int small = 0, large = 0, drops = 0;
  check_corpus(testing::random_corpus(12, 81, 6, 3, 6, 5, 1), &small, &large, &drops);
  check_corpus(testing::random_corpus(8, 82, 5, 3, 6, 4, 2), &small, &large, &drops);
  EXPECT_GT(large, 0);
}

TEST(Build, ChecksOnWideCorpus) {
  int small = 0, large = 0, drops = 0, small_drops = 0;
  std::vector<Instance> corpus;
  for (uint64_t seed = 100; seed < 140; ++seed) {
    corpus.push_back(testing::wide_weights(seed, 5, 3, 4, 5, 1));
  }
  check_corpus(corpus, &small, &large, &drops, &small_drops);
  EXPECT_GT(small, 0);
  EXPECT_GT(large, 0);
  EXPECT_GT(drops, 0);
  EXPECT_GT(small_drops, 0);
}

}  // namespace
}  // namespace flowtime
