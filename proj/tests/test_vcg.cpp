/*
 * Copyright 2026 The jointad Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <vector>

#include "jointad/market.hpp"
#include "jointad/outcome.hpp"
#include "jointad/vcg.hpp"

namespace {

using namespace jointad;

// Exhaustive search over partial slot-to-bundle matchings restricted to
// `allowed`.
double best_matching(const AuctionInstance &inst, const std::vector<bool> &allowed) {
  std::vector<bool> used(inst.bundles(), false);
  std::function<double(int)> go = [&](int k) -> double {
    if (k == inst.slots()) return 0.0;
    double best = go(k + 1);
    for (int e = 0; e < inst.bundles(); ++e) {
      if (used[e] || !allowed[e]) continue;
      used[e] = true;
      best = std::max(best, inst.ctrs[k] * stacked_bid(inst, e) + go(k + 1));
      used[e] = false;
    }
    return best;
  };
  return go(0);
}

// Clarke payment recomputed from the exhaustive oracle.
double oracle_payment(const AuctionInstance &inst, BidderId id, bool clamp) {
  const SlotAssignment a = vcg_allocate(inst);
  std::vector<bool> allowed(inst.bundles(), true);
  double own = 0.0;
  for (int e : inst.graph.incident_bundles(id)) {
    allowed[e] = false;
    if (a.slot_of_bundle[e] >= 0) own += inst.ctrs[a.slot_of_bundle[e]] * inst.value(id);
  }
  if (own <= 0.0) return 0.0;
  const double p = best_matching(inst, allowed) - (best_matching(inst, std::vector<bool>(inst.bundles(), true)) - own);
  return clamp ? std::max(0.0, p) : p;
}

TEST(VcgAllocate, Examples) {
  AuctionInstance two{MarketGraph::disjoint_pairs(), {0.9, 0.3, 0.8, 0.4}, {1.0}, 0.0};
  EXPECT_EQ(vcg_allocate(two).bundle_of_slot[0], 0);
  AuctionInstance fewer{MarketGraph::disjoint_pairs(), {0.9, 0.3, 0.8, 0.4}, {1.0, 0.6, 0.2}, 0.0};
  const auto a = vcg_allocate(fewer);
  EXPECT_EQ(a.bundle_of_slot, (std::vector<int>{0, 1, -1}));
  EXPECT_NEAR(a.welfare, 1.7 + 0.6 * 0.7, 1e-12);
  AuctionInstance tie{MarketGraph::disjoint_pairs(), {0.5, 0.5, 0.5, 0.5}, {1.0}, 0.0};
  EXPECT_EQ(vcg_allocate(tie).bundle_of_slot[0], 0);
}

TEST(VcgPrice, Examples) {
  AuctionInstance two{MarketGraph::disjoint_pairs(), {0.9, 0.3, 0.8, 0.4}, {1.0}, 0.0};
  const auto o = vcg_price(two);
  EXPECT_EQ(o.payment(0, Side::Retailer), 0.0);
  EXPECT_EQ(o.payment(0, Side::Supplier), 0.0);
  const auto raw = vcg_price(two, false);
  EXPECT_NEAR(raw.payment(0, Side::Retailer), -0.1, 1e-12);
  EXPECT_NEAR(raw.payment(0, Side::Supplier), -0.2, 1e-12);

  AuctionInstance shared{MarketGraph::shared_supplier(), {0.9, 0.5, 0.6}, {1.0}, 0.0};
  const auto s = vcg_price(shared);
  EXPECT_EQ(s.payment(0, Side::Supplier), 0.0);
  EXPECT_NEAR(s.payment(0, Side::Retailer), 0.5, 1e-12);

  AuctionInstance single{MarketGraph::single_bundle(), {0.7, 0.2}, {1.0}, 0.0};
  EXPECT_EQ(vcg_price(single).revenue(), 0.0);
}

TEST(VcgAllocate, MaximizesWelfare) {
  const auto d = Distribution::uniform();
  for (std::uint64_t s = 0; s < 300; ++s) {
    const int n = 1 + static_cast<int>(s % 5);
    const int m = 1 + static_cast<int>((s / 5) % 5);
    std::vector<double> ctrs;
    for (int k = 0; k < m; ++k) ctrs.push_back(1.0 - 0.15 * k);
    const auto inst = sample_market(n, d, ctrs, 0.0, s);
    EXPECT_NEAR(vcg_allocate(inst).welfare, best_matching(inst, std::vector<bool>(n, true)), 1e-12);
  }
}

TEST(VcgPrice, MatchesOracleAndInvariants) {
  const auto d = Distribution::uniform();
  for (std::uint64_t s = 0; s < 300; ++s) {
    const int n = 1 + static_cast<int>(s % 5);
    const int m = 1 + static_cast<int>((s / 5) % 5);
    std::vector<double> ctrs;
    for (int k = 0; k < m; ++k) ctrs.push_back(1.0 - 0.15 * k);
    const auto inst = sample_market(n, d, ctrs, 0.0, 7000 + s);
    const auto o = vcg_price(inst);
    EXPECT_TRUE(invariant_violations(o, inst).empty()) << "seed " << s;
    for (BidderId id = 0; id < inst.graph.bidder_count(); ++id) {
      EXPECT_NEAR(bidder_payment(o, inst.graph, id), oracle_payment(inst, id, true), 1e-12);
      EXPECT_NEAR(bidder_payment(vcg_price(inst, false), inst.graph, id), oracle_payment(inst, id, false), 1e-12);
    }
  }
}

// Truthfulness spot check: single slot (clamped and not) and the unclamped
// multi-slot rule.
void ic_spot_check(const std::vector<double> &ctrs, bool clamp, std::uint64_t base) {
  const auto d = Distribution::uniform();
  Rng rng(base);
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto inst = sample_market(2 + static_cast<int>(s % 4), d, ctrs, 0.0, base + s);
    const auto truth = vcg_price(inst, clamp);
    for (BidderId id = 0; id < inst.graph.bidder_count(); ++id) {
      const double v = inst.value(id);
      const double u = bidder_utility(truth, inst, id, v);
      AuctionInstance lie = inst;
      for (int k = 0; k < 50; ++k) {
        lie.values[id] = uniform01(rng);
        EXPECT_GE(u, bidder_utility(vcg_price(lie, clamp), inst, id, v) - 1e-9) << "seed " << s;
      }
    }
  }
}

TEST(VcgPrice, SingleSlotTruthful) {
  ic_spot_check({1.0}, true, 100);
  ic_spot_check({1.0}, false, 200);
}

TEST(VcgPrice, MultiSlotUnclampedTruthful) { ic_spot_check({1.0, 0.8, 0.6}, false, 300); }

}  // namespace
