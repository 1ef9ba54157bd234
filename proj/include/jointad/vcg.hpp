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
#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "jointad/market.hpp"
#include "jointad/outcome.hpp"

namespace jointad {

struct SlotAssignment {
  std::vector<int> slot_of_bundle;  // -1 when unallocated
  std::vector<int> bundle_of_slot;  // -1 when empty
  double welfare = 0.0;
};

inline double stacked_bid(const AuctionInstance &inst, int e) {
  const Bundle &b = inst.graph.bundle(e);
  return inst.value(b.retailer) + inst.value(b.supplier);
}

namespace detail {

// Welfare-maximizing assignment restricted to `eligible` bundles. CTRs are
// sorted, so ranking by stacked bid is optimal.
inline SlotAssignment assign_by_stacked_bid(const AuctionInstance &inst,
                                            const std::vector<bool> &eligible) {
  const int n = inst.bundles();
  const int m = inst.slots();
  std::vector<int> order;
  for (int e = 0; e < n; ++e) {
    if (eligible[e]) order.push_back(e);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return stacked_bid(inst, a) > stacked_bid(inst, b);
  });
  SlotAssignment out{std::vector<int>(n, -1), std::vector<int>(m, -1), 0.0};
  for (int k = 0; k < m && k < static_cast<int>(order.size()); ++k) {
    out.slot_of_bundle[order[k]] = k;
    out.bundle_of_slot[k] = order[k];
    out.welfare += inst.ctrs[k] * stacked_bid(inst, order[k]);
  }
  return out;
}

}  // namespace detail

/// Top min(m, n) bundles by stacked bid take the slots in CTR order; equal
/// stacked bids go to the lower bundle index.
inline SlotAssignment vcg_allocate(const AuctionInstance &inst) {
  return detail::assign_by_stacked_bid(inst, std::vector<bool>(inst.bundles(), true));
}

/// Clarke pivot payments per bidder, where removing a bidder removes every
/// bundle it belongs to:
///   p_i = W_{-i} - (W - sum_{e in E_i allocated} lambda_{k(e)} b_i).
/// With `clamp` the payment is floored at zero. A bidder's payment is split
/// over its allocated bundles in proportion to its contribution to each.
inline AuctionOutcome vcg_price(const AuctionInstance &inst, bool clamp = true) {
  const int n = inst.bundles();
  const MarketGraph &g = inst.graph;
  const SlotAssignment assign = vcg_allocate(inst);
  AuctionOutcome out = AuctionOutcome::empty(n, inst.slots());
  for (int e = 0; e < n; ++e) {
    if (assign.slot_of_bundle[e] >= 0) out.allocation(e, assign.slot_of_bundle[e]) = 1.0;
  }
  for (BidderId id = 0; id < g.bidder_count(); ++id) {
    const double bid = inst.value(id);
    std::vector<bool> eligible(n, true);
    double own = 0.0;
    for (int e : g.incident_bundles(id)) {
      eligible[e] = false;
      if (assign.slot_of_bundle[e] >= 0) own += inst.ctrs[assign.slot_of_bundle[e]] * bid;
    }
    if (own <= 0.0) continue;
    const double without = detail::assign_by_stacked_bid(inst, eligible).welfare;
    double pay = without - (assign.welfare - own);
    if (clamp) pay = std::max(0.0, pay);
    const int col = static_cast<int>(g.side_of(id));
    for (int e : g.incident_bundles(id)) {
      if (assign.slot_of_bundle[e] < 0) continue;
      out.payments(e, col) = pay * (inst.ctrs[assign.slot_of_bundle[e]] * bid) / own;
    }
  }
  return out;
}

}  // namespace jointad
