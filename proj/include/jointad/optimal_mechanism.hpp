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

#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

#include "jointad/distributions.hpp"
#include "jointad/market.hpp"
#include "jointad/outcome.hpp"

namespace jointad {

/// Raised when a mechanism is asked to run outside the setting it solves.
struct unsupported_setting : std::logic_error {
  using std::logic_error::logic_error;
};

/// A report where the density vanishes (the log-normal lower endpoint) takes
/// the one-sided limit -inf, so its bundles never win.
inline double bidder_virtual_value(const AuctionInstance &inst,
                                   std::span<const Distribution> priors, BidderId id) {
  const Distribution &d = prior_of(priors, id);
  const double v = inst.value(id);
  if (!(d.pdf(v) > 0.0)) return -std::numeric_limits<double>::infinity();
  return d.virtual_value(v);
}

/// c^e = c_r(v_r) + c_s(v_s).
inline double bundle_virtual_value(const AuctionInstance &inst, int e,
                                   std::span<const Distribution> priors) {
  const Bundle &b = inst.graph.bundle(e);
  return bidder_virtual_value(inst, priors, b.retailer) +
         bidder_virtual_value(inst, priors, b.supplier);
}

namespace detail {
inline void require_single_slot(const AuctionInstance &inst) {
  if (inst.slots() != 1)
    throw unsupported_setting("the optimal joint auction is only defined for a single slot");
}
}  // namespace detail

/// Single slot: the bundle with the largest virtual value wins if that value
/// reaches the reserve. Ties go to the lowest bundle index.
inline AuctionOutcome optimal_allocate(const AuctionInstance &inst,
                                       std::span<const Distribution> priors) {
  detail::require_single_slot(inst);
  AuctionOutcome out = AuctionOutcome::empty(inst.bundles(), 1);
  int best = -1;
  double best_c = -std::numeric_limits<double>::infinity();
  for (int e = 0; e < inst.bundles(); ++e) {
    const double c = bundle_virtual_value(inst, e, priors);
    if (c > best_c) {
      best_c = c;
      best = e;
    }
  }
  if (best >= 0 && best_c >= inst.reserve) out.allocation(best, 0) = 1.0;
  return out;
}

/// Infimum bid with which `id`'s best bundle still beats the reserve and
/// every bundle not containing `id`, holding the others' values fixed.
/// nullopt when no bid in the support wins.
inline std::optional<double> critical_value(const AuctionInstance &inst,
                                            std::span<const Distribution> priors, BidderId id) {
  detail::require_single_slot(inst);
  const MarketGraph &g = inst.graph;
  double partner_best = -std::numeric_limits<double>::infinity();
  for (BidderId nb : g.neighbors(id)) {
    partner_best = std::max(partner_best, bidder_virtual_value(inst, priors, nb));
  }
  double bar = inst.reserve;
  for (int e : g.bundles_excluding(id)) bar = std::max(bar, bundle_virtual_value(inst, e, priors));
  return prior_of(priors, id).inverse_virtual_value(bar - partner_best);
}

/// Optimal single-slot joint auction: virtual-value allocation, winners pay
/// lambda_1 times their critical bid, losers pay nothing.
inline AuctionOutcome optimal_run(const AuctionInstance &inst,
                                  std::span<const Distribution> priors) {
  AuctionOutcome out = optimal_allocate(inst, priors);
  const int winner = out.winner_of_slot(0);
  if (winner < 0) return out;
  const Bundle &b = inst.graph.bundle(winner);
  const double ctr = inst.ctrs[0];
  out.payments(winner, 0) = ctr * critical_value(inst, priors, b.retailer).value_or(0.0);
  out.payments(winner, 1) = ctr * critical_value(inst, priors, b.supplier).value_or(0.0);
  return out;
}

struct SurplusChoice {
  std::optional<int> bundle;
  double surplus = 0.0;
};

/// Enumerates every deterministic single-slot allocation (nothing, or one
/// bundle) and scores it with sum_e (c^e - v0) x^e. Returns the best bundle
/// when its score is nonnegative.
inline SurplusChoice brute_force_virtual_surplus(const AuctionInstance &inst,
                                                 std::span<const Distribution> priors) {
  detail::require_single_slot(inst);
  const int n = inst.bundles();
  SurplusChoice best{std::nullopt, -std::numeric_limits<double>::infinity()};
  for (int choice = 0; choice < n; ++choice) {
    double objective = 0.0;
    for (int e = 0; e < n; ++e) {
      const double x = e == choice ? 1.0 : 0.0;
      const Bundle &b = inst.graph.bundle(e);
      const double vr = inst.value(b.retailer);
      const double vs = inst.value(b.supplier);
      const auto &fr = prior_of(priors, b.retailer);
      const auto &fs = prior_of(priors, b.supplier);
      const double shading = (1.0 - fr.cdf(vr)) / fr.pdf(vr) + (1.0 - fs.cdf(vs)) / fs.pdf(vs);
      objective += (vr + vs - shading - inst.reserve) * x;
    }
    if (objective > best.surplus) best = {choice, objective};
  }
  if (best.surplus < 0.0) return {std::nullopt, best.surplus};
  return best;
}

}  // namespace jointad
