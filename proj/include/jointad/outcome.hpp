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

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "jointad/market.hpp"

namespace jointad {

/// Allocation (bundles x slots, probabilities) and per-side payments
/// (bundles x 2; column 0 retailer, column 1 supplier).
struct AuctionOutcome {
  Eigen::MatrixXd allocation;
  Eigen::MatrixXd payments;

  static AuctionOutcome empty(int bundles, int slots) {
    return {Eigen::MatrixXd::Zero(bundles, slots), Eigen::MatrixXd::Zero(bundles, 2)};
  }

  int bundles() const { return static_cast<int>(allocation.rows()); }
  int slots() const { return static_cast<int>(allocation.cols()); }

  double payment(int e, Side side) const { return payments(e, static_cast<int>(side)); }
  double revenue() const { return payments.sum(); }

  /// x^e . lambda
  double allocated_ctr(int e, const std::vector<double> &ctrs) const {
    double out = 0.0;
    for (int k = 0; k < slots(); ++k) out += allocation(e, k) * ctrs[k];
    return out;
  }

  /// Index of the bundle holding slot k deterministically, or -1.
  int winner_of_slot(int k) const {
    for (int e = 0; e < bundles(); ++e) {
      if (allocation(e, k) == 1.0) return e;
    }
    return -1;
  }
};

/// p_i: sum of i's side payments over its bundles.
inline double bidder_payment(const AuctionOutcome &out, const MarketGraph &g, BidderId id) {
  const Side side = g.side_of(id);
  double total = 0.0;
  for (int e : g.incident_bundles(id)) total += out.payment(e, side);
  return total;
}

/// u_i^e = v_i x^e lambda^T - p_i^e for the bidder on `side` of bundle e.
inline double bundle_utility(const AuctionOutcome &out, const AuctionInstance &inst, int e,
                             Side side, double true_value) {
  return true_value * out.allocated_ctr(e, inst.ctrs) - out.payment(e, side);
}

/// u_i = sum over E_i of u_i^e.
inline double bidder_utility(const AuctionOutcome &out, const AuctionInstance &inst, BidderId id,
                             double true_value) {
  const Side side = inst.graph.side_of(id);
  double u = 0.0;
  for (int e : inst.graph.incident_bundles(id)) u += bundle_utility(out, inst, e, side, true_value);
  return u;
}

/// Empty when the outcome is feasible, nonnegative and ex-post IR at the
/// instance's values; otherwise one message per violated invariant.
inline std::vector<std::string> invariant_violations(const AuctionOutcome &out,
                                                     const AuctionInstance &inst,
                                                     double tol = 1e-9) {
  std::vector<std::string> bad;
  if (out.bundles() != inst.bundles() || out.slots() != inst.slots() ||
      out.payments.rows() != inst.bundles() || out.payments.cols() != 2) {
    bad.emplace_back("outcome shape does not match instance");
    return bad;
  }
  if (!out.allocation.allFinite() || !out.payments.allFinite()) bad.emplace_back("non-finite entry");
  if ((out.allocation.array() < -tol).any() || (out.allocation.array() > 1.0 + tol).any())
    bad.emplace_back("allocation entry outside [0, 1]");
  for (int k = 0; k < out.slots(); ++k) {
    if (out.allocation.col(k).sum() > 1.0 + tol)
      bad.push_back("slot " + std::to_string(k) + " over-allocated");
  }
  for (int e = 0; e < out.bundles(); ++e) {
    if (out.allocation.row(e).sum() > 1.0 + tol)
      bad.push_back("bundle " + std::to_string(e) + " holds more than one slot");
  }
  if ((out.payments.array() < -tol).any()) bad.emplace_back("negative payment");
  for (int e = 0; e < out.bundles(); ++e) {
    const double ctr = out.allocated_ctr(e, inst.ctrs);
    for (Side side : {Side::Retailer, Side::Supplier}) {
      if (out.payment(e, side) > inst.value(e, side) * ctr + tol)
        bad.push_back("bundle " + std::to_string(e) + " violates ex-post IR");
    }
  }
  return bad;
}

/// Structured rows: one object per bundle.
inline nlohmann::json outcome_rows(const AuctionOutcome &out, const MarketGraph &g) {
  nlohmann::json rows = nlohmann::json::array();
  for (int e = 0; e < out.bundles(); ++e) {
    std::vector<double> alloc(static_cast<std::size_t>(out.slots()));
    for (int k = 0; k < out.slots(); ++k) alloc[k] = out.allocation(e, k);
    rows.push_back({{"bundle", e},
                    {"retailer", g.bundle(e).retailer},
                    {"supplier", g.bundle(e).supplier},
                    {"allocation", alloc},
                    {"retailer_payment", out.payments(e, 0)},
                    {"supplier_payment", out.payments(e, 1)}});
  }
  return rows;
}

}  // namespace jointad
