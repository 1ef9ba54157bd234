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
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointad/distributions.hpp"
#include "jointad/rng.hpp"

namespace jointad {

/// Dense bidder index. Retailers occupy [0, R), suppliers [R, R + S).
using BidderId = int;

enum class Side { Retailer = 0, Supplier = 1 };

struct Bundle {
  BidderId retailer;
  BidderId supplier;
  friend bool operator==(const Bundle &, const Bundle &) = default;
  friend auto operator<=>(const Bundle &, const Bundle &) = default;
};

/// Bipartite retailer/supplier relation whose edges are the bundles.
class MarketGraph {
 public:
  MarketGraph() = default;

  MarketGraph(int retailers, int suppliers, std::vector<Bundle> bundles)
      : retailers_(retailers), suppliers_(suppliers), bundles_(std::move(bundles)) {
    validate();
    incident_.assign(static_cast<std::size_t>(bidder_count()), {});
    for (int e = 0; e < bundle_count(); ++e) {
      incident_[bundles_[e].retailer].push_back(e);
      incident_[bundles_[e].supplier].push_back(e);
    }
  }

  int retailer_count() const { return retailers_; }
  int supplier_count() const { return suppliers_; }
  int bidder_count() const { return retailers_ + suppliers_; }
  int bundle_count() const { return static_cast<int>(bundles_.size()); }
  const std::vector<Bundle> &bundles() const { return bundles_; }
  const Bundle &bundle(int e) const { return bundles_.at(static_cast<std::size_t>(e)); }

  bool is_retailer(BidderId id) const {
    check_bidder(id);
    return id < retailers_;
  }
  Side side_of(BidderId id) const { return is_retailer(id) ? Side::Retailer : Side::Supplier; }

  /// Bidder on the given side of bundle e.
  BidderId member(int e, Side side) const {
    const Bundle &b = bundle(e);
    return side == Side::Retailer ? b.retailer : b.supplier;
  }

  /// N(i): bidders sharing a bundle with i, ascending.
  std::vector<BidderId> neighbors(BidderId id) const {
    check_bidder(id);
    std::vector<BidderId> out;
    for (int e : incident_[id]) {
      const Bundle &b = bundles_[e];
      out.push_back(b.retailer == id ? b.supplier : b.retailer);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// E_i: indices of the bundles containing i, ascending.
  const std::vector<int> &incident_bundles(BidderId id) const {
    check_bidder(id);
    return incident_[id];
  }

  /// E_{-i}: indices of the bundles not containing i, ascending.
  std::vector<int> bundles_excluding(BidderId id) const {
    check_bidder(id);
    std::vector<int> out;
    for (int e = 0; e < bundle_count(); ++e) {
      if (bundles_[e].retailer != id && bundles_[e].supplier != id) out.push_back(e);
    }
    return out;
  }

  friend bool operator==(const MarketGraph &a, const MarketGraph &b) {
    return a.retailers_ == b.retailers_ && a.suppliers_ == b.suppliers_ &&
           a.bundles_ == b.bundles_;
  }

  // Fixtures used by the allocation-grid experiments and tests.

  static MarketGraph single_bundle() { return MarketGraph(1, 1, {{0, 1}}); }
  /// e1 = (r1, s1), e2 = (r2, s1).
  static MarketGraph shared_supplier() { return MarketGraph(2, 1, {{0, 2}, {1, 2}}); }
  /// e1 = (r1, s1), e2 = (r1, s2).
  static MarketGraph shared_retailer() { return MarketGraph(1, 2, {{0, 1}, {0, 2}}); }
  /// e1 = (r1, s1), e2 = (r2, s2).
  static MarketGraph disjoint_pairs() { return MarketGraph(2, 2, {{0, 2}, {1, 3}}); }

 private:
  void check_bidder(BidderId id) const {
    if (id < 0 || id >= bidder_count()) throw std::out_of_range("unknown bidder id");
  }

  void validate() const {
    if (retailers_ < 1 || suppliers_ < 1) throw std::invalid_argument("graph needs both sides");
    if (bundles_.empty()) throw std::invalid_argument("graph needs at least one bundle");
    std::vector<int> degree(static_cast<std::size_t>(bidder_count()), 0);
    std::set<Bundle> seen;
    for (const Bundle &b : bundles_) {
      if (b.retailer < 0 || b.retailer >= retailers_)
        throw std::invalid_argument("bundle retailer is not a retailer id");
      if (b.supplier < retailers_ || b.supplier >= bidder_count())
        throw std::invalid_argument("bundle supplier is not a supplier id");
      if (!seen.insert(b).second) throw std::invalid_argument("duplicate bundle");
      ++degree[b.retailer];
      ++degree[b.supplier];
    }
    for (int d : degree) {
      if (d == 0) throw std::invalid_argument("isolated bidder in market graph");
    }
  }

  int retailers_ = 0;
  int suppliers_ = 0;
  std::vector<Bundle> bundles_;
  std::vector<std::vector<int>> incident_;
};

/// Random market with exactly `n_bundles` bundles: n distinct cells drawn
/// uniformly from an n x n retailer/supplier pool, isolated pool members
/// dropped, survivors relabelled densely in pool order. Bundles are listed in
/// the order they were drawn.
inline MarketGraph sample_graph(int n_bundles, Rng &rng) {
  if (n_bundles < 1) throw std::invalid_argument("n_bundles must be at least 1");
  const auto n = static_cast<std::uint64_t>(n_bundles);
  // Partial Fisher-Yates over the n*n cells.
  std::vector<std::uint64_t> cells(n * n);
  for (std::uint64_t i = 0; i < cells.size(); ++i) cells[i] = i;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t j = i + uniform_index(rng, cells.size() - i);
    std::swap(cells[i], cells[j]);
  }
  std::vector<int> r_label(n, -1);
  std::vector<int> s_label(n, -1);
  for (std::uint64_t i = 0; i < n; ++i) {
    r_label[cells[i] / n] = 0;
    s_label[cells[i] % n] = 0;
  }
  int retailers = 0;
  for (auto &l : r_label) {
    if (l == 0) l = retailers++;
  }
  int suppliers = 0;
  for (auto &l : s_label) {
    if (l == 0) l = retailers + suppliers++;
  }
  std::vector<Bundle> bundles;
  bundles.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    bundles.push_back({r_label[cells[i] / n], s_label[cells[i] % n]});
  }
  return MarketGraph(retailers, suppliers, std::move(bundles));
}

inline MarketGraph sample_graph(int n_bundles, std::uint64_t seed) {
  Rng rng(seed);
  return sample_graph(n_bundles, rng);
}

/// A market plus a value profile, slot CTRs and the auctioneer reserve.
struct AuctionInstance {
  MarketGraph graph;
  std::vector<double> values;  // indexed by BidderId
  std::vector<double> ctrs;    // lambda, nonincreasing
  double reserve = 0.0;

  int slots() const { return static_cast<int>(ctrs.size()); }
  int bundles() const { return graph.bundle_count(); }
  double value(BidderId id) const { return values.at(static_cast<std::size_t>(id)); }
  double value(int e, Side side) const { return value(graph.member(e, side)); }

  /// Throws std::invalid_argument when an instance invariant fails.
  void validate(std::span<const Distribution> priors = {}) const {
    if (static_cast<int>(values.size()) != graph.bidder_count())
      throw std::invalid_argument("value profile size does not match bidder count");
    validate_ctrs(ctrs);
    for (int i = 0; i < graph.bidder_count(); ++i) {
      if (!std::isfinite(values[i])) throw std::invalid_argument("non-finite value");
      if (!priors.empty() && !prior_of(priors, i).contains(values[i]))
        throw std::invalid_argument("value outside its prior support");
    }
  }

  static void validate_ctrs(std::span<const double> ctrs) {
    if (ctrs.empty()) throw std::invalid_argument("need at least one slot");
    for (std::size_t k = 0; k < ctrs.size(); ++k) {
      if (!(ctrs[k] >= 0.0 && ctrs[k] <= 1.0)) throw std::invalid_argument("CTR outside [0, 1]");
      if (k > 0 && ctrs[k] > ctrs[k - 1]) throw std::invalid_argument("CTRs must be nonincreasing");
    }
  }
};

inline AuctionInstance sample_instance(MarketGraph graph, const Distribution &dist,
                                       std::vector<double> ctrs, double reserve, Rng &rng) {
  AuctionInstance inst{std::move(graph), {}, std::move(ctrs), reserve};
  inst.values.resize(static_cast<std::size_t>(inst.graph.bidder_count()));
  for (auto &v : inst.values) v = dist.draw(rng);
  inst.validate(std::span(&dist, 1));
  return inst;
}

inline AuctionInstance sample_instance(MarketGraph graph, const Distribution &dist,
                                       std::vector<double> ctrs, double reserve,
                                       std::uint64_t seed) {
  Rng rng(seed);
  return sample_instance(std::move(graph), dist, std::move(ctrs), reserve, rng);
}

/// Graph and values for one Monte-Carlo sample, drawn from a dedicated stream.
inline AuctionInstance sample_market(int n_bundles, const Distribution &dist,
                                     const std::vector<double> &ctrs, double reserve,
                                     std::uint64_t seed) {
  Rng rng(seed);
  MarketGraph g = sample_graph(n_bundles, rng);
  return sample_instance(std::move(g), dist, ctrs, reserve, rng);
}

// JSON: {retailers, suppliers, edges, values, ctrs, v0}. Ids are dense, edges
// are [retailer, supplier] pairs.

inline void to_json(nlohmann::json &j, const MarketGraph &g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Bundle &b : g.bundles()) edges.push_back({b.retailer, b.supplier});
  std::vector<int> r(g.retailer_count()), s(g.supplier_count());
  for (int i = 0; i < g.retailer_count(); ++i) r[i] = i;
  for (int i = 0; i < g.supplier_count(); ++i) s[i] = g.retailer_count() + i;
  j = {{"retailers", r}, {"suppliers", s}, {"edges", edges}};
}

inline void from_json(const nlohmann::json &j, MarketGraph &g) {
  const auto r = j.at("retailers").get<std::vector<int>>();
  const auto s = j.at("suppliers").get<std::vector<int>>();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] != static_cast<int>(i)) throw std::invalid_argument("retailer ids must be 0..R-1");
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != static_cast<int>(r.size() + i))
      throw std::invalid_argument("supplier ids must follow retailer ids");
  }
  std::vector<Bundle> bundles;
  for (const auto &e : j.at("edges")) bundles.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  g = MarketGraph(static_cast<int>(r.size()), static_cast<int>(s.size()), std::move(bundles));
}

inline void to_json(nlohmann::json &j, const AuctionInstance &inst) {
  j = inst.graph;
  j["values"] = inst.values;
  j["ctrs"] = inst.ctrs;
  j["v0"] = inst.reserve;
}

inline void from_json(const nlohmann::json &j, AuctionInstance &inst) {
  inst.graph = j.get<MarketGraph>();
  inst.values = j.at("values").get<std::vector<double>>();
  inst.ctrs = j.at("ctrs").get<std::vector<double>>();
  inst.reserve = j.value("v0", 0.0);
  inst.validate();
}

}  // namespace jointad
