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

#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "jointad/market.hpp"

namespace {

using namespace jointad;

TEST(MarketGraph, Neighbors) {
  // Path r1 - s1 - r2 is the shared-supplier graph.
  const auto path = MarketGraph::shared_supplier();
  EXPECT_EQ(path.neighbors(2), (std::vector<BidderId>{0, 1}));
  EXPECT_EQ(path.neighbors(0), (std::vector<BidderId>{2}));
  const auto pairs = MarketGraph::disjoint_pairs();
  EXPECT_EQ(pairs.neighbors(1), (std::vector<BidderId>{3}));
  EXPECT_THROW(pairs.neighbors(4), std::out_of_range);
}

TEST(MarketGraph, BundlesExcluding) {
  const auto shared = MarketGraph::shared_supplier();
  EXPECT_EQ(shared.bundles_excluding(0), (std::vector<int>{1}));
  EXPECT_TRUE(shared.bundles_excluding(2).empty());
  EXPECT_EQ(MarketGraph::disjoint_pairs().bundles_excluding(0), (std::vector<int>{1}));
}

TEST(MarketGraph, RejectsBadGraphs) {
  EXPECT_THROW(MarketGraph(1, 1, {{0, 1}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(MarketGraph(2, 1, {{0, 2}}), std::invalid_argument);  // retailer 1 isolated
  EXPECT_THROW(MarketGraph(1, 1, {{1, 0}}), std::invalid_argument);
  EXPECT_THROW(MarketGraph(0, 1, {}), std::invalid_argument);
}

TEST(MarketGraph, MembersAndSides) {
  const auto g = MarketGraph::shared_retailer();
  EXPECT_EQ(g.member(1, Side::Supplier), 2);
  EXPECT_EQ(g.member(1, Side::Retailer), 0);
  EXPECT_TRUE(g.is_retailer(0));
  EXPECT_EQ(g.side_of(1), Side::Supplier);
  EXPECT_EQ(g.incident_bundles(0), (std::vector<int>{0, 1}));
}

void expect_valid(const MarketGraph &g, int n) {
  EXPECT_EQ(g.bundle_count(), n);
  std::set<Bundle> seen(g.bundles().begin(), g.bundles().end());
  EXPECT_EQ(static_cast<int>(seen.size()), n);
  for (BidderId id = 0; id < g.bidder_count(); ++id) EXPECT_FALSE(g.incident_bundles(id).empty());
  EXPECT_LE(g.retailer_count(), n);
  EXPECT_LE(g.supplier_count(), n);
}

TEST(SampleGraph, SingleBundle) {
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(sample_graph(1, s), MarketGraph::single_bundle());
}

TEST(SampleGraph, InvariantsAcrossSizes) {
  for (int n = 1; n <= 12; ++n) {
    for (std::uint64_t s = 0; s < 50; ++s) expect_valid(sample_graph(n, s * 31 + n), n);
  }
}

TEST(SampleGraph, TwoBundleClassesEquallyLikely) {
  // Two of the four pool cells: 2 same-row, 2 same-column and 2 diagonal
  // pairs out of 6.
  std::map<std::pair<int, int>, int> counts;
  const int trials = 30000;
  for (int s = 0; s < trials; ++s) {
    const auto g = sample_graph(2, static_cast<std::uint64_t>(s));
    ++counts[{g.retailer_count(), g.supplier_count()}];
  }
  ASSERT_EQ(counts.size(), 3u);
  for (const auto &[shape, c] : counts) EXPECT_NEAR(static_cast<double>(c) / trials, 1.0 / 3, 0.015);
}

TEST(SampleGraph, Reproducible) {
  EXPECT_EQ(sample_graph(7, 42), sample_graph(7, 42));
  bool any_differs = false;
  for (std::uint64_t s = 1; s < 10; ++s) any_differs |= !(sample_graph(7, s) == sample_graph(7, 0));
  EXPECT_TRUE(any_differs);
}

TEST(Instance, SampleIsValid) {
  const auto d = Distribution::uniform();
  const auto inst = sample_instance(sample_graph(10, 3), d, {1.0, 0.8, 0.6, 0.4, 0.2}, 0.0, 9);
  EXPECT_EQ(inst.slots(), 5);
  EXPECT_EQ(inst.bundles(), 10);
  EXPECT_NO_THROW(inst.validate(std::span(&d, 1)));
  const auto again = sample_instance(sample_graph(10, 3), d, {1.0, 0.8, 0.6, 0.4, 0.2}, 0.0, 9);
  EXPECT_EQ(inst.values, again.values);
}

TEST(Instance, CtrValidation) {
  EXPECT_THROW(AuctionInstance::validate_ctrs(std::vector<double>{0.5, 0.8}), std::invalid_argument);
  EXPECT_THROW(AuctionInstance::validate_ctrs(std::vector<double>{1.2}), std::invalid_argument);
  EXPECT_THROW(AuctionInstance::validate_ctrs(std::vector<double>{}), std::invalid_argument);
  EXPECT_NO_THROW(AuctionInstance::validate_ctrs(std::vector<double>{1.0, 1.0, 0.0}));
}

TEST(Instance, OutOfSupportValueRejected) {
  const auto d = Distribution::uniform();
  AuctionInstance inst{MarketGraph::single_bundle(), {0.5, 1.5}, {1.0}, 0.0};
  EXPECT_THROW(inst.validate(std::span(&d, 1)), std::invalid_argument);
}

TEST(Instance, JsonRoundTrip) {
  const auto inst = sample_market(5, Distribution::truncated_normal(), {1.0, 0.5}, 0.1, 77);
  const nlohmann::json j = inst;
  for (const char *key : {"retailers", "suppliers", "edges", "values", "ctrs", "v0"}) EXPECT_TRUE(j.contains(key));
  const auto back = j.get<AuctionInstance>();
  EXPECT_EQ(back.graph, inst.graph);
  EXPECT_EQ(back.values, inst.values);
  EXPECT_EQ(back.ctrs, inst.ctrs);
  EXPECT_EQ(back.reserve, inst.reserve);
}

TEST(Instance, JsonRejectsBadIds) {
  auto j = nlohmann::json::parse(R"({"retailers":[0],"suppliers":[2],"edges":[[0,2]],"values":[0.1,0.2],"ctrs":[1]})");
  EXPECT_THROW(j.get<AuctionInstance>(), std::invalid_argument);
}

}  // namespace
