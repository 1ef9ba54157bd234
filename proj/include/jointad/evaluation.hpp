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
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "jointad/bundlenet.hpp"
#include "jointad/distributions.hpp"
#include "jointad/market.hpp"
#include "jointad/optimal_mechanism.hpp"
#include "jointad/outcome.hpp"
#include "jointad/rng.hpp"
#include "jointad/training.hpp"
#include "jointad/vcg.hpp"

namespace jointad {

using Mechanism = std::function<AuctionOutcome(const AuctionInstance &)>;

/// Runs fn(begin, end) over [0, count) split into contiguous shards. Results
/// must be written by index so they do not depend on the worker count.
inline void parallel_for(int count, int workers, const std::function<void(int, int)> &fn) {
  if (count <= 0) return;
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long>(count) * w / workers);
    const int end = static_cast<int>(static_cast<long>(count) * (w + 1) / workers);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto &t : pool) t.join();
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::vector<double> grid_points(double lo, double hi, int count) {
  if (count < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
  out.back() = hi;
  return out;
}

// ---------------------------------------------------------------------------
// Reference mechanisms

/// Highest stacked bid wins each slot; each winner side pays its own bid
/// times the slot CTR. Not truthful.
inline AuctionOutcome pay_your_bid(const AuctionInstance &inst) {
  const SlotAssignment a = vcg_allocate(inst);
  AuctionOutcome out = AuctionOutcome::empty(inst.bundles(), inst.slots());
  for (int k = 0; k < inst.slots(); ++k) {
    const int e = a.bundle_of_slot[k];
    if (e < 0) continue;
    out.allocation(e, k) = 1.0;
    out.payments(e, 0) = inst.ctrs[k] * inst.value(e, Side::Retailer);
    out.payments(e, 1) = inst.ctrs[k] * inst.value(e, Side::Supplier);
  }
  return out;
}

inline Mechanism optimal_mechanism(Distribution prior) {
  return [prior](const AuctionInstance &inst) { return optimal_run(inst, std::span(&prior, 1)); };
}

inline Mechanism rvcg_mechanism(bool clamp = true) {
  return [clamp](const AuctionInstance &inst) { return vcg_price(inst, clamp); };
}

// ---------------------------------------------------------------------------
// Revenue

struct RevenueEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int samples = 0;
};

inline RevenueEstimate summarize(std::span<const double> xs) {
  RevenueEstimate r;
  r.samples = static_cast<int>(xs.size());
  if (xs.empty()) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  r.mean = sum / r.samples;
  if (r.samples > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.stderr_ = std::sqrt(ss / (r.samples - 1) / r.samples);
  }
  return r;
}

/// Sample i is drawn from derive_seed(seed, i), so every mechanism evaluated
/// with the same seed sees the same markets.
inline AuctionInstance evaluation_sample(const Setting &s, const Distribution &prior, std::uint64_t seed, int i) {
  return sample_market(s.bundles, prior, s.ctrs, s.reserve, derive_seed(seed, static_cast<std::uint64_t>(i)));
}

inline std::vector<AuctionInstance> evaluation_batch(const Setting &s, int begin, int end, std::uint64_t seed) {
  const Distribution prior = s.prior();
  std::vector<AuctionInstance> out;
  out.reserve(static_cast<std::size_t>(std::max(0, end - begin)));
  for (int i = begin; i < end; ++i) out.push_back(evaluation_sample(s, prior, seed, i));
  return out;
}

inline RevenueEstimate mc_revenue(const Mechanism &mech, const Setting &s, int samples, std::uint64_t seed,
                                  int workers = 0) {
  std::vector<double> rev(static_cast<std::size_t>(samples));
  const Distribution prior = s.prior();
  parallel_for(samples, workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) rev[i] = mech(evaluation_sample(s, prior, seed, i)).revenue();
  });
  return summarize(rev);
}

/// Batched BundleNet forward; entry l is the total payment of sample l.
inline std::vector<double> bundlenet_revenues(const BundleNetParams &params,
                                              std::span<const AuctionInstance> batch) {
  if (batch.empty()) return {};
  const int C = static_cast<int>(batch.size());
  const int n = batch.front().bundles();
  Matrix br(C, n), bs(C, n);
  for (int l = 0; l < C; ++l) {
    for (int e = 0; e < n; ++e) {
      br(l, e) = batch[l].value(e, Side::Retailer);
      bs(l, e) = batch[l].value(e, Side::Supplier);
    }
  }
  const BundleNetLayout layout(n, batch.front().ctrs);
  diff::Tape tape;
  const BoundBundleNet net = bind(tape, params, false);
  const NetOutputs out = forward_bids(net, layout, tape.constant(br), tape.constant(bs));
  const Matrix total = out.retailer_pay.value().rowwise().sum() + out.supplier_pay.value().rowwise().sum();
  return {total.data(), total.data() + total.size()};
}

inline RevenueEstimate mc_revenue(const BundleNetParams &params, const Setting &s, int samples,
                                  std::uint64_t seed, int workers = 0, int chunk = 1000) {
  std::vector<double> rev(static_cast<std::size_t>(samples));
  const int chunks = (samples + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](int cb, int ce) {
    for (int c = cb; c < ce; ++c) {
      const int begin = c * chunk;
      const int end = std::min(samples, begin + chunk);
      const auto batch = evaluation_batch(s, begin, end, seed);
      const auto r = bundlenet_revenues(params, batch);
      std::copy(r.begin(), r.end(), rev.begin() + begin);
    }
  });
  return summarize(rev);
}

// ---------------------------------------------------------------------------
// Regret

/// Per-sample regret sums. Bidder gains use the whole utility u_i, bundle
/// gains the per-(edge, side) utility u_i^e; every gain is floored at 0.
struct RegretReport {
  int samples = 0;
  int bundles = 0;
  Eigen::VectorXd edge_regret;     // n, mean over samples of rgt^e
  Eigen::VectorXd bidder_regret;   // 2n by bidder id, mean over samples (0 where absent)
  double regret_2n = 0.0;          // mean_l sum_i rgt_i / 2n
  double regret_per_bidder = 0.0;  // mean_l sum_i rgt_i / |R u S|
  double edge_sum = 0.0;           // mean_l sum_e rgt^e
  double lemma_excess = -1e300;    // max_l (sum_i rgt_i - sum_e rgt^e)
  int lemma_violations = 0;        // samples where the excess exceeds 1e-6
};

struct SampleRegret {
  std::vector<double> bidder;  // by id
  std::vector<double> edge;    // by edge
};

inline RegretReport aggregate(std::span<const SampleRegret> rows, int bundles,
                              std::span<const AuctionInstance> batch) {
  RegretReport r;
  r.samples = static_cast<int>(rows.size());
  r.bundles = bundles;
  r.edge_regret = Eigen::VectorXd::Zero(bundles);
  r.bidder_regret = Eigen::VectorXd::Zero(2 * bundles);
  for (std::size_t l = 0; l < rows.size(); ++l) {
    double bsum = 0.0;
    double esum = 0.0;
    for (std::size_t i = 0; i < rows[l].bidder.size(); ++i) {
      r.bidder_regret[static_cast<Eigen::Index>(i)] += rows[l].bidder[i];
      bsum += rows[l].bidder[i];
    }
    for (std::size_t e = 0; e < rows[l].edge.size(); ++e) {
      r.edge_regret[static_cast<Eigen::Index>(e)] += rows[l].edge[e];
      esum += rows[l].edge[e];
    }
    r.regret_2n += bsum / (2.0 * bundles);
    r.regret_per_bidder += bsum / batch[l].graph.bidder_count();
    r.edge_sum += esum;
    r.lemma_excess = std::max(r.lemma_excess, bsum - esum);
    if (bsum - esum > 1e-6) ++r.lemma_violations;
  }
  if (r.samples > 0) {
    r.edge_regret /= r.samples;
    r.bidder_regret /= r.samples;
    r.regret_2n /= r.samples;
    r.regret_per_bidder /= r.samples;
    r.edge_sum /= r.samples;
  }
  return r;
}

/// Exhaustive grid search over each bidder's report for an arbitrary
/// mechanism. Non-differentiable mechanisms are evaluated this way.
inline SampleRegret grid_regret(const Mechanism &mech, const AuctionInstance &inst,
                                std::span<const Distribution> priors, int points = 101) {
  const MarketGraph &g = inst.graph;
  const AuctionOutcome truth = mech(inst);
  SampleRegret out;
  out.bidder.assign(static_cast<std::size_t>(g.bidder_count()), 0.0);
  out.edge.assign(static_cast<std::size_t>(g.bundle_count()), 0.0);
  AuctionInstance lie = inst;
  for (BidderId id = 0; id < g.bidder_count(); ++id) {
    const double v = inst.value(id);
    const Side side = g.side_of(id);
    const auto &edges = g.incident_bundles(id);
    const double base = bidder_utility(truth, inst, id, v);
    std::vector<double> edge_base, edge_best(edges.size(), 0.0);
    for (int e : edges) edge_base.push_back(bundle_utility(truth, inst, e, side, v));
    const Distribution &d = prior_of(priors, id);
    for (double b : grid_points(d.lower(), d.upper(), points)) {
      lie.values[static_cast<std::size_t>(id)] = b;
      const AuctionOutcome o = mech(lie);
      out.bidder[id] = std::max(out.bidder[id], bidder_utility(o, inst, id, v) - base);
      for (std::size_t j = 0; j < edges.size(); ++j) {
        edge_best[j] = std::max(edge_best[j], bundle_utility(o, inst, edges[j], side, v) - edge_base[j]);
      }
    }
    lie.values[static_cast<std::size_t>(id)] = v;
    for (std::size_t j = 0; j < edges.size(); ++j) out.edge[edges[j]] += edge_best[j];
  }
  return out;
}

inline RegretReport mechanism_regret(const Mechanism &mech, std::span<const AuctionInstance> batch,
                                     std::span<const Distribution> priors, int points = 101, int workers = 0) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<SampleRegret> rows(batch.size());
  parallel_for(static_cast<int>(batch.size()), workers, [&](int b, int e) {
    for (int l = b; l < e; ++l) rows[l] = grid_regret(mech, batch[l], priors, points);
  });
  return aggregate(rows, batch.front().bundles(), batch);
}

/// Conservative evaluation-time search: truthful report, a grid per
/// misreport variable, then gradient-ascent restarts (the first from the best
/// grid point). The maximum over every visited point is kept.
struct EvalOptions {
  int grid_points = 101;
  int ascent_steps = 200;
  int restarts = 10;
  double ascent_rate = 0.05;
  std::uint64_t seed = 7;
  int chunk = 500;
};

struct ChannelSearch {
  Matrix gain;       // C x K, floored at 0
  Matrix misreport;  // C x K, argmax
};

namespace detail {

inline void keep_best(ChannelSearch &s, const Matrix &utility, const Matrix &truthful, const Matrix &active,
                      const Matrix &candidate) {
  for (Eigen::Index k = 0; k < s.gain.cols(); ++k) {
    for (Eigen::Index l = 0; l < s.gain.rows(); ++l) {
      const double g = (utility(l, k) - truthful(l, k)) * active(l, k);
      if (g > s.gain(l, k)) {
        s.gain(l, k) = g;
        s.misreport(l, k) = candidate(l, k);
      }
    }
  }
}

inline Matrix channel_utility(const BoundBundleNet &net, const BundleNetLayout &layout, const ChannelPlan &plan,
                              diff::Tape &tape, const Matrix &m) {
  return channel_forward(net, layout, plan, tape.constant(m), false).misreport_utility.value();
}

}  // namespace detail

inline ChannelSearch search_channels(const BundleNetParams &params, const ChannelPlan &plan,
                                     std::span<const AuctionInstance> batch, const EvalOptions &opt,
                                     const Matrix *extra_candidate = nullptr, std::uint64_t stream = 0) {
  const BundleNetLayout layout(plan.bundles, batch.front().ctrs);
  const Matrix truthful_mis = truthful_misreports(plan, batch);
  Matrix truthful;
  {
    diff::Tape tape;
    const BoundBundleNet net = bind(tape, params, false);
    truthful = channel_forward(net, layout, plan, tape.constant(truthful_mis), true).truthful_utility.value();
  }
  ChannelSearch s{Matrix::Zero(plan.samples, plan.channels), truthful_mis};
  auto try_candidate = [&](const Matrix &cand) {
    diff::Tape tape;
    const BoundBundleNet net = bind(tape, params, false);
    detail::keep_best(s, detail::channel_utility(net, layout, plan, tape, cand), truthful, plan.active, cand);
  };
  if (opt.grid_points > 0) {
    const Matrix span = plan.upper - plan.lower;
    for (int gi = 0; gi < opt.grid_points; ++gi) {
      const double t = opt.grid_points == 1 ? 0.0 : static_cast<double>(gi) / (opt.grid_points - 1);
      try_candidate(plan.lower + t * span);
    }
  }
  if (extra_candidate) {
    Matrix cand = *extra_candidate;
    clamp_misreports(plan, cand);
    try_candidate(cand);
  }
  for (int r = 0; r < opt.restarts; ++r) {
    Rng rng(derive_seed(opt.seed, stream * 1000003u + static_cast<std::uint64_t>(r)));
    Matrix m = r == 0 ? s.misreport : random_misreports(plan, rng);
    clamp_misreports(plan, m);
    for (int step = 0; step <= opt.ascent_steps; ++step) {
      diff::Tape tape;
      const BoundBundleNet net = bind(tape, params, false);
      const diff::Var v = tape.variable(m);
      const ChannelForward f = channel_forward(net, layout, plan, v, false);
      detail::keep_best(s, f.misreport_utility.value(), truthful, plan.active, m);
      if (step == opt.ascent_steps) break;
      tape.backward(diff::sum(f.misreport_utility));
      m += opt.ascent_rate * v.grad();
      clamp_misreports(plan, m);
    }
  }
  return s;
}

/// Conservative per-bidder and per-edge regret of a BundleNet on one batch.
/// Bundle-side variables also try their bidder's best whole-utility
/// misreport, so sum_i rgt_i <= sum_e rgt^e holds sample by sample.
inline std::vector<SampleRegret> bundlenet_sample_regret(const BundleNetParams &params,
                                                         std::span<const AuctionInstance> batch,
                                                         std::span<const Distribution> priors,
                                                         const EvalOptions &opt, std::uint64_t stream = 0) {
  const ChannelPlan bidders = plan_channels(batch, ChannelKind::Bidder, priors);
  const ChannelPlan sides = plan_channels(batch, ChannelKind::BundleSide, priors);
  const ChannelSearch bs = search_channels(params, bidders, batch, opt, nullptr, 2 * stream);
  Matrix carry = truthful_misreports(sides, batch);
  for (int l = 0; l < sides.samples; ++l) {
    for (int k = 0; k < sides.channels; ++k) carry(l, k) = bs.misreport(l, sides.bidder_of(l, k));
  }
  const ChannelSearch ss = search_channels(params, sides, batch, opt, &carry, 2 * stream + 1);
  const int n = sides.bundles;
  std::vector<SampleRegret> rows(batch.size());
  for (int l = 0; l < sides.samples; ++l) {
    const int bidder_count = batch[l].graph.bidder_count();
    rows[l].bidder.assign(static_cast<std::size_t>(bidder_count), 0.0);
    for (int k = 0; k < bidder_count; ++k) rows[l].bidder[k] = bs.gain(l, k);
    rows[l].edge.assign(static_cast<std::size_t>(n), 0.0);
    for (int e = 0; e < n; ++e) rows[l].edge[e] = ss.gain(l, e) + ss.gain(l, n + e);
  }
  return rows;
}

inline RegretReport mc_regret(const BundleNetParams &params, std::span<const AuctionInstance> batch,
                              std::span<const Distribution> priors, const EvalOptions &opt, int workers = 0) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int samples = static_cast<int>(batch.size());
  const int chunk = std::max(1, opt.chunk);
  const int chunks = (samples + chunk - 1) / chunk;
  std::vector<SampleRegret> rows(batch.size());
  parallel_for(chunks, workers, [&](int cb, int ce) {
    for (int c = cb; c < ce; ++c) {
      const int begin = c * chunk;
      const int end = std::min(samples, begin + chunk);
      const auto part = bundlenet_sample_regret(params, batch.subspan(begin, end - begin), priors, opt,
                                                static_cast<std::uint64_t>(c));
      std::copy(part.begin(), part.end(), rows.begin() + begin);
    }
  });
  return aggregate(rows, batch.front().bundles(), batch);
}

inline RegretReport mc_regret(const Checkpoint &ck, const Setting &s, int samples, std::uint64_t seed,
                              const EvalOptions &opt, int workers = 0) {
  const auto batch = evaluation_batch(s, 0, samples, seed);
  const Distribution prior = s.prior();
  return mc_regret(ck.params, batch, std::span(&prior, 1), opt, workers);
}

inline nlohmann::json to_json(const RegretReport &r) {
  return {{"samples", r.samples},
          {"regret_2n", r.regret_2n},
          {"regret_per_bidder", r.regret_per_bidder},
          {"edge_regret", std::vector<double>(r.edge_regret.data(), r.edge_regret.data() + r.edge_regret.size())},
          {"bidder_regret",
           std::vector<double>(r.bidder_regret.data(), r.bidder_regret.data() + r.bidder_regret.size())},
          {"edge_sum", r.edge_sum},
          {"lemma_excess", r.lemma_excess},
          {"lemma_violations", r.lemma_violations}};
}

// ---------------------------------------------------------------------------
// Allocation grids for two-bundle fixtures

enum class GridFixture { SharedSupplier, DisjointPairs };

inline std::string to_string(GridFixture f) {
  return f == GridFixture::SharedSupplier ? "shared_supplier" : "disjoint_pairs";
}

inline GridFixture grid_fixture_from_string(const std::string &s) {
  if (s == "shared_supplier") return GridFixture::SharedSupplier;
  if (s == "disjoint_pairs") return GridFixture::DisjointPairs;
  throw std::invalid_argument("unknown grid fixture '" + s + "'");
}

/// Shared supplier {(r1,s1),(r2,s1)}: s1 is fixed, x = r1, y = r2.
/// Disjoint {(r1,s1),(r2,s2)}: r2 = s2 = fixed, x = r1, y = s1.
inline AuctionInstance grid_instance(GridFixture f, double fixed, double x, double y) {
  if (f == GridFixture::SharedSupplier) return {MarketGraph::shared_supplier(), {x, y, fixed}, {1.0}, 0.0};
  return {MarketGraph::disjoint_pairs(), {x, fixed, y, fixed}, {1.0}, 0.0};
}

struct AllocationGrid {
  GridFixture fixture = GridFixture::SharedSupplier;
  double fixed = 0.0;
  std::vector<double> axis;
  Matrix win;  // win(i, j): probability that e1 takes the slot at x = axis[i], y = axis[j]
  std::vector<std::optional<double>> boundary;  // exact only: smallest winning x per y
};

inline AllocationGrid exact_allocation_grid(GridFixture f, double fixed, const Distribution &prior,
                                            int resolution = 101) {
  AllocationGrid g{f, fixed, grid_points(0.0, 1.0, resolution), Matrix::Zero(resolution, resolution), {}};
  const std::span<const Distribution> priors(&prior, 1);
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      g.win(i, j) = optimal_allocate(grid_instance(f, fixed, g.axis[i], g.axis[j]), priors).allocation(0, 0);
    }
    g.boundary.push_back(critical_value(grid_instance(f, fixed, 0.0, g.axis[j]), priors, 0));
  }
  return g;
}

inline AllocationGrid learned_allocation_grid(const BundleNetParams &params, GridFixture f, double fixed,
                                              int resolution = 101) {
  AllocationGrid g{f, fixed, grid_points(0.0, 1.0, resolution), Matrix::Zero(resolution, resolution), {}};
  std::vector<AuctionInstance> batch;
  batch.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) batch.push_back(grid_instance(f, fixed, g.axis[i], g.axis[j]));
  }
  const int n = 2;
  Matrix br(static_cast<Eigen::Index>(batch.size()), n), bs(static_cast<Eigen::Index>(batch.size()), n);
  for (std::size_t l = 0; l < batch.size(); ++l) {
    for (int e = 0; e < n; ++e) {
      br(static_cast<Eigen::Index>(l), e) = batch[l].value(e, Side::Retailer);
      bs(static_cast<Eigen::Index>(l), e) = batch[l].value(e, Side::Supplier);
    }
  }
  const BundleNetLayout layout(n, {1.0});
  diff::Tape tape;
  const BoundBundleNet net = bind(tape, params, false);
  const NetOutputs out = forward_bids(net, layout, tape.constant(br), tape.constant(bs));
  const Matrix &alloc = out.allocation.value();  // rows x n (m = 1)
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) g.win(i, j) = alloc(static_cast<Eigen::Index>(j) * resolution + i, 0);
  }
  return g;
}

/// Fraction of cells where a learned win probability lands on the other
/// side of 1/2 from the exact 0/1 outcome.
inline double grid_disagreement(const AllocationGrid &learned, const AllocationGrid &exact) {
  if (learned.win.rows() != exact.win.rows() || learned.win.cols() != exact.win.cols())
    throw std::invalid_argument("grid shapes differ");
  const double bad = ((learned.win - exact.win).array().abs() > 0.5).cast<double>().sum();
  return bad / static_cast<double>(exact.win.size());
}

/// Long format: fixture, fixed, x, y, win, plus the exact boundary x for
/// each y when present.
inline std::string grid_csv(const AllocationGrid &g) {
  std::string out = "fixture,fixed,x,y,win,boundary_x\n";
  char buf[256];
  for (std::size_t j = 0; j < g.axis.size(); ++j) {
    std::string bx;
    if (!g.boundary.empty()) {
      if (g.boundary[j]) {
        std::snprintf(buf, sizeof buf, "%.10g", *g.boundary[j]);
        bx = buf;
      } else {
        bx = "none";
      }
    }
    for (std::size_t i = 0; i < g.axis.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%.4g,%.10g,%.10g,%.10g,", to_string(g.fixture).c_str(), g.fixed,
                    g.axis[i], g.axis[j], g.win(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out += buf;
      out += bx;
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison table

struct TableRow {
  std::string setting;
  std::string mechanism;
  double revenue = 0.0;
  double stderr_ = 0.0;
  double regret = 0.0;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct TableBudget {
  int samples = 100000;
  int regret_samples = 200;
  int grid_points = 101;
  std::uint64_t seed = 2024;
  int workers = 0;
  EvalOptions eval;
};

/// Optimal (single slot only), RVCG with and without the zero floor, and
/// any checkpoints registered for the setting label. All rows of a setting
/// share the evaluation markets.
inline std::vector<TableRow> compare_table(std::span<const Setting> settings, const TableBudget &budget,
                                           const std::map<std::string, Checkpoint> &checkpoints = {}) {
  std::vector<TableRow> rows;
  for (const Setting &s : settings) {
    const Distribution prior = s.prior();
    const std::span<const Distribution> priors(&prior, 1);
    const auto regret_batch = evaluation_batch(s, 0, budget.regret_samples, budget.seed);
    std::vector<std::pair<std::string, Mechanism>> mechs;
    if (s.slots() == 1) mechs.emplace_back("optimal", optimal_mechanism(prior));
    mechs.emplace_back("rvcg", rvcg_mechanism(true));
    mechs.emplace_back("rvcg_unclamped", rvcg_mechanism(false));
    for (const auto &[name, mech] : mechs) {
      const RevenueEstimate rev = mc_revenue(mech, s, budget.samples, budget.seed, budget.workers);
      const double rgt = budget.regret_samples > 0
                             ? mechanism_regret(mech, regret_batch, priors, budget.grid_points, budget.workers).regret_2n
                             : 0.0;
      rows.push_back({s.label, name, rev.mean, rev.stderr_, rgt, budget.samples, budget.seed});
    }
    if (auto it = checkpoints.find(s.label); it != checkpoints.end()) {
      const BundleNetShape &shape = it->second.params.shape;
      if (shape.bundles != s.bundles || shape.slots != s.slots())
        throw std::invalid_argument("checkpoint for " + s.label + " has the wrong shape");
      const RevenueEstimate rev = mc_revenue(it->second.params, s, budget.samples, budget.seed, budget.workers);
      const double rgt = budget.regret_samples > 0
                             ? mc_regret(it->second.params, regret_batch, priors, budget.eval, budget.workers).regret_2n
                             : 0.0;
      rows.push_back({s.label, "bundlenet", rev.mean, rev.stderr_, rgt, budget.samples, budget.seed});
    }
  }
  return rows;
}

inline std::string table_csv(std::span<const TableRow> rows) {
  std::string out = "setting,mechanism,revenue,stderr,regret,samples,seed\n";
  char buf[512];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.6g,%.6g,%d,%llu\n", r.setting.c_str(), r.mechanism.c_str(),
                  r.revenue, r.stderr_, r.regret, r.samples, static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

}  // namespace jointad
