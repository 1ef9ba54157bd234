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
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointad/autodiff.hpp"
#include "jointad/bundlenet.hpp"
#include "jointad/distributions.hpp"
#include "jointad/market.hpp"
#include "jointad/mlp.hpp"
#include "jointad/rng.hpp"

namespace jointad {

// ---------------------------------------------------------------------------
// Misreport channels
//
// A channel is one misreport variable per sample. Every sample gets 2n
// channels:
//   BundleSide: channel e is the retailer of bundle e, channel n + e its
//               supplier; the channel is credited with u_i^e only.
//   Bidder:     channel k is bidder id k (inactive when the sample has fewer
//               bidders); the channel is credited with the whole u_i.
// A misreport moves the bidder's bid on every bundle it belongs to.

enum class ChannelKind { BundleSide, Bidder };

struct ChannelPlan {
  ChannelKind kind = ChannelKind::BundleSide;
  int samples = 0;
  int bundles = 0;
  int channels = 0;
  Matrix true_r;     // C x n, value of each bundle's retailer
  Matrix true_s;     // C x n
  Matrix lower;      // C x K support bounds of the channel's bidder
  Matrix upper;      // C x K
  Matrix active;     // C x K, 1 when the channel has a bidder
  Matrix base_r;     // KC x n, truthful bids with the channel bidder's entries zeroed
  Matrix base_s;     // KC x n
  Matrix mask_r;     // KC x n, 1 where the channel bidder's bid enters
  Matrix mask_s;     // KC x n
  Matrix select;     // KC x 2n, (edge, side) utilities credited to the channel
  std::vector<BidderId> bidder;  // C*K (sample-major), -1 when inactive

  BidderId bidder_of(int sample, int channel) const {
    return bidder[static_cast<std::size_t>(sample) * channels + channel];
  }
};

inline ChannelPlan plan_channels(std::span<const AuctionInstance> batch, ChannelKind kind,
                                 std::span<const Distribution> priors) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  ChannelPlan p;
  p.kind = kind;
  p.samples = static_cast<int>(batch.size());
  p.bundles = batch.front().bundles();
  const int C = p.samples;
  const int n = p.bundles;
  const int K = 2 * n;
  p.channels = K;
  p.true_r.resize(C, n);
  p.true_s.resize(C, n);
  p.lower = Matrix::Zero(C, K);
  p.upper = Matrix::Zero(C, K);
  p.active = Matrix::Zero(C, K);
  p.base_r.resize(K * C, n);
  p.base_s.resize(K * C, n);
  p.mask_r = Matrix::Zero(K * C, n);
  p.mask_s = Matrix::Zero(K * C, n);
  p.select = Matrix::Zero(K * C, 2 * n);
  p.bidder.assign(static_cast<std::size_t>(C) * K, -1);
  for (int l = 0; l < C; ++l) {
    const AuctionInstance &inst = batch[l];
    if (inst.bundles() != n || inst.slots() != batch.front().slots())
      throw std::invalid_argument("batch mixes settings");
    for (int e = 0; e < n; ++e) {
      p.true_r(l, e) = inst.value(e, Side::Retailer);
      p.true_s(l, e) = inst.value(e, Side::Supplier);
    }
  }
  for (int k = 0; k < K; ++k) {
    p.base_r.middleRows(k * C, C) = p.true_r;
    p.base_s.middleRows(k * C, C) = p.true_s;
    for (int l = 0; l < C; ++l) {
      const MarketGraph &g = batch[l].graph;
      BidderId id = -1;
      if (kind == ChannelKind::BundleSide) {
        id = g.member(k % n, k < n ? Side::Retailer : Side::Supplier);
      } else if (k < g.bidder_count()) {
        id = k;
      }
      p.bidder[static_cast<std::size_t>(l) * K + k] = id;
      if (id < 0) continue;
      const bool retailer = g.is_retailer(id);
      const int row = k * C + l;
      for (int e : g.incident_bundles(id)) {
        if (retailer) {
          p.mask_r(row, e) = 1.0;
          p.base_r(row, e) = 0.0;
        } else {
          p.mask_s(row, e) = 1.0;
          p.base_s(row, e) = 0.0;
        }
        if (kind == ChannelKind::Bidder) p.select(row, retailer ? e : n + e) = 1.0;
      }
      if (kind == ChannelKind::BundleSide) p.select(row, k) = 1.0;
      const Distribution &d = prior_of(priors, id);
      p.lower(l, k) = d.lower();
      p.upper(l, k) = d.upper();
      p.active(l, k) = 1.0;
    }
  }
  return p;
}

inline void clamp_misreports(const ChannelPlan &plan, Matrix &misreports) {
  misreports = misreports.cwiseMax(plan.lower).cwiseMin(plan.upper);
}

/// Fresh uniform draw in each channel bidder's support.
inline Matrix random_misreports(const ChannelPlan &plan, Rng &rng) {
  Matrix m(plan.samples, plan.channels);
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    for (Eigen::Index l = 0; l < m.rows(); ++l) m(l, k) = uniform(rng, plan.lower(l, k), plan.upper(l, k));
  }
  return m;
}

/// Truthful bids as misreports (zero gain by construction).
inline Matrix truthful_misreports(const ChannelPlan &plan, std::span<const AuctionInstance> batch) {
  Matrix m = Matrix::Zero(plan.samples, plan.channels);
  for (int l = 0; l < plan.samples; ++l) {
    for (int k = 0; k < plan.channels; ++k) {
      const BidderId id = plan.bidder_of(l, k);
      if (id >= 0) m(l, k) = batch[l].value(id);
    }
  }
  return m;
}

struct ChannelForward {
  diff::Var misreport_utility;  // C x K
  diff::Var truthful_utility;   // C x K, only with truth rows
  diff::Var revenue;            // 1 x 1 mean total payment, only with truth rows
};

/// One stacked forward pass: optionally the C truthful rows, then one block of
/// C rows per channel with that channel's misreport substituted.
inline ChannelForward channel_forward(const BoundBundleNet &net, const BundleNetLayout &layout,
                                      const ChannelPlan &plan, const diff::Var &misreports,
                                      bool with_truth) {
  using namespace diff;
  Tape &t = *misreports.tape();
  const int C = plan.samples;
  const int K = plan.channels;
  const int n = plan.bundles;
  if (misreports.rows() != C || misreports.cols() != K) throw std::invalid_argument("misreport shape");
  const int blocks = K + (with_truth ? 1 : 0);

  Var column = reshape(misreports, static_cast<Eigen::Index>(K) * C, 1);
  Matrix base_r = plan.base_r;
  Matrix base_s = plan.base_s;
  Matrix mask_r = plan.mask_r;
  Matrix mask_s = plan.mask_s;
  if (with_truth) {
    column = vstack(t.constant(Matrix::Zero(C, 1)), column);
    base_r = Matrix(blocks * C, n);
    base_r << plan.true_r, plan.base_r;
    base_s = Matrix(blocks * C, n);
    base_s << plan.true_s, plan.base_s;
    mask_r = Matrix::Zero(blocks * C, n);
    mask_r.bottomRows(K * C) = plan.mask_r;
    mask_s = Matrix::Zero(blocks * C, n);
    mask_s.bottomRows(K * C) = plan.mask_s;
  }
  const Var bids_r = t.constant(std::move(base_r)) + scale_rows(t.constant(std::move(mask_r)), column);
  const Var bids_s = t.constant(std::move(base_s)) + scale_rows(t.constant(std::move(mask_s)), column);
  const NetOutputs out = forward_bids(net, layout, bids_r, bids_s);

  const Var value_r = t.constant(plan.true_r.replicate(blocks, 1));
  const Var value_s = t.constant(plan.true_s.replicate(blocks, 1));
  const Var utility = hstack(mul(value_r, out.allocated_ctr) - out.retailer_pay,
                             mul(value_s, out.allocated_ctr) - out.supplier_pay);
  const Var select = t.constant(plan.select);

  ChannelForward res;
  const Var channel_rows = with_truth ? row_block(utility, C, static_cast<Eigen::Index>(K) * C) : utility;
  res.misreport_utility = reshape(row_sum(mul(channel_rows, select)), C, K);
  if (with_truth) {
    const Var truth = row_block(utility, 0, C);
    res.truthful_utility = reshape(row_sum(mul(vtile(truth, K), select)), C, K);
    res.revenue = scale(sum(row_block(out.retailer_pay, 0, C)) + sum(row_block(out.supplier_pay, 0, C)),
                        1.0 / C);
  }
  return res;
}

/// Per-channel regret: mean over samples of the floored utility gain.
inline diff::Var channel_regret(const ChannelForward &f) {
  return diff::mean_rows(diff::relu(f.misreport_utility - f.truthful_utility));
}

/// 2n x n matrix folding (retailer, supplier) channel regrets into bundles.
inline Matrix side_pair_sum(int n) {
  Matrix m = Matrix::Zero(2 * n, n);
  for (int e = 0; e < n; ++e) {
    m(e, e) = 1.0;
    m(n + e, e) = 1.0;
  }
  return m;
}

struct AscentOptions {
  int steps = 25;
  double rate = 0.05;
};

/// Projected gradient ascent: x <- clamp(x + rate * grad(x), lower, upper).
inline Matrix projected_ascent(Matrix x, const Matrix &lower, const Matrix &upper,
                               const std::function<Matrix(const Matrix &)> &grad, const AscentOptions &opt) {
  x = x.cwiseMax(lower).cwiseMin(upper);
  for (int step = 0; step < opt.steps; ++step) {
    x += opt.rate * grad(x);
    x = x.cwiseMax(lower).cwiseMin(upper);
  }
  return x;
}

/// Ascent on each channel's credited utility; every variable has its own
/// objective, so one backward pass of the sum yields all of them.
inline Matrix misreport_ascent(const BundleNetParams &params, const BundleNetLayout &layout,
                               const ChannelPlan &plan, Matrix misreports, const AscentOptions &opt) {
  const auto grad = [&](const Matrix &m) -> Matrix {
    diff::Tape tape;
    const BoundBundleNet net = bind(tape, params, false);
    const diff::Var v = tape.variable(m);
    tape.backward(diff::sum(channel_forward(net, layout, plan, v, false).misreport_utility));
    return v.grad();
  };
  return projected_ascent(std::move(misreports), plan.lower, plan.upper, grad, opt);
}

/// Per-edge regret rgt^e on a batch at the supplied misreports (C x 2n,
/// BundleSide channels).
inline Eigen::VectorXd bundle_regret(const BundleNetParams &params,
                                     std::span<const AuctionInstance> batch,
                                     std::span<const Distribution> priors,
                                     const Matrix &misreports) {
  const ChannelPlan plan = plan_channels(batch, ChannelKind::BundleSide, priors);
  const BundleNetLayout layout(plan.bundles, batch.front().ctrs);
  diff::Tape tape;
  const BoundBundleNet net = bind(tape, params, false);
  const ChannelForward f = channel_forward(net, layout, plan, tape.constant(misreports), true);
  const Matrix per_channel = channel_regret(f).value();
  return (per_channel * side_pair_sum(plan.bundles)).transpose();
}

/// Per-bidder-channel regret after an independent misreport ascent from a
/// random start. Entry k is bidder id k (zero where the sample lacks it).
inline Eigen::VectorXd bidder_regret(const BundleNetParams &params,
                                     std::span<const AuctionInstance> batch,
                                     std::span<const Distribution> priors,
                                     const AscentOptions &opt, std::uint64_t seed) {
  const ChannelPlan plan = plan_channels(batch, ChannelKind::Bidder, priors);
  const BundleNetLayout layout(plan.bundles, batch.front().ctrs);
  Rng rng(seed);
  const Matrix mis = misreport_ascent(params, layout, plan, random_misreports(plan, rng), opt);
  diff::Tape tape;
  const BoundBundleNet net = bind(tape, params, false);
  const ChannelForward f = channel_forward(net, layout, plan, tape.constant(mis), true);
  return channel_regret(f).value().transpose();
}

struct LossTerms {
  double loss = 0.0;
  double revenue = 0.0;
  Eigen::VectorXd regret;  // per edge
};

namespace detail {

inline LossTerms lagrangian_terms(const BoundBundleNet &net, const BundleNetLayout &layout,
                                  const ChannelPlan &plan, const Matrix &misreports,
                                  const Eigen::VectorXd &multipliers, double rho, diff::Var *loss_out) {
  using namespace diff;
  Tape &t = *net.row_head.tape();
  const int n = plan.bundles;
  if (multipliers.size() != n) throw std::invalid_argument("one multiplier per bundle expected");
  const ChannelForward f = channel_forward(net, layout, plan, t.constant(misreports), true);
  const Var regret = matmul(channel_regret(f), t.constant(side_pair_sum(n)));  // 1 x n
  const Var mu = t.constant(multipliers.transpose());
  const Var loss = scale(f.revenue, -1.0) + sum(mul(mu, regret)) + scale(sum(square(regret)), 0.5 * rho);
  if (loss_out) *loss_out = loss;
  return {loss.value()(0, 0), f.revenue.value()(0, 0), regret.value().transpose()};
}

}  // namespace detail

/// L = -mean revenue + sum_e mu_e rgt^e + rho/2 sum_e (rgt^e)^2.
inline LossTerms lagrangian_loss(const BundleNetParams &params, std::span<const AuctionInstance> batch,
                                 std::span<const Distribution> priors,
                                 const Eigen::VectorXd &multipliers, double rho,
                                 const Matrix &misreports) {
  const ChannelPlan plan = plan_channels(batch, ChannelKind::BundleSide, priors);
  const BundleNetLayout layout(plan.bundles, batch.front().ctrs);
  diff::Tape tape;
  return detail::lagrangian_terms(bind(tape, params, false), layout, plan, misreports, multipliers,
                                  rho, nullptr);
}

/// Same as lagrangian_loss and fills `grads` in BundleNetParams::tensors()
/// order.
inline LossTerms lagrangian_loss_grad(const BundleNetParams &params, const BundleNetLayout &layout,
                                      const ChannelPlan &plan, const Matrix &misreports,
                                      const Eigen::VectorXd &multipliers, double rho,
                                      std::vector<Matrix> &grads) {
  diff::Tape tape;
  const BoundBundleNet net = bind(tape, params, true);
  diff::Var loss;
  LossTerms terms = detail::lagrangian_terms(net, layout, plan, misreports, multipliers, rho, &loss);
  tape.backward(loss);
  grads.clear();
  for (const diff::Var &leaf : net.leaves()) grads.push_back(leaf.grad());
  return terms;
}

// ---------------------------------------------------------------------------
// Training loop

/// Experimental setting: value prior, bundle count and slot CTRs.
struct Setting {
  std::string label;
  std::string distribution = "u01";
  int bundles = 2;
  std::vector<double> ctrs{1.0};
  double reserve = 0.0;

  int slots() const { return static_cast<int>(ctrs.size()); }
  Distribution prior() const { return Distribution::from_id(distribution); }
};

struct TrainConfig {
  int train_samples = 20000;
  int batch_size = 128;
  int passes = 30;
  int ascent_steps = 25;
  double ascent_rate = 0.05;
  double learning_rate = 1e-3;
  double rho_initial = 1.0;
  double rho_increment = 5.0;
  int rho_every_passes = 2;
  int multiplier_period = 20;
  double multiplier_initial = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (train_samples < 1 || batch_size < 1 || passes < 1)
      throw std::invalid_argument("sample, batch and pass counts must be positive");
    if (batch_size > train_samples) throw std::invalid_argument("batch larger than training set");
    if (ascent_steps < 1) throw std::invalid_argument("ascent steps must be at least 1");
    if (!(ascent_rate > 0.0) || !(learning_rate > 0.0) || !(rho_initial > 0.0))
      throw std::invalid_argument("rates must be positive");
    if (rho_increment < 0.0 || multiplier_initial < 0.0)
      throw std::invalid_argument("rho increment and initial multipliers must be nonnegative");
    if (multiplier_period < 1 || rho_every_passes < 1)
      throw std::invalid_argument("update periods must be at least 1");
  }

  double rho_at(int pass) const { return rho_initial + rho_increment * (pass / rho_every_passes); }
};

struct HistoryRow {
  long step = 0;
  double revenue = 0.0;
  double mean_regret = 0.0;
  double max_edge_regret = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<HistoryRow> history;        // one row per pass, pass means
  std::vector<std::vector<double>> multiplier_trace;  // after each update
};

/// Per-sample stream seeds keep data identical regardless of batching.
inline std::vector<AuctionInstance> sample_profiles(const Setting &s, int count, std::uint64_t seed) {
  const Distribution d = s.prior();
  std::vector<AuctionInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(sample_market(s.bundles, d, s.ctrs, s.reserve, derive_seed(seed, static_cast<std::uint64_t>(i))));
  }
  return out;
}

inline std::string history_csv(const std::vector<HistoryRow> &rows) {
  std::string out = "step,revenue,mean_regret,max_edge_regret,loss\n";
  char buf[256];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g\n", r.step, r.revenue, r.mean_regret,
                  r.max_edge_regret, r.loss);
    out += buf;
  }
  return out;
}

/// Augmented-Lagrangian training: per minibatch, fresh misreports are pushed
/// up by gradient ascent, then one Adam step is taken on L_rho; every
/// `multiplier_period` steps mu_e += rho * rgt^e at the updated parameters.
inline TrainResult train(const TrainConfig &cfg, const Setting &setting, const BundleNetShape &shape_in,
                         const std::function<void(int pass, const HistoryRow &, const Checkpoint &)> &on_pass = {}) {
  cfg.validate();
  BundleNetShape shape = shape_in;
  shape.bundles = setting.bundles;
  shape.slots = setting.slots();
  const Distribution prior = setting.prior();
  const std::span<const Distribution> priors(&prior, 1);

  TrainResult res;
  Checkpoint &ck = res.checkpoint;
  ck.params = BundleNetParams::init(shape, derive_seed(cfg.seed, 1));
  ck.distribution = setting.distribution;
  ck.ctrs = setting.ctrs;
  ck.reserve = setting.reserve;

  const std::vector<AuctionInstance> data = sample_profiles(setting, cfg.train_samples, derive_seed(cfg.seed, 2));
  Rng rng(derive_seed(cfg.seed, 3));
  const BundleNetLayout layout(setting.bundles, setting.ctrs);
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(setting.bundles, cfg.multiplier_initial);
  AdamState adam;
  const AdamOptions adam_opt{cfg.learning_rate};
  const AscentOptions ascent{cfg.ascent_steps, cfg.ascent_rate};
  const int batches = cfg.train_samples / cfg.batch_size;

  std::vector<int> order(static_cast<std::size_t>(cfg.train_samples));
  std::iota(order.begin(), order.end(), 0);
  std::vector<AuctionInstance> batch;
  std::vector<Matrix> grads;
  long step = 0;
  for (int pass = 0; pass < cfg.passes; ++pass) {
    const double rho = cfg.rho_at(pass);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
    HistoryRow acc;
    for (int b = 0; b < batches; ++b) {
      batch.clear();
      for (int j = 0; j < cfg.batch_size; ++j) batch.push_back(data[order[b * cfg.batch_size + j]]);
      const ChannelPlan plan = plan_channels(batch, ChannelKind::BundleSide, priors);
      const Matrix mis = misreport_ascent(ck.params, layout, plan, random_misreports(plan, rng), ascent);
      const LossTerms terms = lagrangian_loss_grad(ck.params, layout, plan, mis, mu, rho, grads);
      adam_step(adam, ck.params.tensors(), grads, adam_opt);
      ++step;
      if (step % cfg.multiplier_period == 0) {
        diff::Tape tape;
        const LossTerms after = detail::lagrangian_terms(bind(tape, ck.params, false), layout, plan, mis,
                                                         mu, rho, nullptr);
        mu += rho * after.regret;
        res.multiplier_trace.emplace_back(mu.data(), mu.data() + mu.size());
      }
      acc.revenue += terms.revenue;
      acc.mean_regret += terms.regret.mean();
      acc.max_edge_regret += terms.regret.maxCoeff();
      acc.loss += terms.loss;
    }
    acc.step = step;
    acc.revenue /= batches;
    acc.mean_regret /= batches;
    acc.max_edge_regret /= batches;
    acc.loss /= batches;
    res.history.push_back(acc);
    if (on_pass) {
      ck.multipliers.assign(mu.data(), mu.data() + mu.size());
      on_pass(pass, acc, ck);
    }
  }
  ck.multipliers.assign(mu.data(), mu.data() + mu.size());
  return res;
}

}  // namespace jointad
