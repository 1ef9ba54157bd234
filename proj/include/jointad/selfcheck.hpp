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

// Property suites shared by `jointad selftest` and the acceptance runner.
// Each returns a summary instead of asserting so callers can report it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "jointad/evaluation.hpp"
#include "jointad/optimal_mechanism.hpp"
#include "jointad/training.hpp"

namespace jointad {

struct CheckSummary {
  bool pass = true;
  long cases = 0;
  long failures = 0;
  double worst = 0.0;  // check-specific magnitude (gain, excess, error)
  std::string first_failure;

  void fail(const std::string &what) {
    pass = false;
    if (failures++ == 0) first_failure = what;
  }
};

/// Random single-slot instance with 1..5 bundles.
inline AuctionInstance random_single_slot(const Distribution &d, Rng &rng) {
  const int n = 1 + static_cast<int>(uniform_index(rng, 5));
  MarketGraph g = sample_graph(n, rng);
  return sample_instance(std::move(g), d, {1.0}, 0.0, rng);
}

/// optimal_allocate against brute-force virtual surplus, plus flip tests:
/// every bidder wins (through some incident bundle) at critical + eps and
/// loses at critical - eps, and the truthful outcome agrees with its
/// critical value.
inline CheckSummary check_exact_oracle(const Distribution &d, int instances, std::uint64_t seed,
                                       double eps = 1e-6) {
  CheckSummary s;
  const std::span<const Distribution> priors(&d, 1);
  Rng rng(seed);
  auto wins = [&](const AuctionInstance &inst, BidderId id) {
    const int w = optimal_allocate(inst, priors).winner_of_slot(0);
    if (w < 0) return false;
    const Bundle &b = inst.graph.bundle(w);
    return b.retailer == id || b.supplier == id;
  };
  for (int t = 0; t < instances; ++t) {
    const AuctionInstance inst = random_single_slot(d, rng);
    ++s.cases;
    const SurplusChoice brute = brute_force_virtual_surplus(inst, priors);
    const int w = optimal_allocate(inst, priors).winner_of_slot(0);
    if ((w < 0) != !brute.bundle.has_value() || (w >= 0 && w != *brute.bundle)) {
      s.fail("allocation differs from brute force at instance " + std::to_string(t));
      continue;
    }
    for (BidderId id = 0; id < inst.graph.bidder_count(); ++id) {
      const auto crit = critical_value(inst, priors, id);
      const bool truthful_win = wins(inst, id);
      if (!crit) {
        if (truthful_win) s.fail("winner without a critical value at instance " + std::to_string(t));
        continue;
      }
      if (std::abs(inst.value(id) - *crit) > 1e-9 && truthful_win != (inst.value(id) > *crit))
        s.fail("outcome disagrees with critical value at instance " + std::to_string(t));
      AuctionInstance lie = inst;
      if (*crit + eps <= d.upper()) {
        lie.values[id] = *crit + eps;
        if (!wins(lie, id)) s.fail("critical + eps loses at instance " + std::to_string(t));
      }
      if (*crit - eps >= d.lower()) {
        lie.values[id] = *crit - eps;
        if (wins(lie, id)) s.fail("critical - eps wins at instance " + std::to_string(t));
      }
    }
  }
  return s;
}

/// Largest utility gain (whole or per bundle) any bidder of the exact
/// mechanism finds on a report grid.
inline CheckSummary check_exact_ic(const Distribution &d, int instances, int points, std::uint64_t seed,
                                   double tol = 1e-9) {
  CheckSummary s;
  const std::span<const Distribution> priors(&d, 1);
  const Mechanism mech = optimal_mechanism(d);
  Rng rng(seed);
  for (int t = 0; t < instances; ++t) {
    const AuctionInstance inst = random_single_slot(d, rng);
    const SampleRegret r = grid_regret(mech, inst, priors, points);
    ++s.cases;
    double worst = 0.0;
    for (double g : r.bidder) worst = std::max(worst, g);
    for (double g : r.edge) worst = std::max(worst, g);
    s.worst = std::max(s.worst, worst);
    if (worst > tol) s.fail("gain " + std::to_string(worst) + " at instance " + std::to_string(t));
  }
  return s;
}

inline BundleNetShape check_shape(int n, int m, int width) {
  BundleNetShape s;
  s.bundles = n;
  s.slots = m;
  s.alloc_hidden = {width, width};
  s.feature_width = width;
  s.pay_hidden = {width, width};
  return s;
}

/// Sum of bidder regrets against the sum of edge regrets under the
/// evaluation search, per sample, for random networks.
inline CheckSummary check_regret_lemma(int draws, int batch_size, const EvalOptions &opt, std::uint64_t seed,
                                       double tol = 1e-6) {
  CheckSummary s;
  s.worst = -1e300;
  const Distribution u = Distribution::uniform();
  const std::span<const Distribution> priors(&u, 1);
  for (int d = 0; d < draws; ++d) {
    const std::uint64_t ds = derive_seed(seed, static_cast<std::uint64_t>(d));
    Rng rng(ds);
    const int n = 2 + static_cast<int>(uniform_index(rng, 2));
    const int m = 1 + static_cast<int>(uniform_index(rng, 2));
    Setting st;
    st.bundles = n;
    st.ctrs = m == 1 ? std::vector<double>{1.0} : std::vector<double>{1.0, 0.5};
    const auto params = BundleNetParams::init(check_shape(n, m, 32), derive_seed(ds, 1));
    const auto batch = evaluation_batch(st, 0, batch_size, derive_seed(ds, 2));
    const auto rows = bundlenet_sample_regret(params, batch, priors, opt, d);
    for (const auto &row : rows) {
      double b = 0.0, e = 0.0;
      for (double x : row.bidder) b += x;
      for (double x : row.edge) e += x;
      ++s.cases;
      s.worst = std::max(s.worst, b - e);
      if (b > e + tol) s.fail("bidder sum exceeds edge sum by " + std::to_string(b - e) + " in draw " + std::to_string(d));
    }
  }
  return s;
}

/// Feasibility and ex-post IR of random networks on random instances. The
/// weights are scaled up to push the softmaxes and sigmoids into saturation.
inline CheckSummary check_structure(int draws, std::uint64_t seed, double tol = 1e-12) {
  CheckSummary s;
  const Distribution u = Distribution::uniform();
  for (int d = 0; d < draws; ++d) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    const int n = 1 + static_cast<int>(uniform_index(rng, 5));
    const int m = 1 + static_cast<int>(uniform_index(rng, 5));
    std::vector<double> ctrs(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) ctrs[k] = 1.0 - static_cast<double>(k) / m;
    BundleNetParams p = BundleNetParams::init(check_shape(n, m, 16), rng());
    const double scale = uniform(rng, 1.0, 20.0);
    for (Matrix *t : p.tensors()) *t *= scale;
    const AuctionInstance inst = sample_market(n, u, ctrs, 0.0, rng());
    const AuctionOutcome o = mechanism_forward(p, inst);
    ++s.cases;
    const auto bad = invariant_violations(o, inst, tol);
    if (!bad.empty()) s.fail(bad.front() + " in draw " + std::to_string(d));
  }
  return s;
}

/// Central differences against reverse mode for the Lagrangian (parameters)
/// and for channel utilities (bids) on a width-4 network, n = 2, m = 1.
/// `worst` is the largest |g - fd| / (|fd| + 1e-5).
inline CheckSummary check_gradients(std::uint64_t seed, double rel = 1e-3) {
  CheckSummary s;
  const Distribution u = Distribution::uniform();
  const std::span<const Distribution> priors(&u, 1);
  Setting st;
  st.bundles = 2;
  BundleNetParams params = BundleNetParams::init(check_shape(2, 1, 4), derive_seed(seed, 1));
  const auto batch = evaluation_batch(st, 0, 16, derive_seed(seed, 2));
  const BundleNetLayout layout(2, {1.0});
  const ChannelPlan plan = plan_channels(batch, ChannelKind::BundleSide, priors);
  Rng rng(derive_seed(seed, 3));
  const Matrix mis = random_misreports(plan, rng);
  Eigen::VectorXd mu(2);
  mu << 0.5, 1.5;
  const double rho = 3.0;
  auto record = [&](double g, double fd, const std::string &what) {
    ++s.cases;
    const double err = std::abs(g - fd);
    s.worst = std::max(s.worst, err / (std::abs(fd) + 1e-5));
    if (err > rel * std::abs(fd) + 1e-7) s.fail(what);
  };

  std::vector<Matrix> grads;
  lagrangian_loss_grad(params, layout, plan, mis, mu, rho, grads);
  const auto tensors = params.tensors();
  const double h = 1e-6;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Matrix &w = *tensors[ti];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double keep = w.data()[i];
      w.data()[i] = keep + h;
      const double up = lagrangian_loss(params, batch, priors, mu, rho, mis).loss;
      w.data()[i] = keep - h;
      const double dn = lagrangian_loss(params, batch, priors, mu, rho, mis).loss;
      w.data()[i] = keep;
      record(grads[ti].data()[i], (up - dn) / (2 * h), "loss gradient, tensor " + std::to_string(ti));
    }
  }

  for (ChannelKind kind : {ChannelKind::BundleSide, ChannelKind::Bidder}) {
    const ChannelPlan cp = plan_channels(batch, kind, priors);
    Matrix m = random_misreports(cp, rng);
    // Keep central differences inside the support.
    m = m.cwiseMax(cp.lower + 1e-3 * cp.active).cwiseMin(cp.upper - 1e-3 * cp.active);
    auto utility = [&](const Matrix &x) {
      diff::Tape t;
      return channel_forward(bind(t, params, false), layout, cp, t.constant(x), false).misreport_utility.value();
    };
    diff::Tape t;
    const diff::Var v = t.variable(m);
    t.backward(diff::sum(channel_forward(bind(t, params, false), layout, cp, v, false).misreport_utility));
    const Matrix g = v.grad();
    for (Eigen::Index l = 0; l < m.rows(); ++l) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        if (cp.active(l, k) == 0.0) continue;
        Matrix a = m, b = m;
        a(l, k) += h;
        b(l, k) -= h;
        record(g(l, k), (utility(a)(l, k) - utility(b)(l, k)) / (2 * h), "utility gradient wrt bid");
      }
    }
  }
  return s;
}

}  // namespace jointad
