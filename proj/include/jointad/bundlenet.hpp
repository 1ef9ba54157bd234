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

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointad/autodiff.hpp"
#include "jointad/market.hpp"
#include "jointad/mlp.hpp"
#include "jointad/outcome.hpp"

namespace jointad {

/// Network sizes for one (bundles, slots) setting.
struct BundleNetShape {
  int bundles = 2;
  int slots = 1;
  std::vector<int> alloc_hidden{100, 100};
  int feature_width = 100;  // d_y
  std::vector<int> pay_hidden{100, 100};
  Activation activation = Activation::Tanh;

  int padded_cells() const { return (bundles + 1) * (slots + 1); }
};

/// Allocation trunk MLP(SB^E) -> Y, the two linear heads producing the padded
/// row/column logits, and the payment MLP(DB^E) -> sigmoid fractions.
struct BundleNetParams {
  BundleNetShape shape;
  MlpParams trunk;
  Matrix row_head;  // d_y x (n+1)(m+1)
  Matrix col_head;  // d_y x (n+1)(m+1)
  MlpParams payment;

  static BundleNetParams init(const BundleNetShape &shape, std::uint64_t seed) {
    if (shape.bundles < 1 || shape.slots < 1) throw std::invalid_argument("need bundles and slots");
    Rng rng(seed);
    BundleNetParams p;
    p.shape = shape;
    const int n = shape.bundles;
    const int m = shape.slots;
    p.trunk = make_mlp(n * m, shape.alloc_hidden, shape.feature_width, shape.activation,
                       shape.activation, rng);
    const double bound = std::sqrt(6.0 / (shape.feature_width + shape.padded_cells()));
    auto head = [&] {
      Matrix h(shape.feature_width, shape.padded_cells());
      for (Eigen::Index j = 0; j < h.cols(); ++j) {
        for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, j) = uniform(rng, -bound, bound);
      }
      return h;
    };
    p.row_head = head();
    p.col_head = head();
    p.payment = make_mlp(2 * n * m, shape.pay_hidden, 2 * n, shape.activation, Activation::Sigmoid, rng);
    return p;
  }

  std::vector<Matrix *> tensors() {
    std::vector<Matrix *> out;
    trunk.collect(out);
    out.push_back(&row_head);
    out.push_back(&col_head);
    payment.collect(out);
    return out;
  }
};

/// Constant matrices that wire per-edge CPC features through the network for
/// a given bundle count and CTR vector. Per-sample features are flattened
/// edge-major: column e*m + k holds slot k of bundle e.
struct BundleNetLayout {
  int bundles;
  int slots;
  std::vector<double> ctrs;
  Matrix cpc;          // n x nm; bids per edge -> X per edge
  Matrix spread_r;     // nm x 2nm; X_r -> its half of DB^E
  Matrix spread_s;     // nm x 2nm
  Matrix trim;         // (n+1)(m+1) x nm; drops the dummy row and column
  Matrix ctr_weight;   // nm x n; A -> x^e . lambda
  Matrix block_sum;    // nm x n; sums the m entries of each edge
  Matrix select_r;     // 2n x n; retailer half of the payment fractions
  Matrix select_s;     // 2n x n

  BundleNetLayout(int n, std::vector<double> lambda)
      : bundles(n), slots(static_cast<int>(lambda.size())), ctrs(std::move(lambda)) {
    AuctionInstance::validate_ctrs(ctrs);
    const int m = slots;
    cpc = Matrix::Zero(n, n * m);
    spread_r = Matrix::Zero(n * m, 2 * n * m);
    spread_s = Matrix::Zero(n * m, 2 * n * m);
    trim = Matrix::Zero((n + 1) * (m + 1), n * m);
    ctr_weight = Matrix::Zero(n * m, n);
    block_sum = Matrix::Zero(n * m, n);
    select_r = Matrix::Zero(2 * n, n);
    select_s = Matrix::Zero(2 * n, n);
    for (int e = 0; e < n; ++e) {
      for (int k = 0; k < m; ++k) {
        cpc(e, e * m + k) = ctrs[k];
        spread_r(e * m + k, e * 2 * m + k) = 1.0;
        spread_s(e * m + k, e * 2 * m + m + k) = 1.0;
        trim(e * (m + 1) + k, e * m + k) = 1.0;
        ctr_weight(e * m + k, e) = ctrs[k];
        block_sum(e * m + k, e) = 1.0;
      }
      select_r(e, e) = 1.0;
      select_s(n + e, e) = 1.0;
    }
  }
};

struct BoundBundleNet {
  BoundMlp trunk;
  diff::Var row_head;
  diff::Var col_head;
  BoundMlp payment;

  /// Trainable leaves in the same order as BundleNetParams::tensors().
  std::vector<diff::Var> leaves() const {
    std::vector<diff::Var> out;
    trunk.collect(out);
    out.push_back(row_head);
    out.push_back(col_head);
    payment.collect(out);
    return out;
  }
};

inline BoundBundleNet bind(diff::Tape &tape, const BundleNetParams &p, bool trainable) {
  return {bind(tape, p.trunk, trainable), bind_tensor(tape, p.row_head, trainable),
          bind_tensor(tape, p.col_head, trainable), bind(tape, p.payment, trainable)};
}

/// Batched network outputs, one sample per row.
struct NetOutputs {
  diff::Var padded;         // rows x (n+1)(m+1)
  diff::Var allocation;     // rows x nm
  diff::Var allocated_ctr;  // rows x n
  diff::Var fractions;      // rows x 2n, retailer block then supplier block
  diff::Var retailer_pay;   // rows x n
  diff::Var supplier_pay;   // rows x n
};

/// Forward pass from per-edge CPC features X_r, X_s (rows x nm each).
inline NetOutputs forward_features(const BoundBundleNet &net, const BundleNetLayout &layout,
                                   const diff::Var &xr, const diff::Var &xs) {
  using namespace diff;
  Tape &t = *xr.tape();
  const int n = layout.bundles;
  const int m = layout.slots;
  if (xr.cols() != n * m || xs.cols() != n * m) throw std::invalid_argument("feature width mismatch");
  const Var stacked = xr + xs;
  const Var divided = matmul(xr, t.constant(layout.spread_r)) + matmul(xs, t.constant(layout.spread_s));
  const Var y = net.trunk(stacked);
  const Var row_probs = softmax_grid(matmul(y, net.row_head), n + 1, m + 1, SoftmaxAxis::AlongRow);
  const Var col_probs = softmax_grid(matmul(y, net.col_head), n + 1, m + 1, SoftmaxAxis::AlongColumn);
  NetOutputs out;
  out.padded = minimum(row_probs, col_probs);
  out.allocation = matmul(out.padded, t.constant(layout.trim));
  out.allocated_ctr = matmul(out.allocation, t.constant(layout.ctr_weight));
  out.fractions = net.payment(divided);
  const Var block = t.constant(layout.block_sum);
  const Var value_r = matmul(mul(out.allocation, xr), block);
  const Var value_s = matmul(mul(out.allocation, xs), block);
  out.retailer_pay = mul(matmul(out.fractions, t.constant(layout.select_r)), value_r);
  out.supplier_pay = mul(matmul(out.fractions, t.constant(layout.select_s)), value_s);
  return out;
}

/// Forward pass from per-edge bids (rows x n each); X = b * lambda.
inline NetOutputs forward_bids(const BoundBundleNet &net, const BundleNetLayout &layout,
                               const diff::Var &retailer_bids, const diff::Var &supplier_bids) {
  diff::Tape &t = *retailer_bids.tape();
  const diff::Var cpc = t.constant(layout.cpc);
  return forward_features(net, layout, diff::matmul(retailer_bids, cpc),
                          diff::matmul(supplier_bids, cpc));
}

// ---------------------------------------------------------------------------
// Single-instance interface

/// Graph feature fusion for one instance. X rows are per edge.
struct FusedFeatures {
  Matrix retailer_cpc;  // n x m, X_r of each edge's retailer
  Matrix supplier_cpc;  // n x m
  Matrix divided;       // n x 2m, DB^e = [X_r, X_s]
  Matrix stacked;       // n x m, SB^e = X_r + X_s
};

inline FusedFeatures fuse_features(const AuctionInstance &inst) {
  const int n = inst.bundles();
  const int m = inst.slots();
  FusedFeatures f{Matrix(n, m), Matrix(n, m), Matrix(n, 2 * m), Matrix(n, m)};
  for (int e = 0; e < n; ++e) {
    for (int k = 0; k < m; ++k) {
      f.retailer_cpc(e, k) = inst.value(e, Side::Retailer) * inst.ctrs[k];
      f.supplier_cpc(e, k) = inst.value(e, Side::Supplier) * inst.ctrs[k];
    }
  }
  f.divided << f.retailer_cpc, f.supplier_cpc;
  f.stacked = f.retailer_cpc + f.supplier_cpc;
  return f;
}

namespace detail {
inline Matrix flatten_rows(const Matrix &m) {
  Matrix out(1, m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(0, i * m.cols() + j) = m(i, j);
  }
  return out;
}

inline Matrix unflatten_rows(const Matrix &row, Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = row(0, i * cols + j);
  }
  return out;
}

inline void check_shape(const BundleNetParams &p, const FusedFeatures &f) {
  if (f.stacked.rows() != p.shape.bundles || f.stacked.cols() != p.shape.slots)
    throw std::invalid_argument("features do not match the network's (bundles, slots)");
}

// Feature-level entry points take X directly, so the CTR-dependent parts of
// the layout are never read.
inline BundleNetLayout feature_layout(const BundleNetParams &p) {
  return BundleNetLayout(p.shape.bundles, std::vector<double>(p.shape.slots, 1.0));
}
}  // namespace detail

struct AllocationMatrix {
  Matrix probs;   // n x m
  Matrix padded;  // (n+1) x (m+1), before trimming
};

inline AllocationMatrix allocate_forward(const BundleNetParams &p, const FusedFeatures &f) {
  detail::check_shape(p, f);
  diff::Tape tape;
  const BoundBundleNet net = bind(tape, p, false);
  const NetOutputs out =
      forward_features(net, detail::feature_layout(p), tape.constant(detail::flatten_rows(f.retailer_cpc)),
                       tape.constant(detail::flatten_rows(f.supplier_cpc)));
  const int n = p.shape.bundles;
  const int m = p.shape.slots;
  return {detail::unflatten_rows(out.allocation.value(), n, m),
          detail::unflatten_rows(out.padded.value(), n + 1, m + 1)};
}

/// Payment fractions from the payment network applied to a given allocation:
/// p^e_side = frac^e_side * sum_k A_ek X_side[k].
inline AuctionOutcome payment_forward(const BundleNetParams &p, const FusedFeatures &f,
                                      const Matrix &allocation) {
  detail::check_shape(p, f);
  const int n = p.shape.bundles;
  const Matrix frac = mlp_forward(p.payment, detail::flatten_rows(f.divided));
  AuctionOutcome out{allocation, Matrix::Zero(n, 2)};
  for (int e = 0; e < n; ++e) {
    out.payments(e, 0) = frac(0, e) * allocation.row(e).dot(f.retailer_cpc.row(e));
    out.payments(e, 1) = frac(0, n + e) * allocation.row(e).dot(f.supplier_cpc.row(e));
  }
  return out;
}

inline AuctionOutcome mechanism_forward(const BundleNetParams &p, const AuctionInstance &inst) {
  const FusedFeatures f = fuse_features(inst);
  return payment_forward(p, f, allocate_forward(p, f).probs);
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json params_to_json(const BundleNetParams &p) {
  const auto &s = p.shape;
  return {{"shape",
           {{"bundles", s.bundles},
            {"slots", s.slots},
            {"alloc_hidden", s.alloc_hidden},
            {"feature_width", s.feature_width},
            {"pay_hidden", s.pay_hidden},
            {"activation", to_string(s.activation)}}},
          {"trunk", mlp_to_json(p.trunk)},
          {"row_head", matrix_to_json(p.row_head)},
          {"col_head", matrix_to_json(p.col_head)},
          {"payment", mlp_to_json(p.payment)}};
}

inline BundleNetParams params_from_json(const nlohmann::json &j) {
  BundleNetParams p;
  const auto &s = j.at("shape");
  p.shape.bundles = s.at("bundles").get<int>();
  p.shape.slots = s.at("slots").get<int>();
  p.shape.alloc_hidden = s.at("alloc_hidden").get<std::vector<int>>();
  p.shape.feature_width = s.at("feature_width").get<int>();
  p.shape.pay_hidden = s.at("pay_hidden").get<std::vector<int>>();
  p.shape.activation = activation_from_string(s.at("activation").get<std::string>());
  p.trunk = mlp_from_json(j.at("trunk"));
  p.row_head = matrix_from_json(j.at("row_head"));
  p.col_head = matrix_from_json(j.at("col_head"));
  p.payment = mlp_from_json(j.at("payment"));
  const int n = p.shape.bundles;
  const int m = p.shape.slots;
  if (p.trunk.input_width() != n * m || p.trunk.output_width() != p.shape.feature_width ||
      p.row_head.rows() != p.shape.feature_width || p.row_head.cols() != p.shape.padded_cells() ||
      p.col_head.rows() != p.row_head.rows() || p.col_head.cols() != p.row_head.cols() ||
      p.payment.input_width() != 2 * n * m || p.payment.output_width() != 2 * n)
    throw std::invalid_argument("checkpoint tensors do not match the declared shape");
  return p;
}

/// Trained network plus the setting it was trained for.
struct Checkpoint {
  BundleNetParams params;
  std::string distribution = "u01";
  std::vector<double> ctrs{1.0};
  double reserve = 0.0;
  std::vector<double> multipliers;
  nlohmann::json meta = nlohmann::json::object();
};

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_to_json(const Checkpoint &c) {
  return {{"format", "jointad-bundlenet"},
          {"version", kCheckpointVersion},
          {"distribution", c.distribution},
          {"ctrs", c.ctrs},
          {"v0", c.reserve},
          {"multipliers", c.multipliers},
          {"meta", c.meta},
          {"params", params_to_json(c.params)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json &j) {
  if (j.value("format", "") != "jointad-bundlenet") throw std::invalid_argument("not a checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::invalid_argument("unsupported checkpoint version");
  Checkpoint c;
  c.distribution = j.at("distribution").get<std::string>();
  c.ctrs = j.at("ctrs").get<std::vector<double>>();
  c.reserve = j.at("v0").get<double>();
  c.multipliers = j.at("multipliers").get<std::vector<double>>();
  c.meta = j.value("meta", nlohmann::json::object());
  c.params = params_from_json(j.at("params"));
  if (static_cast<int>(c.ctrs.size()) != c.params.shape.slots)
    throw std::invalid_argument("checkpoint CTRs do not match slot count");
  return c;
}

inline void save_checkpoint(const std::string &path, const Checkpoint &c) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os << checkpoint_to_json(c).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
  return checkpoint_from_json(nlohmann::json::parse(is));
}

}  // namespace jointad
