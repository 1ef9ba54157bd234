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
#include <string>
#include <deque>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace jointad::diff {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Every node holds a dense matrix; batched
/// computations keep one sample per row.
class Var {
 public:
  Var() = default;

  const Matrix &value() const;
  /// Accumulated gradient; empty when backward never reached this node.
  const Matrix &grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape *tape() const { return tape_; }
  int index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape *tape, int index) : tape_(tape), index_(index) {}

  Tape *tape_ = nullptr;
  int index_ = -1;
};

/// Reverse-mode tape over a fixed vocabulary of matrix operations.
///
/// Nodes are appended in evaluation order; backward() walks them in reverse
/// and each node pushes its gradient into its inputs. Nodes whose inputs are
/// all constants are marked as not needing gradients and skipped.
class Tape {
 public:
  using Backprop = std::function<void(Tape &, int)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr); }
  Var variable(Matrix value) { return push(std::move(value), true, nullptr); }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node that needs it.
  void backward(const Var &loss) {
    check(loss);
    if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("backward needs a scalar");
    for (auto &n : nodes_) n.grad.resize(0, 0);
    nodes_[loss.index_].grad = Matrix::Ones(1, 1);
    for (int i = loss.index_; i >= 0; --i) {
      Node &n = nodes_[i];
      if (n.needs_grad && n.backprop && n.grad.size() > 0) n.backprop(*this, i);
    }
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  const Matrix &value(int i) const { return nodes_[i].value; }
  const Matrix &grad(int i) const { return nodes_[i].grad; }
  bool needs_grad(const Var &v) const { return nodes_[v.index_].needs_grad; }

  // Op-implementation interface.

  Var record(Matrix value, std::initializer_list<Var> inputs, Backprop backprop) {
    bool needs = false;
    for (const Var &in : inputs) {
      check(in);
      needs = needs || nodes_[in.index_].needs_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backprop) : nullptr);
  }

  /// grad(target) += delta, skipping targets that need no gradient.
  template <typename Expr>
  void accumulate(const Var &target, const Expr &delta) {
    Node &n = nodes_[target.index_];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  void check(const Var &v) const {
    if (v.tape_ != this || v.index_ < 0 || static_cast<std::size_t>(v.index_) >= nodes_.size())
      throw std::invalid_argument("variable does not belong to this tape");
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backprop backprop;
  };

  Var push(Matrix value, bool needs_grad, Backprop backprop) {
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, std::move(backprop)});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  // deque keeps node references stable while the tape grows.
  std::deque<Node> nodes_;
};

inline const Matrix &Var::value() const { return tape_->value(index_); }
inline const Matrix &Var::grad() const { return tape_->grad(index_); }

namespace detail {
inline void same_shape(const Var &a, const Var &b, const char *what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(const Var &a, const Var &b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Tape &t = *a.tape();
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
    const Matrix &g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

inline Var add(const Var &a, const Var &b) {
  detail::same_shape(a, b, "add");
  Tape &t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape &t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, t.grad(self));
  });
}

inline Var sub(const Var &a, const Var &b) {
  detail::same_shape(a, b, "sub");
  Tape &t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape &t, int self) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, -t.grad(self));
  });
}

/// Elementwise product.
inline Var mul(const Var &a, const Var &b) {
  detail::same_shape(a, b, "mul");
  Tape &t = *a.tape();
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
    const Matrix &g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

inline Var scale(const Var &a, double s) {
  Tape &t = *a.tape();
  return t.record(a.value() * s, {a}, [a, s](Tape &t, int self) { t.accumulate(a, t.grad(self) * s); });
}

/// a + 1 * row, broadcasting a 1 x cols row over every row of a.
inline Var add_row(const Var &a, const Var &row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad row");
  Tape &t = *a.tape();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape &t, int self) {
    const Matrix &g = t.grad(self);
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

/// out(i, j) = a(i, j) * v(i) for a rows x 1 column v.
inline Var scale_rows(const Var &a, const Var &v) {
  if (v.cols() != 1 || v.rows() != a.rows()) throw std::invalid_argument("scale_rows: bad column");
  Tape &t = *a.tape();
  Matrix out = v.value().col(0).asDiagonal() * a.value();
  return t.record(std::move(out), {a, v}, [a, v](Tape &t, int self) {
    const Matrix &g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, v.value().col(0).asDiagonal() * g);
    if (t.needs_grad(v)) t.accumulate(v, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

// ---------------------------------------------------------------------------
// Activations

inline Var tanh(const Var &a) {
  Tape &t = *a.tape();
  // 1 - 2 / (1 + e^{2x}) vectorizes; the scalar libm tanh dominates otherwise.
  Matrix out = (1.0 - 2.0 / (1.0 + (2.0 * a.value().array()).exp())).matrix();
  return t.record(std::move(out), {a}, [a](Tape &t, int self) {
    const Matrix &y = t.value(self);
    t.accumulate(a, (t.grad(self).array() * (1.0 - y.array().square())).matrix());
  });
}

inline Var relu(const Var &a) {
  Tape &t = *a.tape();
  Matrix out = a.value().cwiseMax(0.0);
  return t.record(std::move(out), {a}, [a](Tape &t, int self) {
    t.accumulate(a, (a.value().array() > 0.0).select(t.grad(self), 0.0));
  });
}

inline Var sigmoid(const Var &a) {
  Tape &t = *a.tape();
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return t.record(std::move(out), {a}, [a](Tape &t, int self) {
    const auto y = t.value(self).array();
    t.accumulate(a, (t.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

inline Var square(const Var &a) {
  Tape &t = *a.tape();
  return t.record(a.value().array().square().matrix(), {a}, [a](Tape &t, int self) {
    t.accumulate(a, (2.0 * t.grad(self).array() * a.value().array()).matrix());
  });
}

/// Elementwise minimum. The subgradient goes to the smaller argument and is
/// split evenly on exact ties.
inline Var minimum(const Var &a, const Var &b) {
  detail::same_shape(a, b, "minimum");
  Tape &t = *a.tape();
  Matrix out = a.value().cwiseMin(b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
    const auto g = t.grad(self).array();
    const auto av = a.value().array();
    const auto bv = b.value().array();
    const Eigen::ArrayXXd wa = (av < bv).cast<double>() + 0.5 * (av == bv).cast<double>();
    if (t.needs_grad(a)) t.accumulate(a, (g * wa).matrix());
    if (t.needs_grad(b)) t.accumulate(b, (g * (1.0 - wa)).matrix());
  });
}

enum class SoftmaxAxis { AlongRow, AlongColumn };

/// Each row of `a` holds a grid_rows x grid_cols matrix in row-major order.
/// AlongRow normalizes every grid row (over its grid_cols entries); AlongColumn
/// normalizes every grid column (over its grid_rows entries). Max-subtracted.
inline Var softmax_grid(const Var &a, int grid_rows, int grid_cols, SoftmaxAxis axis) {
  if (a.cols() != static_cast<Eigen::Index>(grid_rows) * grid_cols)
    throw std::invalid_argument("softmax_grid: width does not match grid");
  Tape &t = *a.tape();
  const bool along_row = axis == SoftmaxAxis::AlongRow;
  const int groups = along_row ? grid_rows : grid_cols;
  const int len = along_row ? grid_cols : grid_rows;
  const int stride = along_row ? 1 : grid_cols;
  auto at = [=](int group, int k) { return along_row ? group * grid_cols + k : k * stride + group; };
  const Matrix &x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (int gi = 0; gi < groups; ++gi) {
      double mx = x(r, at(gi, 0));
      for (int k = 1; k < len; ++k) mx = std::max(mx, x(r, at(gi, k)));
      double z = 0.0;
      for (int k = 0; k < len; ++k) {
        const double e = std::exp(x(r, at(gi, k)) - mx);
        out(r, at(gi, k)) = e;
        z += e;
      }
      for (int k = 0; k < len; ++k) out(r, at(gi, k)) /= z;
    }
  }
  return t.record(std::move(out), {a}, [a, groups, len, at](Tape &t, int self) {
    const Matrix &y = t.value(self);
    const Matrix &g = t.grad(self);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      for (int gi = 0; gi < groups; ++gi) {
        double dot = 0.0;
        for (int k = 0; k < len; ++k) dot += g(r, at(gi, k)) * y(r, at(gi, k));
        for (int k = 0; k < len; ++k) dx(r, at(gi, k)) = y(r, at(gi, k)) * (g(r, at(gi, k)) - dot);
      }
    }
    t.accumulate(a, dx);
  });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

inline Var sum(const Var &a) {
  Tape &t = *a.tape();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Tape &t, int self) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), t.grad(self)(0, 0)));
  });
}

/// 1 x cols row of column means.
inline Var mean_rows(const Var &a) {
  Tape &t = *a.tape();
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return t.record(std::move(out), {a}, [a, inv](Tape &t, int self) {
    t.accumulate(a, (t.grad(self) * inv).replicate(a.rows(), 1));
  });
}

/// rows x 1 column of row sums.
inline Var row_sum(const Var &a) {
  Tape &t = *a.tape();
  Matrix out = a.value().rowwise().sum();
  return t.record(std::move(out), {a}, [a](Tape &t, int self) {
    t.accumulate(a, t.grad(self).replicate(1, a.cols()));
  });
}

/// Reinterprets the column-major storage with a new shape.
inline Var reshape(const Var &a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  Tape &t = *a.tape();
  Matrix out = a.value().reshaped(rows, cols);
  return t.record(std::move(out), {a}, [a](Tape &t, int self) {
    t.accumulate(a, t.grad(self).reshaped(a.rows(), a.cols()));
  });
}

inline Var vstack(const Var &a, const Var &b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("vstack: column mismatch");
  Tape &t = *a.tape();
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
    const Matrix &g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, g.topRows(a.rows()));
    if (t.needs_grad(b)) t.accumulate(b, g.bottomRows(b.rows()));
  });
}

inline Var hstack(const Var &a, const Var &b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("hstack: row mismatch");
  Tape &t = *a.tape();
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape &t, int self) {
    const Matrix &g = t.grad(self);
    if (t.needs_grad(a)) t.accumulate(a, g.leftCols(a.cols()));
    if (t.needs_grad(b)) t.accumulate(b, g.rightCols(b.cols()));
  });
}

/// `copies` vertical copies of a.
inline Var vtile(const Var &a, int copies) {
  Tape &t = *a.tape();
  Matrix out = a.value().replicate(copies, 1);
  return t.record(std::move(out), {a}, [a, copies](Tape &t, int self) {
    const Matrix &g = t.grad(self);
    Matrix acc = g.topRows(a.rows());
    for (int c = 1; c < copies; ++c) acc += g.middleRows(c * a.rows(), a.rows());
    t.accumulate(a, acc);
  });
}

inline Var row_block(const Var &a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw std::invalid_argument("row_block: out of range");
  Tape &t = *a.tape();
  Matrix out = a.value().middleRows(start, count);
  return t.record(std::move(out), {a}, [a, start, count](Tape &t, int self) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = t.grad(self);
    t.accumulate(a, full);
  });
}

inline Var operator+(const Var &a, const Var &b) { return add(a, b); }
inline Var operator-(const Var &a, const Var &b) { return sub(a, b); }
inline Var operator*(double s, const Var &a) { return scale(a, s); }

}  // namespace jointad::diff
