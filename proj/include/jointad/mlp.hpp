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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointad/autodiff.hpp"
#include "jointad/rng.hpp"

namespace jointad {

using diff::Matrix;

enum class Activation { Identity, Tanh, Relu, Sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string &s) {
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

struct DenseLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
  Activation activation = Activation::Identity;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  int input_width() const { return static_cast<int>(layers.front().weight.rows()); }
  int output_width() const { return static_cast<int>(layers.back().weight.cols()); }

  void collect(std::vector<Matrix *> &out) {
    for (auto &l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  }
};

/// Glorot-uniform weights, zero biases. `hidden` lists the hidden widths.
inline MlpParams make_mlp(int input, std::span<const int> hidden, int output,
                          Activation hidden_act, Activation output_act, Rng &rng) {
  MlpParams p;
  int prev = input;
  auto layer = [&](int width, Activation act) {
    if (prev < 1 || width < 1) throw std::invalid_argument("layer widths must be positive");
    const double bound = std::sqrt(6.0 / (prev + width));
    DenseLayer l{Matrix(prev, width), Matrix::Zero(1, width), act};
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = uniform(rng, -bound, bound);
    }
    p.layers.push_back(std::move(l));
    prev = width;
  };
  for (int w : hidden) layer(w, hidden_act);
  layer(output, output_act);
  return p;
}

inline diff::Var activate(const diff::Var &x, Activation act) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::Tanh: return diff::tanh(x);
    case Activation::Relu: return diff::relu(x);
    case Activation::Sigmoid: return diff::sigmoid(x);
  }
  return x;
}

/// Parameters placed on a tape, either as trainable leaves or constants.
struct BoundMlp {
  struct Layer {
    diff::Var weight;
    diff::Var bias;
    Activation activation;
  };
  std::vector<Layer> layers;

  diff::Var operator()(const diff::Var &input) const {
    diff::Var h = input;
    for (const auto &l : layers) h = activate(diff::add_row(diff::matmul(h, l.weight), l.bias), l.activation);
    return h;
  }

  void collect(std::vector<diff::Var> &out) const {
    for (const auto &l : layers) {
      out.push_back(l.weight);
      out.push_back(l.bias);
    }
  }
};

inline diff::Var bind_tensor(diff::Tape &tape, const Matrix &m, bool trainable) {
  return trainable ? tape.variable(m) : tape.constant(m);
}

inline BoundMlp bind(diff::Tape &tape, const MlpParams &p, bool trainable) {
  BoundMlp b;
  for (const auto &l : p.layers) {
    b.layers.push_back({bind_tensor(tape, l.weight, trainable), bind_tensor(tape, l.bias, trainable),
                        l.activation});
  }
  return b;
}

/// Batch forward pass (one sample per row) without gradient bookkeeping.
inline Matrix mlp_forward(const MlpParams &p, const Matrix &input) {
  diff::Tape tape;
  return bind(tape, p, false)(tape.constant(input)).value();
}

// ---------------------------------------------------------------------------
// Adam

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long steps = 0;
};

/// One bias-corrected Adam update in place. An empty gradient counts as zero.
inline void adam_step(AdamState &state, std::span<Matrix *const> params,
                      std::span<const Matrix> grads, const AdamOptions &opt) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: params/grads mismatch");
  if (state.first.empty()) {
    for (Matrix *p : params) {
      state.first.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first.size() != params.size()) throw std::invalid_argument("adam: state size mismatch");
  ++state.steps;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() == 0) {
      state.first[i] *= opt.beta1;
      state.second[i] *= opt.beta2;
    } else {
      if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols())
        throw std::invalid_argument("adam: gradient shape mismatch");
      state.first[i] = opt.beta1 * state.first[i] + (1.0 - opt.beta1) * grads[i];
      state.second[i] =
          opt.beta2 * state.second[i] + (1.0 - opt.beta2) * grads[i].cwiseProduct(grads[i]);
    }
    params[i]->array() -= opt.lr * (state.first[i].array() / c1) /
                          ((state.second[i].array() / c2).sqrt() + opt.eps);
  }
}

// ---------------------------------------------------------------------------
// Serialization. Doubles are written with round-trip precision, so a reload
// is bit-exact.

inline nlohmann::json matrix_to_json(const Matrix &m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const nlohmann::json &j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::invalid_argument("matrix data length does not match its shape");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[static_cast<std::size_t>(i * cols + j2)];
  }
  if (!m.allFinite()) throw std::invalid_argument("non-finite parameter in checkpoint");
  return m;
}

inline nlohmann::json mlp_to_json(const MlpParams &p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto &l : p.layers) {
    layers.push_back({{"weight", matrix_to_json(l.weight)},
                      {"bias", matrix_to_json(l.bias)},
                      {"activation", to_string(l.activation)}});
  }
  return layers;
}

inline MlpParams mlp_from_json(const nlohmann::json &j) {
  MlpParams p;
  for (const auto &l : j) {
    p.layers.push_back({matrix_from_json(l.at("weight")), matrix_from_json(l.at("bias")),
                        activation_from_string(l.at("activation").get<std::string>())});
  }
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto &l = p.layers[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols())
      throw std::invalid_argument("bias shape does not match weight");
    if (i > 0 && p.layers[i - 1].weight.cols() != l.weight.rows())
      throw std::invalid_argument("layer dimensions do not chain");
  }
  if (p.layers.empty()) throw std::invalid_argument("empty network");
  return p;
}

}  // namespace jointad
