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
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointad/bundlenet.hpp"
#include "jointad/evaluation.hpp"
#include "jointad/training.hpp"

namespace jointad {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Slot CTRs lambda_k = 1 - k/m, k = 0..m-1.
inline std::vector<double> default_ctrs(int slots) {
  std::vector<double> out;
  for (int k = 0; k < slots; ++k) out.push_back(1.0 - static_cast<double>(k) / slots);
  return out;
}

/// Labels: <dist>_<n> or <dist>_<n>x<m> with dist in U, E, N, LN.
inline Setting parse_setting(const std::string &label) {
  static const std::regex re(R"(^(U|E|N|LN)_(\d+)(?:x(\d+))?$)");
  std::smatch m;
  if (!std::regex_match(label, m, re)) throw config_error("bad setting label '" + label + "'");
  Setting s;
  s.label = label;
  const std::string d = m[1];
  s.distribution = d == "U" ? "u01" : d == "E" ? "texp2" : d == "N" ? "tnorm" : "tlognorm";
  s.bundles = std::stoi(m[2]);
  const int slots = m[3].matched ? std::stoi(m[3]) : 1;
  if (s.bundles < 1 || slots < 1) throw config_error("setting '" + label + "' needs positive sizes");
  s.ctrs = default_ctrs(slots);
  return s;
}

struct RunConfig {
  Setting setting;
  std::uint64_t seed = 1;
  int workers = 0;
  std::string out_dir = "runs";
  TrainConfig train;
  BundleNetShape network;
  EvalOptions eval;
  int eval_samples = 5000;
  int revenue_samples = 100000;
  int checkpoint_every = 0;  // passes; 0 writes only the final checkpoint
  int grid_resolution = 101;
  std::vector<double> grid_fixed{0.0, 0.25, 0.5, 0.75};
  std::vector<std::string> table_settings;
  int table_regret_samples = 200;
  std::string checkpoint;  // input checkpoint for eval/grid
};

namespace detail {

inline void reject_unknown(const nlohmann::json &j, const std::set<std::string> &known, const std::string &where) {
  if (!j.is_object()) throw config_error(where + " must be an object");
  for (const auto &[k, v] : j.items()) {
    if (!known.count(k)) throw config_error("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json &j, const char *key, T &out, const std::string &where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw config_error(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

/// Top-level keys: setting (required), seed, workers, out_dir, checkpoint,
/// checkpoint_every, eval_samples, revenue_samples, plus the sections
/// train, network, eval, grid and table. Unknown keys are errors.
inline RunConfig parse_config(const nlohmann::json &j) {
  using detail::read;
  detail::reject_unknown(j,
                         {"setting", "seed", "workers", "out_dir", "checkpoint", "checkpoint_every",
                          "eval_samples", "revenue_samples", "train", "network", "eval", "grid", "table",
                          "reserve"},
                         "config");
  if (!j.contains("setting")) throw config_error("missing required key 'setting'");
  RunConfig c;
  std::string label;
  read(j, "setting", label, "config");
  c.setting = parse_setting(label);
  read(j, "reserve", c.setting.reserve, "config");
  read(j, "seed", c.seed, "config");
  read(j, "workers", c.workers, "config");
  read(j, "out_dir", c.out_dir, "config");
  read(j, "checkpoint", c.checkpoint, "config");
  read(j, "checkpoint_every", c.checkpoint_every, "config");
  read(j, "eval_samples", c.eval_samples, "config");
  read(j, "revenue_samples", c.revenue_samples, "config");
  if (j.contains("train")) {
    const auto &t = j["train"];
    detail::reject_unknown(t,
                           {"train_samples", "batch_size", "passes", "ascent_steps", "ascent_rate",
                            "learning_rate", "rho_initial", "rho_increment", "rho_every_passes",
                            "multiplier_period", "multiplier_initial"},
                           "train");
    read(t, "train_samples", c.train.train_samples, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "passes", c.train.passes, "train");
    read(t, "ascent_steps", c.train.ascent_steps, "train");
    read(t, "ascent_rate", c.train.ascent_rate, "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "rho_initial", c.train.rho_initial, "train");
    read(t, "rho_increment", c.train.rho_increment, "train");
    read(t, "rho_every_passes", c.train.rho_every_passes, "train");
    read(t, "multiplier_period", c.train.multiplier_period, "train");
    read(t, "multiplier_initial", c.train.multiplier_initial, "train");
  }
  if (j.contains("network")) {
    const auto &n = j["network"];
    detail::reject_unknown(n, {"alloc_hidden", "feature_width", "pay_hidden", "activation"}, "network");
    read(n, "alloc_hidden", c.network.alloc_hidden, "network");
    read(n, "feature_width", c.network.feature_width, "network");
    read(n, "pay_hidden", c.network.pay_hidden, "network");
    if (n.contains("activation")) {
      try {
        c.network.activation = activation_from_string(n["activation"].get<std::string>());
      } catch (const std::exception &e) {
        throw config_error(std::string("network.activation: ") + e.what());
      }
    }
  }
  if (j.contains("eval")) {
    const auto &e = j["eval"];
    detail::reject_unknown(e, {"grid_points", "ascent_steps", "restarts", "ascent_rate", "seed", "chunk"}, "eval");
    read(e, "grid_points", c.eval.grid_points, "eval");
    read(e, "ascent_steps", c.eval.ascent_steps, "eval");
    read(e, "restarts", c.eval.restarts, "eval");
    read(e, "ascent_rate", c.eval.ascent_rate, "eval");
    read(e, "seed", c.eval.seed, "eval");
    read(e, "chunk", c.eval.chunk, "eval");
  }
  if (j.contains("grid")) {
    const auto &g = j["grid"];
    detail::reject_unknown(g, {"resolution", "fixed"}, "grid");
    read(g, "resolution", c.grid_resolution, "grid");
    read(g, "fixed", c.grid_fixed, "grid");
  }
  if (j.contains("table")) {
    const auto &t = j["table"];
    detail::reject_unknown(t, {"settings", "regret_samples"}, "table");
    read(t, "settings", c.table_settings, "table");
    read(t, "regret_samples", c.table_regret_samples, "table");
    for (const auto &l : c.table_settings) parse_setting(l);
  }
  c.train.seed = c.seed;
  try {
    c.train.validate();
  } catch (const std::invalid_argument &e) {
    throw config_error(std::string("train: ") + e.what());
  }
  if (c.eval_samples < 1 || c.revenue_samples < 1) throw config_error("sample counts must be positive");
  if (c.grid_resolution < 2) throw config_error("grid.resolution must be at least 2");
  if (c.eval.grid_points < 0 || c.eval.ascent_steps < 0 || c.eval.restarts < 0 || !(c.eval.ascent_rate > 0.0))
    throw config_error("eval options out of range");
  return c;
}

inline RunConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw config_error("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace jointad
