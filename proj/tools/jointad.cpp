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
// jointad: train, evaluate and compare joint-auction mechanisms.
//
// Exit status: 0 success, 1 selftest failure, 2 config error, 3 invariant
// violation, 4 any other error.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "jointad/jointad.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace jointad;

#ifndef JOINTAD_SOURCE_DIR
#define JOINTAD_SOURCE_DIR "."
#endif

namespace {

struct invariant_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  std::optional<std::string> setting;
  std::optional<std::string> checkpoint;
  std::vector<std::string> table_checkpoints;  // LABEL=path
  std::string instance;
  std::string mechanism = "bundlenet";
};

void add_common(CLI::App *cmd, Flags &f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--seed", f.seed, "top-level seed");
  cmd->add_option("--samples", f.samples, "sample-count override");
  cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  cmd->add_option("--setting", f.setting, "setting label, e.g. U_2, U_10x5, LN_8x5, N_3");
}

std::string git_describe() {
  const std::string cmd = std::string("git -C \"") + JOINTAD_SOURCE_DIR + "\" describe --always --dirty 2>/dev/null";
  std::string out;
  if (FILE *p = popen(cmd.c_str(), "r")) {
    char buf[256];
    while (std::fgets(buf, sizeof buf, p)) out += buf;
    pclose(p);
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

/// Config file merged with flag overrides. `samples_keys` lists the config
/// keys that --samples sets for this subcommand.
json merged_config(const Flags &f, const std::vector<std::string> &samples_keys) {
  json j = json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw config_error("cannot open config '" + f.config + "'");
    try {
      in >> j;
    } catch (const json::exception &e) {
      throw config_error("config '" + f.config + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw config_error("config must be a JSON object");
  }
  if (f.setting) j["setting"] = *f.setting;
  if (f.seed) j["seed"] = *f.seed;
  if (f.workers) j["workers"] = *f.workers;
  if (f.out_dir) j["out_dir"] = *f.out_dir;
  if (f.checkpoint) j["checkpoint"] = *f.checkpoint;
  if (f.samples) {
    for (const auto &key : samples_keys) {
      if (key == "train_samples") {
        j["train"]["train_samples"] = *f.samples;
      } else {
        j[key] = *f.samples;
      }
    }
  }
  return j;
}

/// Seed for evaluation markets; shared by eval, exact and table so their
/// rows are directly comparable.
std::uint64_t evaluation_seed(std::uint64_t seed) { return derive_seed(seed, 0x65a1); }

void write_text(const fs::path &p, const std::string &text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

class Run {
 public:
  Run(std::string command, json config) : command_(std::move(command)), config_(std::move(config)) {
    cfg_ = parse_config(config_);
    dir_ = cfg_.out_dir;
    fs::create_directories(dir_);
  }

  const RunConfig &cfg() const { return cfg_; }
  const fs::path &dir() const { return dir_; }

  void finish(const json &outputs) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::string canonical = json{{"command", command_}, {"config", config_}}.dump();
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
    const json manifest = {{"command", command_}, {"config", config_},       {"config_hash", hash},
                           {"seed", cfg_.seed},   {"git_describe", git_describe()}, {"wall_time_seconds", wall},
                           {"outputs", outputs}};
    write_text(dir_ / (command_ + "_manifest.json"), manifest.dump(2) + "\n");
  }

 private:
  std::string command_;
  json config_;
  RunConfig cfg_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Checkpoint require_checkpoint(const RunConfig &c) {
  if (c.checkpoint.empty()) throw config_error("a checkpoint is required (--checkpoint or \"checkpoint\")");
  Checkpoint ck = load_checkpoint(c.checkpoint);
  if (ck.params.shape.bundles != c.setting.bundles || ck.params.shape.slots != c.setting.slots())
    throw config_error("checkpoint shape does not match setting " + c.setting.label);
  if (ck.distribution != c.setting.distribution)
    throw config_error("checkpoint was trained on '" + ck.distribution + "', setting uses '" +
                       c.setting.distribution + "'");
  return ck;
}

int cmd_train(const Flags &f) {
  Run run("train", merged_config(f, {"train_samples"}));
  const RunConfig &c = run.cfg();
  std::fprintf(stderr, "training %s: %d samples, %d passes, batch %d\n", c.setting.label.c_str(),
               c.train.train_samples, c.train.passes, c.train.batch_size);
  std::vector<std::string> outputs{"checkpoint.json", "history.csv", "multipliers.csv"};
  const auto on_pass = [&](int pass, const HistoryRow &r, const Checkpoint &ck) {
    std::fprintf(stderr, "pass %d step %ld revenue %.5f mean_regret %.6f max_edge_regret %.6f loss %.5f\n",
                 pass + 1, r.step, r.revenue, r.mean_regret, r.max_edge_regret, r.loss);
    if (c.checkpoint_every > 0 && (pass + 1) % c.checkpoint_every == 0 && pass + 1 < c.train.passes) {
      const std::string name = "checkpoint_pass" + std::to_string(pass + 1) + ".json";
      save_checkpoint((run.dir() / name).string(), ck);
      outputs.push_back(name);
    }
  };
  TrainResult out = train(c.train, c.setting, c.network, on_pass);
  out.checkpoint.meta = {{"setting", c.setting.label}, {"seed", c.seed}};
  save_checkpoint((run.dir() / "checkpoint.json").string(), out.checkpoint);
  write_text(run.dir() / "history.csv", history_csv(out.history));
  std::string mult = "update";
  for (int e = 0; e < c.setting.bundles; ++e) mult += ",mu_" + std::to_string(e);
  mult += "\n";
  for (std::size_t i = 0; i < out.multiplier_trace.size(); ++i) {
    mult += std::to_string(i + 1);
    for (double m : out.multiplier_trace[i]) {
      char buf[64];
      std::snprintf(buf, sizeof buf, ",%.17g", m);
      mult += buf;
    }
    mult += "\n";
  }
  write_text(run.dir() / "multipliers.csv", mult);
  run.finish(outputs);
  return 0;
}

int cmd_eval(const Flags &f) {
  Run run("eval", merged_config(f, {"eval_samples", "revenue_samples"}));
  const RunConfig &c = run.cfg();
  const Checkpoint ck = require_checkpoint(c);
  const std::uint64_t seed = evaluation_seed(c.seed);
  const RevenueEstimate rev = mc_revenue(ck.params, c.setting, c.revenue_samples, seed, c.workers);
  const RegretReport rgt = mc_regret(ck, c.setting, c.eval_samples, seed, c.eval, c.workers);
  const json report = {{"setting", c.setting.label},
                       {"revenue", {{"mean", rev.mean}, {"stderr", rev.stderr_}, {"samples", rev.samples}}},
                       {"regret", to_json(rgt)},
                       {"seed", seed}};
  write_text(run.dir() / "eval.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  run.finish({"eval.json"});
  if (rgt.lemma_violations > 0)
    throw invariant_failure(std::to_string(rgt.lemma_violations) + " samples break sum_i rgt_i <= sum_e rgt^e");
  return 0;
}

int cmd_exact(const Flags &f) {
  Run run("exact", merged_config(f, {"revenue_samples"}));
  const RunConfig &c = run.cfg();
  const Distribution prior = c.setting.prior();
  const std::uint64_t seed = evaluation_seed(c.seed);
  std::atomic<long> violations{0};
  const auto checked = [&](Mechanism m) -> Mechanism {
    return [&violations, m](const AuctionInstance &inst) {
      AuctionOutcome o = m(inst);
      if (!invariant_violations(o, inst).empty()) ++violations;
      return o;
    };
  };
  std::vector<std::pair<std::string, Mechanism>> mechs;
  if (c.setting.slots() == 1) mechs.emplace_back("optimal", checked(optimal_mechanism(prior)));
  mechs.emplace_back("rvcg", checked(rvcg_mechanism(true)));
  mechs.emplace_back("rvcg_unclamped", rvcg_mechanism(false));  // may charge negative amounts
  json report = {{"setting", c.setting.label}, {"seed", seed}, {"mechanisms", json::object()}};
  for (const auto &[name, mech] : mechs) {
    const RevenueEstimate r = mc_revenue(mech, c.setting, c.revenue_samples, seed, c.workers);
    report["mechanisms"][name] = {{"revenue", r.mean}, {"stderr", r.stderr_}, {"samples", r.samples}};
  }
  report["invariant_violations"] = violations.load();
  write_text(run.dir() / "exact.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  run.finish({"exact.json"});
  if (violations > 0) throw invariant_failure(std::to_string(violations.load()) + " outcomes violate invariants");
  return 0;
}

int cmd_table(Flags f) {
  json j = merged_config(f, {"revenue_samples"});
  if (f.setting) {
    // --setting may list several labels.
    std::vector<std::string> labels;
    std::stringstream ss(*f.setting);
    for (std::string l; std::getline(ss, l, ',');) labels.push_back(l);
    j["setting"] = labels.front();
    j["table"]["settings"] = labels;
  } else if (!j.contains("setting") && j.contains("table") && j["table"].contains("settings") &&
             !j["table"]["settings"].empty()) {
    j["setting"] = j["table"]["settings"][0];
  }
  Run run("table", j);
  const RunConfig &c = run.cfg();
  std::vector<Setting> settings;
  if (c.table_settings.empty()) {
    settings.push_back(c.setting);
  } else {
    for (const auto &l : c.table_settings) settings.push_back(parse_setting(l));
  }
  std::map<std::string, Checkpoint> cks;
  for (const auto &arg : f.table_checkpoints) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos) throw config_error("--bundlenet expects LABEL=path, got '" + arg + "'");
    cks[arg.substr(0, eq)] = load_checkpoint(arg.substr(eq + 1));
  }
  TableBudget b;
  b.samples = c.revenue_samples;
  b.regret_samples = c.table_regret_samples;
  b.grid_points = c.eval.grid_points > 1 ? c.eval.grid_points : 101;
  b.seed = evaluation_seed(c.seed);
  b.workers = c.workers;
  b.eval = c.eval;
  const auto rows = compare_table(settings, b, cks);
  const std::string csv = table_csv(rows);
  write_text(run.dir() / "table.csv", csv);
  std::cout << csv;
  run.finish({"table.csv"});
  return 0;
}

int cmd_grid(const Flags &f) {
  Run run("grid", merged_config(f, {}));
  const RunConfig &c = run.cfg();
  const Distribution prior = c.setting.prior();
  std::optional<Checkpoint> ck;
  if (!c.checkpoint.empty()) {
    if (c.setting.bundles != 2 || c.setting.slots() != 1) throw config_error("grids need a two-bundle single-slot setting");
    ck = require_checkpoint(c);
  }
  json summary = {{"setting", c.setting.label}, {"resolution", c.grid_resolution}, {"grids", json::array()}};
  std::vector<std::string> outputs;
  for (GridFixture fx : {GridFixture::SharedSupplier, GridFixture::DisjointPairs}) {
    for (double fixed : c.grid_fixed) {
      char tag[64];
      std::snprintf(tag, sizeof tag, "%s_%.2f", to_string(fx).c_str(), fixed);
      const AllocationGrid exact = exact_allocation_grid(fx, fixed, prior, c.grid_resolution);
      const std::string exact_name = std::string("grid_exact_") + tag + ".csv";
      write_text(run.dir() / exact_name, grid_csv(exact));
      outputs.push_back(exact_name);
      json entry = {{"fixture", to_string(fx)}, {"fixed", fixed}, {"exact", exact_name}};
      if (ck) {
        const AllocationGrid learned = learned_allocation_grid(ck->params, fx, fixed, c.grid_resolution);
        const std::string name = std::string("grid_learned_") + tag + ".csv";
        write_text(run.dir() / name, grid_csv(learned));
        outputs.push_back(name);
        entry["learned"] = name;
        entry["disagreement"] = grid_disagreement(learned, exact);
      }
      summary["grids"].push_back(entry);
    }
  }
  write_text(run.dir() / "grid_summary.json", summary.dump(2) + "\n");
  outputs.push_back("grid_summary.json");
  std::cout << summary.dump(2) << "\n";
  run.finish(outputs);
  return 0;
}

int cmd_selftest(const Flags &f) {
  const std::uint64_t seed = f.seed.value_or(1);
  bool ok = true;
  const auto line = [&](const std::string &name, const CheckSummary &s) {
    ok = ok && s.pass;
    std::printf("%-40s %s  cases=%ld worst=%.3g%s%s\n", name.c_str(), s.pass ? "PASS" : "FAIL", s.cases, s.worst,
                s.pass ? "" : "  first: ", s.first_failure.c_str());
    std::fflush(stdout);
  };
  for (const char *id : {"u01", "texp2", "tnorm", "tlognorm"}) {
    const Distribution d = Distribution::from_id(id);
    line(std::string("exact oracle + flips, ") + id, check_exact_oracle(d, 1000, derive_seed(seed, 1)));
    line(std::string("exact IC grid, ") + id, check_exact_ic(d, 100, 51, derive_seed(seed, 2)));
  }
  EvalOptions quick;
  quick.grid_points = 11;
  quick.ascent_steps = 10;
  quick.restarts = 1;
  line("regret sum bound", check_regret_lemma(5, 64, quick, derive_seed(seed, 3)));
  line("network feasibility and IR", check_structure(200, derive_seed(seed, 4)));
  line("gradients vs finite differences", check_gradients(derive_seed(seed, 5)));
  return ok ? 0 : 1;
}

int cmd_forward(const Flags &f) {
  if (f.instance.empty()) throw config_error("--instance is required");
  std::ifstream in(f.instance);
  if (!in) throw config_error("cannot open instance '" + f.instance + "'");
  json j;
  in >> j;
  const AuctionInstance inst = j.get<AuctionInstance>();
  AuctionOutcome o;
  if (f.mechanism == "bundlenet") {
    if (!f.checkpoint) throw config_error("--checkpoint is required for the bundlenet mechanism");
    o = mechanism_forward(load_checkpoint(*f.checkpoint).params, inst);
  } else if (f.mechanism == "optimal" || f.mechanism == "rvcg" || f.mechanism == "rvcg_unclamped") {
    const Distribution d = Distribution::from_id(f.setting ? parse_setting(*f.setting).distribution : "u01");
    inst.validate(std::span(&d, 1));
    o = f.mechanism == "optimal" ? optimal_run(inst, std::span(&d, 1)) : vcg_price(inst, f.mechanism == "rvcg");
  } else {
    throw config_error("unknown mechanism '" + f.mechanism + "'");
  }
  std::cout << json{{"bundles", outcome_rows(o, inst.graph)}, {"revenue", o.revenue()}}.dump(2) << "\n";
  const auto bad = invariant_violations(o, inst);
  if (!bad.empty() && f.mechanism != "rvcg_unclamped") throw invariant_failure(bad.front());
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  tune_allocator();
  CLI::App app{"Joint advertising auctions: exact mechanisms, BundleNet training and evaluation"};
  app.require_subcommand(1);
  Flags f;
  auto *train_cmd = app.add_subcommand("train", "train BundleNet; writes checkpoint and history");
  auto *eval_cmd = app.add_subcommand("eval", "revenue and regret of a checkpoint");
  auto *exact_cmd = app.add_subcommand("exact", "Monte-Carlo revenue of the optimal mechanism and RVCG");
  auto *table_cmd = app.add_subcommand("table", "comparison table across settings as CSV");
  auto *grid_cmd = app.add_subcommand("grid", "two-bundle allocation grids");
  auto *selftest_cmd = app.add_subcommand("selftest", "property suites");
  auto *forward_cmd = app.add_subcommand("forward", "run one mechanism on an instance JSON");
  for (auto *cmd : {train_cmd, eval_cmd, exact_cmd, table_cmd, grid_cmd}) add_common(cmd, f);
  for (auto *cmd : {eval_cmd, grid_cmd}) cmd->add_option("--checkpoint", f.checkpoint, "checkpoint JSON");
  table_cmd->add_option("--bundlenet", f.table_checkpoints, "LABEL=checkpoint.json, repeatable");
  selftest_cmd->add_option("--seed", f.seed, "seed");
  forward_cmd->add_option("--instance", f.instance, "instance JSON")->required();
  forward_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint JSON");
  forward_cmd->add_option("--mechanism", f.mechanism, "bundlenet, optimal, rvcg or rvcg_unclamped");
  forward_cmd->add_option("--setting", f.setting, "setting label naming the value prior");
  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_cmd) return cmd_train(f);
    if (*eval_cmd) return cmd_eval(f);
    if (*exact_cmd) return cmd_exact(f);
    if (*table_cmd) return cmd_table(f);
    if (*grid_cmd) return cmd_grid(f);
    if (*selftest_cmd) return cmd_selftest(f);
    if (*forward_cmd) return cmd_forward(f);
  } catch (const config_error &e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const invariant_failure &e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 3;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 4;
}
