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
// Acceptance runner: one PASS/FAIL line per criterion. Criterion 4 is a
// diagnostic and never fails the run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jointad/jointad.hpp"

namespace fs = std::filesystem;
using namespace jointad;

namespace {

// Pinned tolerances and budgets.
constexpr int kOracleInstances = 10000;      // per distribution
constexpr double kFlipEps = 1e-6;
constexpr double kOracleSeconds = 60;
constexpr int kIcInstances = 1000;           // per distribution
constexpr int kIcGridPoints = 101;
constexpr double kIcGain = 1e-9;
constexpr double kIcSeconds = 120;
constexpr int kRevenueSamples = 100000;
constexpr double kRevenueTol = 0.03;
constexpr double kRevenueSeconds = 300;
constexpr int kLemmaDraws = 100;
constexpr int kLemmaBatch = 256;
constexpr double kLemmaTol = 1e-6;
constexpr double kLemmaSeconds = 120;
constexpr int kStructureDraws = 1000;
constexpr double kStructureTol = 1e-12;
constexpr double kGradientRel = 1e-3;
constexpr double kU2RevenueGap = 0.07;       // relative to the optimal revenue
constexpr double kU2Regret = 1e-3;
constexpr int kU2Seeds = 3;
constexpr int kU2SeedsNeeded = 2;
constexpr int kU2RegretSamples = 5000;
constexpr double kU5x5Regret = 5e-3;
constexpr int kU5x5RegretSamples = 2000;
constexpr double kGridDisagreement = 0.10;
constexpr int kGridResolution = 101;
constexpr std::uint64_t kSeed = 20260101;
constexpr std::uint64_t kEvalSeed = 777001;

struct Target {
  const char *label;
  double value;
};
constexpr Target kOptimalTargets[] = {{"U_2", 0.5247}, {"U_5", 0.8819}, {"E_2", 0.4249},
                                      {"E_5", 0.7376}, {"N_2", 0.7789}, {"N_5", 0.9582}};
constexpr Target kRvcgTargets[] = {{"U_2", 0.3811}, {"U_5", 0.8607}, {"N_2", 0.5492}};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class Runner {
 public:
  explicit Runner(fs::path work) : work_(std::move(work)) { fs::create_directories(work_); }

  void report(int id, bool pass, const std::string &detail, bool diagnostic = false) {
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass && !diagnostic) failed_ = true;
    results_[std::to_string(id)] = {{"pass", pass}, {"detail", detail}, {"diagnostic", diagnostic}};
  }

  void log(const std::string &s) {
    std::fprintf(stderr, "%s\n", s.c_str());
    std::fflush(stderr);
  }

  bool failed() const { return failed_; }
  const fs::path &work() const { return work_; }

  void save(const std::string &tag) {
    std::ofstream(work_ / ("acceptance_" + tag + ".json")) << results_.dump(2) << "\n";
  }

  void c1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream d;
    bool ok = true;
    for (const char *id : {"u01", "texp2", "tnorm"}) {
      const CheckSummary s = check_exact_oracle(Distribution::from_id(id), kOracleInstances, derive_seed(kSeed, 1), kFlipEps);
      ok = ok && s.pass;
      d << id << " " << s.cases << " instances " << s.failures << " failures; ";
      if (!s.pass) d << "first: " << s.first_failure << "; ";
    }
    const double secs = seconds_since(t0);
    d << "runtime " << std::round(secs) << " s (limit " << kOracleSeconds << ")";
    report(1, ok && secs < kOracleSeconds, d.str());
  }

  void c2() {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream d;
    bool ok = true;
    double worst = 0.0;
    for (const char *id : {"u01", "texp2", "tnorm"}) {
      const CheckSummary s = check_exact_ic(Distribution::from_id(id), kIcInstances, kIcGridPoints,
                                            derive_seed(kSeed, 2), kIcGain);
      ok = ok && s.pass;
      worst = std::max(worst, s.worst);
      if (!s.pass) d << id << " first: " << s.first_failure << "; ";
    }
    const double secs = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "max grid gain %.3g over %d instances x 3 priors (limit %.0e); runtime %.0f s",
                  worst, kIcInstances, kIcGain, secs);
    d << buf;
    report(2, ok && secs < kIcSeconds, d.str());
  }

  void c3() {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream d;
    bool ok = true;
    for (const auto &t : kOptimalTargets) {
      const Setting s = parse_setting(t.label);
      const RevenueEstimate r = mc_revenue(optimal_mechanism(s.prior()), s, kRevenueSamples, kEvalSeed, 0);
      const bool hit = std::abs(r.mean - t.value) <= kRevenueTol;
      ok = ok && hit;
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s %.4f+-%.4f vs %.4f %s; ", t.label, r.mean, r.stderr_, t.value, hit ? "ok" : "MISS");
      d << buf;
      optimal_[t.label] = r.mean;
    }
    const double secs = seconds_since(t0);
    d << "tol " << kRevenueTol << ", runtime " << std::round(secs) << " s";
    report(3, ok && secs < kRevenueSeconds, d.str());
  }

  void c4() {
    std::ostringstream d;
    bool ok = true;
    for (const auto &t : kRvcgTargets) {
      const Setting s = parse_setting(t.label);
      const RevenueEstimate r = mc_revenue(rvcg_mechanism(true), s, kRevenueSamples, kEvalSeed, 0);
      const bool hit = std::abs(r.mean - t.value) <= kRevenueTol;
      ok = ok && hit;
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s %.4f+-%.4f vs %.4f %s; ", t.label, r.mean, r.stderr_, t.value, hit ? "ok" : "MISS");
      d << buf;
    }
    d << (ok ? "within tol" : "interpretation flag (diagnostic only)");
    report(4, ok, d.str(), true);
  }

  void c5() {
    const auto t0 = std::chrono::steady_clock::now();
    EvalOptions opt;
    opt.grid_points = 11;
    opt.ascent_steps = 10;
    opt.restarts = 1;
    const CheckSummary s = check_regret_lemma(kLemmaDraws, kLemmaBatch, opt, derive_seed(kSeed, 5), kLemmaTol);
    const double secs = seconds_since(t0);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%ld samples over %d nets, max(sum_i rgt_i - sum_e rgt^e) = %.3g (tol %.0e); runtime %.0f s",
                  s.cases, kLemmaDraws, s.worst, kLemmaTol, secs);
    report(5, s.pass && secs < kLemmaSeconds, buf);
  }

  void c6() {
    const CheckSummary s = check_structure(kStructureDraws, derive_seed(kSeed, 6), kStructureTol);
    report(6, s.pass, std::to_string(s.cases) + " forward passes, " + std::to_string(s.failures) +
                          " with violations" + (s.pass ? "" : "; first: " + s.first_failure));
  }

  void c7() {
    const CheckSummary s = check_gradients(derive_seed(kSeed, 7), kGradientRel);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%ld entries, worst |g-fd|/(|fd|+1e-5) = %.3g (rel tol %.0e)%s%s", s.cases, s.worst,
                  kGradientRel, s.pass ? "" : "; first: ", s.first_failure.c_str());
    report(7, s.pass, buf);
  }

  Checkpoint train_logged(const Setting &s, std::uint64_t seed, const std::string &tag) {
    TrainConfig cfg;
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    log("training " + tag);
    const TrainResult res = train(cfg, s, BundleNetShape{}, [&](int pass, const HistoryRow &r, const Checkpoint &) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "  %s pass %d revenue %.4f max_edge_regret %.5f (%.0f s)", tag.c_str(), pass + 1,
                    r.revenue, r.max_edge_regret, seconds_since(t0));
      log(buf);
    });
    const fs::path dir = work_ / tag;
    fs::create_directories(dir);
    save_checkpoint((dir / "checkpoint.json").string(), res.checkpoint);
    std::ofstream(dir / "history.csv") << history_csv(res.history);
    return res.checkpoint;
  }

  void c8() {
    const Setting s = parse_setting("U_2");
    if (!optimal_.count("U_2"))
      optimal_["U_2"] = mc_revenue(optimal_mechanism(s.prior()), s, kRevenueSamples, kEvalSeed, 0).mean;
    const double opt = optimal_["U_2"];
    std::ostringstream d;
    int good = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 1; k <= kU2Seeds; ++k) {
      const Checkpoint ck = train_logged(s, static_cast<std::uint64_t>(k), "u2_seed" + std::to_string(k));
      if (k == 1) u2_ = ck;
      const RevenueEstimate rev = mc_revenue(ck.params, s, kRevenueSamples, kEvalSeed, 0);
      log("  evaluating regret");
      const RegretReport rgt = mc_regret(ck, s, kU2RegretSamples, kEvalSeed, EvalOptions{}, 0);
      const double gap = std::abs(rev.mean - opt) / opt;
      const bool hit = gap <= kU2RevenueGap && rgt.regret_2n < kU2Regret;
      good += hit;
      char buf[240];
      std::snprintf(buf, sizeof buf, "seed %d rev %.4f (gap %.1f%%) rgt %.2e [per-bidder %.2e] %s; ", k, rev.mean,
                    100 * gap, rgt.regret_2n, rgt.regret_per_bidder, hit ? "ok" : "miss");
      d << buf;
      log(buf);
    }
    char tail[160];
    std::snprintf(tail, sizeof tail, "optimal %.4f; %d/%d seeds meet gap<=%.0f%% and rgt<%.0e; runtime %.0f min", opt,
                  good, kU2Seeds, 100 * kU2RevenueGap, kU2Regret, seconds_since(t0) / 60);
    d << tail;
    report(8, good >= kU2SeedsNeeded, d.str());
  }

  void c9() {
    const Setting s = parse_setting("U_5x5");
    const auto t0 = std::chrono::steady_clock::now();
    const Checkpoint ck = train_logged(s, 1, "u5x5_seed1");
    const RevenueEstimate net = mc_revenue(ck.params, s, kRevenueSamples, kEvalSeed, 0);
    const RevenueEstimate vcg = mc_revenue(rvcg_mechanism(true), s, kRevenueSamples, kEvalSeed, 0);
    log("  evaluating regret");
    const RegretReport rgt = mc_regret(ck, s, kU5x5RegretSamples, kEvalSeed, EvalOptions{}, 0);
    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "bundlenet %.4f+-%.4f vs rvcg %.4f+-%.4f on matched samples; rgt %.2e [per-bidder %.2e] (limit %.0e); "
                  "runtime %.0f min",
                  net.mean, net.stderr_, vcg.mean, vcg.stderr_, rgt.regret_2n, rgt.regret_per_bidder, kU5x5Regret,
                  seconds_since(t0) / 60);
    report(9, net.mean > vcg.mean && rgt.regret_2n < kU5x5Regret, buf);
  }

  static std::string grid_file(const char *kind, GridFixture f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "grid_%s_%s_%.2f.csv", kind, to_string(f).c_str(), v);
    return buf;
  }

  void c10() {
    const Distribution u = Distribution::uniform();
    const std::span<const Distribution> priors(&u, 1);
    // Exact grids: every column switches from lose to win at the reported
    // boundary, and interior boundary points satisfy the virtual-value
    // equality against the competing bundle (or the zero reserve).
    int bad_cells = 0, bad_boundary = 0, boundary_points = 0;
    const std::vector<double> fixed{0.0, 0.25, 0.5, 0.75};
    std::vector<AllocationGrid> exact;
    for (GridFixture f : {GridFixture::SharedSupplier, GridFixture::DisjointPairs}) {
      for (double v : fixed) {
        const AllocationGrid g = exact_allocation_grid(f, v, u, kGridResolution);
        std::ofstream(work_ / grid_file("exact", f, v)) << grid_csv(g);
        for (int j = 0; j < kGridResolution; ++j) {
          const auto &b = g.boundary[j];
          for (int i = 0; i < kGridResolution; ++i) {
            const double x = g.axis[i];
            if (b && std::abs(x - *b) < 1e-9) continue;
            bad_cells += (g.win(i, j) == 1.0) != (b && x > *b);
          }
          if (b && *b > 1e-9) {
            ++boundary_points;
            const AuctionInstance inst = grid_instance(f, v, *b, g.axis[j]);
            const double lhs = bundle_virtual_value(inst, 0, priors);
            const double rhs = std::max(0.0, bundle_virtual_value(inst, 1, priors));
            bad_boundary += std::abs(lhs - rhs) > 1e-8;
          }
        }
        exact.push_back(g);
      }
    }
    std::ostringstream d;
    d << "exact: " << bad_cells << " cells off the boundary, " << bad_boundary << "/" << boundary_points
      << " boundary points off the virtual-value curve; ";
    bool ok = bad_cells == 0 && bad_boundary == 0;
    if (!u2_) {
      const fs::path p = work_ / "u2_seed1" / "checkpoint.json";
      if (fs::exists(p)) u2_ = load_checkpoint(p.string());
    }
    if (!u2_) {
      d << "no trained U_2 checkpoint (run criterion 8 first)";
      report(10, false, d.str());
      return;
    }
    double total = 0.0, worst = 0.0;
    std::size_t idx = 0;
    for (GridFixture f : {GridFixture::SharedSupplier, GridFixture::DisjointPairs}) {
      for (double v : fixed) {
        const AllocationGrid learned = learned_allocation_grid(u2_->params, f, v, kGridResolution);
        std::ofstream(work_ / grid_file("learned", f, v)) << grid_csv(learned);
        const double dis = grid_disagreement(learned, exact[idx++]);
        total += dis;
        worst = std::max(worst, dis);
      }
    }
    const double mean = total / static_cast<double>(exact.size());
    char buf[200];
    std::snprintf(buf, sizeof buf, "learned (seed 1) disagreement mean %.2f%% worst grid %.2f%% (limit %.0f%% mean)",
                  100 * mean, 100 * worst, 100 * kGridDisagreement);
    d << buf;
    report(10, ok && mean <= kGridDisagreement, d.str());
  }

 private:
  fs::path work_;
  bool failed_ = false;
  nlohmann::json results_ = nlohmann::json::object();
  std::map<std::string, double> optimal_;
  std::optional<Checkpoint> u2_;
};

}  // namespace

int main(int argc, char **argv) {
  tune_allocator();
  CLI::App app{"acceptance criteria"};
  std::string criteria = "1,2,3,4,5,6,7,8,9,10";
  std::string work = "acceptance_runs";
  app.add_option("--criteria", criteria, "comma-separated criterion ids");
  app.add_option("--work-dir", work, "directory for checkpoints, grids and results");
  CLI11_PARSE(app, argc, argv);
  std::set<int> ids;
  std::stringstream ss(criteria);
  for (std::string t; std::getline(ss, t, ',');) ids.insert(std::stoi(t));
  Runner r(work);
  const std::map<int, std::function<void()>> table = {
      {1, [&] { r.c1(); }}, {2, [&] { r.c2(); }}, {3, [&] { r.c3(); }}, {4, [&] { r.c4(); }},
      {5, [&] { r.c5(); }}, {6, [&] { r.c6(); }}, {7, [&] { r.c7(); }}, {8, [&] { r.c8(); }},
      {9, [&] { r.c9(); }}, {10, [&] { r.c10(); }}};
  for (int id : ids) {
    auto it = table.find(id);
    if (it == table.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    try {
      it->second();
    } catch (const std::exception &e) {
      r.report(id, false, std::string("exception: ") + e.what());
    }
  }
  std::string tag;
  for (int id : ids) tag += (tag.empty() ? "" : "_") + std::to_string(id);
  r.save(tag);
  return r.failed() ? 1 : 0;
}
