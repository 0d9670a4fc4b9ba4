// Copyright 2026 The lanechange Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Thresholds are fixed here and not configurable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lanechange/demo.hpp"
#include "lanechange/eval.hpp"
#include "lanechange/runtime.hpp"
#include "oracle.hpp"

using namespace lanechange;
namespace fs = std::filesystem;

namespace {

// Desk scale.
constexpr int kEpisodes = 200;
constexpr int kEpsilonHorizon = 160;
constexpr int kDemoSessions = 30;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};
constexpr int kEvalRuns = 30;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Architecture gradcheck_arch() {
  Architecture a;
  a.in_channels = 2;
  a.in_height = 9;
  a.in_width = 7;
  a.conv_channels = {3, 4};
  a.trunk = 16;
  a.branch = 8;
  return a;
}

Architecture loss_arch() {
  Architecture a;
  a.in_channels = 1;
  a.in_height = 3;
  a.in_width = 3;
  a.conv_channels = {1};
  a.trunk = 4;
  a.branch = 2;
  return a;
}

// ---------------------------------------------------------------------------
// Numerical core

struct GradFixture {
  NetworkParams<double> params;
  std::vector<double> inputs, targets;
  std::vector<int> actions;
};

GradFixture make_grad_fixture(std::uint64_t seed) {
  const Architecture a = gradcheck_arch();
  GradFixture f{init_params<double>(a, seed), {}, {}, {}};
  Rng rng(seed + 1000);
  for (auto& v : f.params.values) v += rng.uniform(-0.05, 0.05);
  const int n = 6;
  f.inputs.resize(static_cast<std::size_t>(n) * a.input_size());
  for (auto& v : f.inputs) v = rng.uniform();
  for (int i = 0; i < n; ++i) {
    f.actions.push_back(i % a.actions);
    f.targets.push_back(rng.uniform(-2.0, 2.0));
  }
  return f;
}

// ReLU on/off pattern of every hidden unit.
std::vector<bool> relu_pattern(const NetworkParams<double>& p, const std::vector<double>& x, int n) {
  ForwardCache<double> c;
  forward_batch<double>(p, x, n, &c);
  std::vector<bool> on;
  auto add = [&](const RowMatrix<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) on.push_back(m.data()[i] > 0.0);
  };
  for (const auto& m : c.conv_out) add(m);
  add(c.trunk);
  add(c.value_hidden);
  add(c.adv_hidden);
  return on;
}

// Central differences are only meaningful where the loss is smooth over
// [θ - h, θ + h]; a fixture qualifies when no perturbation flips a ReLU.
bool smooth_over_band(GradFixture& f, double h) {
  const int n = static_cast<int>(f.actions.size());
  const auto base = relu_pattern(f.params, f.inputs, n);
  for (auto& v : f.params.values) {
    const double keep = v;
    for (double d : {h, -h}) {
      v = keep + d;
      if (relu_pattern(f.params, f.inputs, n) != base) {
        v = keep;
        return false;
      }
    }
    v = keep;
  }
  return true;
}

Verdict gradient_check() {
  const auto t0 = Clock::now();
  const double h = 1e-4;
  int rejected = 0;
  std::uint64_t seed = 0;
  GradFixture f = make_grad_fixture(seed);
  while (!smooth_over_band(f, h) && rejected < 50) {
    ++rejected;
    f = make_grad_fixture(++seed);
  }
  auto& p = f.params;
  const RegressionBatch<double> b{f.inputs, f.actions, f.targets, {}};
  const auto g = backward<double>(p, b).grads;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double keep = p.values[i];
    p.values[i] = keep + h;
    const double up = regression_loss<double>(p, b);
    p.values[i] = keep - h;
    const double down = regression_loss<double>(p, b);
    p.values[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-7});
    worst = std::max(worst, std::abs(fd - g[i]) / scale);
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0 && rejected < 50,
          fmt("%zu params (all checked), h = 1e-4, max relative error %.3g (< 1e-4), %.2f s (< 10 s); fixture %llu, "
              "%d earlier fixtures had a ReLU kink inside +-h",
              p.values.size(), worst, secs, static_cast<unsigned long long>(seed), rejected)};
}

Verdict loss_oracle() {
  const Architecture a = loss_arch();
  Rng rng(5);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto online = init_params<double>(a, 100 + k);
    auto target = init_params<double>(a, 200 + k);
    for (auto& v : online.values) v += rng.uniform(-0.2, 0.2);
    for (auto& v : target.values) v += rng.uniform(-0.2, 0.2);
    TdBatch<double> b;
    const int n = 1 + static_cast<int>(rng.uniform_int(8));
    for (int i = 0; i < n * a.input_size(); ++i) {
      b.inputs.push_back(rng.uniform(-1.0, 1.0));
      b.next_inputs.push_back(rng.uniform(-1.0, 1.0));
    }
    for (int i = 0; i < n; ++i) {
      b.actions.push_back(static_cast<int>(rng.uniform_int(a.actions)));
      b.rewards.push_back(rng.uniform(-10.0, 1.0));
      b.done.push_back(rng.bernoulli(0.3));
      b.is_demo.push_back(rng.bernoulli(0.4));
    }
    const double got = compute_loss(online, target, b, 0.9).loss;
    const double want = oracle::td_loss(online, target, b, 0.9);
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  }
  return {worst <= 1e-10, fmt("50 batches of 1..8 samples, %zu params, max relative difference %.3g (<= 1e-10)",
                              a.param_count(), worst)};
}

// The shrunken network in double isolates backprop and Adam from float
// round-off; 1e-3 is Adam's customary step size.
Verdict overfit() {
  const Architecture a = gradcheck_arch();
  auto p = init_params<double>(a, 1);
  Rng rng(101);
  const int n = 4;
  std::vector<double> x(static_cast<std::size_t>(n) * a.input_size());
  for (auto& v : x) v = rng.uniform();
  const std::vector<int> actions{0, 1, 2, 3};
  std::vector<double> targets;
  for (int i = 0; i < n; ++i) targets.push_back(rng.uniform(-10.0, 1.0));
  AdamState<double> opt(p.size(), 1e-3);
  const RegressionBatch<double> b{x, actions, targets, {}};
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) {
    auto lg = backward<double>(p, b);
    losses.push_back(lg.loss);
    optimize_step<double>(p, lg.grads, opt);
  }
  losses.push_back(regression_loss<double>(p, b));
  int rises = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) rises += losses[i] >= losses[i - 1];
  return {rises <= 2 && losses.back() < losses.front(),
          fmt("%zu params, fixed 4-sample batch, Adam lr 1e-3: loss %.4g -> %.4g over 50 steps, %d non-decreasing "
              "steps (<= 2)",
              p.size(), losses.front(), losses.back(), rises)};
}

// ---------------------------------------------------------------------------
// Simulator and geometry

Verdict idm_platoon() {
  WorldState w;
  w.traffic.manager.change_probability = 0.0;
  w.traffic.recycle_behind = 1e9;
  VehicleState ego;
  ego.id = 0;
  ego.is_ego = true;
  ego.lateral_pos = w.road.lane_center(0);
  ego.longitudinal_pos = 1e6;
  w.vehicles.push_back(ego);
  Rng rng(2026);
  for (int i = 1; i <= 10; ++i) {
    VehicleState v;
    v.id = i;
    v.lane_target = 1;
    v.lateral_pos = w.road.lane_center(1);
    v.longitudinal_pos = 300.0 - 12.0 * i;
    v.target_speed = rng.uniform(w.road.speed_floor, w.road.speed_ceiling);
    v.speed = rng.uniform(0.0, v.target_speed);
    w.vehicles.push_back(v);
  }
  const int ticks = static_cast<int>(std::lround(60.0 / kControlDt));
  int collisions = 0;
  double excess = -1e9;
  for (int t = 0; t < ticks; ++t) {
    w = step_world(std::move(w), 0.0, 0.0);
    collisions += detect_collision(w).empty() ? 0 : 1;
    for (const auto& v : w.vehicles) {
      if (!v.is_ego) excess = std::max(excess, v.speed - v.target_speed);
    }
  }
  return {collisions == 0 && excess <= 1e-6,
          fmt("10 vehicles, %d ticks (60 s): %d colliding ticks, max speed - target %.3g (<= 1e-6)", ticks, collisions,
              excess)};
}

Verdict ttc_equivalence() {
  Rng rng(1000);
  long checked = 0, mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    WorldState w;
    const int n = 2 + static_cast<int>(rng.uniform_int(15));
    for (int i = 0; i < n; ++i) {
      VehicleState v;
      v.id = i;
      v.is_ego = i == 0;
      v.lateral_pos = rng.uniform(0.0, w.road.road_width());
      v.lane_target = w.road.lane_at(v.lateral_pos);
      v.longitudinal_pos = rng.bernoulli(0.3) ? static_cast<double>(rng.uniform_int(40)) : rng.uniform(-50.0, 50.0);
      v.speed = rng.uniform(0.0, 15.0);
      w.vehicles.push_back(v);
    }
    for (const auto& a : w.vehicles) {
      for (int lane = 0; lane < w.road.lane_count; ++lane) {
        ++checked;
        mismatches += !(neighbors(w, a.id, lane) == oracle::neighbors(w, a.id, lane));
      }
      for (const auto& b : w.vehicles) {
        if (a.id == b.id) continue;
        ++checked;
        mismatches += !(ttc(w, a.id, b.id) == oracle::ttc(w, a.id, b.id));
      }
    }
  }
  return {mismatches == 0, fmt("1000 random worlds, %ld queries, %ld mismatches", checked, mismatches)};
}

Verdict quintic(const std::vector<const EvalResult*>& evaluations) {
  double boundary = 0.0;
  for (double d1 : {-3.5, 3.5, 7.0}) {
    const auto p = plan_quintic(1.75, d1, 5.5, 3.0);
    boundary = std::max({boundary, std::abs(p.position(3.0) - 1.75), std::abs(p.position(8.5) - d1),
                         std::abs(p.velocity(3.0)), std::abs(p.velocity(8.5)), std::abs(p.acceleration(3.0)),
                         std::abs(p.acceleration(8.5))});
  }
  const auto p = plan_quintic(0.0, 3.5, 5.5);
  double peak = 0.0;
  for (int i = 0; i <= 55000; ++i) peak = std::max(peak, std::abs(p.velocity(i * 1e-4)));
  const double expected = 15.0 * 3.5 / (8.0 * 5.5);
  double trace_peak = 0.0;
  long samples = 0;
  int traces = 0;
  for (const EvalResult* e : evaluations) {
    for (const auto& run : e->runs) {
      ++traces;
      for (const auto& s : run.trace) {
        ++samples;
        trace_peak = std::max(trace_peak, std::abs(s.lateral_speed));
      }
    }
  }
  const bool ok = boundary <= 1e-9 && std::abs(peak - expected) <= 1e-6 && trace_peak < 1.3 && samples > 0;
  return {ok, fmt("boundary error %.2g (<= 1e-9), peak %.9f vs %.9f, %d traces / %ld samples peak |d'| %.4f m/s "
                  "(< 1.3)",
                  boundary, peak, expected, traces, samples, trace_peak)};
}

// ---------------------------------------------------------------------------
// Training pipeline

struct DeskRuns {
  StrategyRun proposed, vanilla, il, proposed_rerun;
  bool trained = false;
  long batches_checked = 0, batches_bad = 0, batches_cold = 0;
  double seconds = 0.0;
};

RunConfig desk_config() {
  RunConfig c;
  c.trainer.episodes = kEpisodes;
  c.trainer.epsilon.decay_horizon = kEpsilonHorizon;
  c.trainer.demo_episodes = kDemoSessions;
  c.eval_runs = kEvalRuns;
  return c;
}

StrategyRun run_strategy(StrategyKind kind, const std::vector<std::uint64_t>& seeds, const fs::path& out,
                         const fs::path& demos, int jobs, TrainOptions::BatchObserver observer = {}) {
  TrainOptions opt;
  opt.kind = kind;
  opt.seeds = seeds;
  opt.out_dir = out;
  opt.config = desk_config();
  opt.jobs = jobs;
  if (kind != StrategyKind::VanillaD3QN) opt.demo_file = demos;
  opt.batch_observer = std::move(observer);
  const auto t0 = Clock::now();
  opt.log = [&](const std::string& m) { std::cerr << fmt("[%7.0f s] ", seconds_since(t0)) << m << '\n'; };
  return train_strategy(opt);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double tail_mean(const std::vector<double>& v, std::size_t n) {
  const std::size_t k = std::min(n, v.size());
  return mean(std::vector<double>(v.end() - static_cast<std::ptrdiff_t>(k), v.end()));
}

struct Tail {
  std::vector<double> collision, reward;
};

Tail final_50(const StrategyRun& run) {
  Tail t;
  for (const auto& s : run.seeds) {
    std::vector<bool> col;
    std::vector<double> rew;
    for (const auto& m : s.metrics) {
      col.push_back(m.collision);
      rew.push_back(m.reward);
    }
    t.collision.push_back(tail_mean(rolling_rate(col, 50), 50));
    t.reward.push_back(tail_mean(rew, 50));
  }
  return t;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt(i ? ", %.2f" : "%.2f", v[i]);
  return "[" + s + "]";
}

Verdict determinism(const DeskRuns& r, const fs::path& work) {
  const std::string a = slurp(work / "proposed" / "seed_0" / "metrics.csv");
  const std::string b = slurp(work / "proposed_rerun" / "seed_0" / "metrics.csv");
  const std::string ca = slurp(work / "proposed" / "seed_0" / "policy.bin");
  const std::string cb = slurp(work / "proposed_rerun" / "seed_0" / "policy.bin");
  const bool ok = r.trained && !a.empty() && a == b && !ca.empty() && ca == cb;
  return {ok, fmt("proposed seed 0 trained twice (%d episodes): metrics.csv %s (%zu bytes), policy.bin %s", kEpisodes,
                  a == b ? "identical" : "DIFFERENT", a.size(), ca == cb ? "identical" : "DIFFERENT")};
}

Verdict replay_mixing(const DeskRuns& r) {
  return {r.trained && r.batches_checked > 0 && r.batches_bad == 0,
          fmt("%ld warm batches across %zu proposed seeds, %ld not 16 demo + 48 exploration (%ld drawn while the "
              "exploration buffer held < 48)",
              r.batches_checked, kSeeds.size(), r.batches_bad, r.batches_cold)};
}

Verdict collision_curve(const DeskRuns& r) {
  const Tail p = final_50(r.proposed), v = final_50(r.vanilla);
  const double pc = mean(p.collision), vc = mean(v.collision), pr = mean(p.reward), vr = mean(v.reward);
  return {r.trained && pc < vc && pr >= vr,
          fmt("final-50 rolling collision %% proposed %.2f %s < vanilla %.2f %s; final-50 reward proposed %.3f %s >= "
              "vanilla %.3f %s",
              pc, list(p.collision).c_str(), vc, list(v.collision).c_str(), pr, list(p.reward).c_str(), vr,
              list(v.reward).c_str())};
}

struct EvalSummary {
  double success = 0.0, collision = 0.0, speed = 0.0;
  std::vector<double> success_by_seed, collision_by_seed;
};

EvalSummary eval_summary(const StrategyRun& run) {
  EvalSummary s;
  std::vector<double> speed;
  for (const auto& seed : run.seeds) {
    if (!seed.eval) continue;
    s.success_by_seed.push_back(seed.eval->report.success_rate);
    s.collision_by_seed.push_back(seed.eval->report.collision_rate);
    speed.push_back(seed.eval->report.traffic_speed_mean);
  }
  s.success = mean(s.success_by_seed);
  s.collision = mean(s.collision_by_seed);
  s.speed = mean(speed);
  return s;
}

Verdict evaluation_order(const DeskRuns& r) {
  const EvalSummary p = eval_summary(r.proposed), v = eval_summary(r.vanilla);
  const bool complete = p.success_by_seed.size() == kSeeds.size() && v.success_by_seed.size() == kSeeds.size();
  return {r.trained && complete && p.success >= v.success && p.collision <= v.collision,
          fmt("evaluate(runs=%d, greedy): success %% proposed %.2f %s >= vanilla %.2f %s; collision %% proposed %.2f "
              "%s <= vanilla %.2f %s; traffic speed %.3f / %.3f m/s (reference 0.0 / 80.0 / 8.697)",
              kEvalRuns, p.success, list(p.success_by_seed).c_str(), v.success, list(v.success_by_seed).c_str(),
              p.collision, list(p.collision_by_seed).c_str(), v.collision, list(v.collision_by_seed).c_str(), p.speed,
              v.speed)};
}

Verdict demonstrator_safety() {
  const auto eps = record_scripted_sessions(0, 100);
  int success = 0, collision = 0;
  for (const auto& e : eps) {
    success += e.steps.back().outcome == Outcome::Success;
    collision += e.steps.back().outcome == Outcome::Collision;
  }
  return {success >= 80 && collision == 0,
          fmt("100 scripted episodes: %d%% success (>= 80%%), %d collisions (== 0)", success, collision)};
}

Verdict replay_fidelity(const fs::path& demos) {
  const auto recorded = record_scripted_sessions(0, kDemoSessions);
  export_demos(demos, recorded);
  const auto loaded = load_demo_file(demos);
  const ValidationReport rep = validate_demos(loaded);
  int totals_equal = 0;
  for (std::size_t k = 0; k < loaded.size() && k < recorded.size(); ++k) {
    double a = 0.0, b = 0.0;
    for (const auto& s : loaded[k].steps) a += s.reward.total;
    for (const auto& s : recorded[k].steps) b += s.reward.total;
    totals_equal += a == b;
  }
  std::size_t steps = 0;
  for (const auto& e : loaded) steps += e.steps.size();
  const bool ok = rep.ok && loaded.size() == static_cast<std::size_t>(kDemoSessions) && loaded == recorded &&
                  totals_equal == kDemoSessions;
  return {ok, fmt("%zu sessions / %zu steps exported, reloaded and re-simulated: %zu problems, %d/%d reward totals "
                  "equal",
                  loaded.size(), steps, rep.problems.size(), totals_equal, kDemoSessions)};
}

Verdict il_baseline(const DeskRuns& r) {
  std::vector<double> acc;
  bool evaluated = true;
  for (const auto& s : r.il.seeds) {
    acc.push_back(s.bc ? 100.0 * s.bc->train_accuracy : 0.0);
    evaluated = evaluated && s.eval && s.eval->report.n_runs == kEvalRuns;
  }
  const bool ok = !acc.empty() && *std::min_element(acc.begin(), acc.end()) >= 90.0 && evaluated;
  const EvalSummary e = eval_summary(r.il);
  return {ok, fmt("behavior cloning train accuracy %% %s (each >= 90); evaluate(runs=%d) %s: success %.2f%%, "
                  "collision %.2f%%",
                  list(acc).c_str(), kEvalRuns, evaluated ? "completed" : "MISSING", e.success, e.collision)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"lanechange acceptance suite"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  int jobs = 0;
  app.add_option("--work", work, "scratch directory (wiped on start)");
  app.add_option("--only", only, "run a subset of criteria (development aid)")->delimiter(',');
  app.add_option("--jobs", jobs, "parallel training seeds (0: one per core)");
  CLI11_PARSE(app, argc, argv);

  const auto selected = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  const fs::path dir = work;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path demos = dir / "demos.lcd";
  const auto t_start = Clock::now();

  std::map<int, std::pair<std::string, Verdict>> results;
  auto record = [&](int id, const std::string& name, Verdict v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << v.detail << std::endl;
    results[id] = {name, std::move(v)};
  };

  if (selected(1)) record(1, "gradient check", gradient_check());
  if (selected(2)) record(2, "loss oracle", loss_oracle());
  if (selected(3)) record(3, "overfit sanity", overfit());
  if (selected(4)) record(4, "IDM platoon", idm_platoon());
  if (selected(5)) record(5, "TTC/neighbor equivalence", ttc_equivalence());
  if (selected(11)) record(11, "scripted demonstrator safety", demonstrator_safety());
  // The demo file written here feeds the training runs below.
  const bool need_training = selected(6) || selected(7) || selected(8) || selected(9) || selected(10) || selected(13);
  if (selected(12) || need_training) {
    Verdict v = replay_fidelity(demos);
    if (selected(12)) record(12, "demo file replay fidelity", std::move(v));
  }

  DeskRuns desk;
  if (need_training) {
    const auto t0 = Clock::now();
    std::mutex m;
    auto observer = [&](const BatchEvent& e) {
      std::lock_guard<std::mutex> lock(m);
      if (e.demo_available < 16 || e.explore_available < 48) {
        ++desk.batches_cold;
        return;
      }
      ++desk.batches_checked;
      const bool ok = e.batch->demo_count == 16 && e.batch->explore_count == 48 &&
                      std::count_if(e.batch->items.begin(), e.batch->items.end(),
                                    [](const Transition* t) { return t->is_demo; }) == 16;
      desk.batches_bad += !ok;
    };
    desk.il = run_strategy(StrategyKind::ImitationIL, kSeeds, dir / "il", demos, jobs);
    desk.proposed = run_strategy(StrategyKind::Proposed, kSeeds, dir / "proposed", demos, jobs, observer);
    desk.vanilla = run_strategy(StrategyKind::VanillaD3QN, kSeeds, dir / "vanilla", demos, jobs);
    if (selected(7)) desk.proposed_rerun = run_strategy(StrategyKind::Proposed, {0}, dir / "proposed_rerun", demos, 1);
    desk.trained = true;
    desk.seconds = seconds_since(t0);
    for (const char* s : {"il", "proposed", "vanilla"}) report(dir / s);
  }

  if (selected(6)) {
    std::vector<const EvalResult*> evals;
    for (const StrategyRun* run : {&desk.proposed, &desk.vanilla, &desk.il}) {
      for (const auto& s : run->seeds) {
        if (s.eval) evals.push_back(&*s.eval);
      }
    }
    record(6, "quintic trajectory", quintic(evals));
  }
  if (selected(7)) record(7, "determinism", determinism(desk, dir));
  if (selected(8)) record(8, "replay mixing", replay_mixing(desk));
  if (selected(9)) record(9, "collision curve ordering", collision_curve(desk));
  if (selected(10)) record(10, "evaluation ordering", evaluation_order(desk));
  if (selected(13)) record(13, "IL baseline", il_baseline(desk));

  int failed = 0;
  std::cout << "\nsummary (" << fmt("%.0f", seconds_since(t_start)) << " s total";
  if (desk.trained) std::cout << fmt(", %.0f s training", desk.seconds);
  std::cout << ")\n";
  for (const auto& [id, entry] : results) {
    std::cout << (entry.second.pass ? "PASS" : "FAIL") << "  " << id << ". " << entry.first << '\n';
    failed += !entry.second.pass;
  }
  std::cout << (failed ? fmt("%d of %zu criteria failed", failed, results.size())
                       : fmt("all %zu criteria passed", results.size()))
            << std::endl;
  return failed ? 1 : 0;
}
