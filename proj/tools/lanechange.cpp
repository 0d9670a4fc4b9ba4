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

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lanechange/demo.hpp"
#include "lanechange/demo_server.hpp"
#include "lanechange/eval.hpp"
#include "lanechange/runtime.hpp"

namespace fs = std::filesystem;
using namespace lanechange;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

RunConfig resolve_config(const std::string& config_path, std::optional<int> episodes,
                         std::optional<int> horizon) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (episodes) cfg.trainer.episodes = *episodes;
  if (horizon) cfg.trainer.epsilon.decay_horizon = *horizon;
  return cfg;
}

int cmd_train(const std::string& strategy, const std::string& seeds, std::optional<int> episodes,
              std::optional<int> horizon, const std::string& demos, const std::string& out,
              const std::string& config_path, int jobs, bool no_eval) {
  TrainOptions opt;
  opt.kind = strategy_from_name(strategy);
  opt.seeds = parse_seed_list(seeds);
  if (!demos.empty()) opt.demo_file = demos;
  opt.out_dir = out;
  opt.config = resolve_config(config_path, episodes, horizon);
  if (episodes && !horizon) {
    // Keep the decay covering 80% of the budget when only the budget changes.
    opt.config.trainer.epsilon.decay_horizon = std::max(1, *episodes * 4 / 5);
  }
  opt.jobs = jobs;
  opt.evaluate_after = !no_eval;
  opt.log = [](const std::string& m) { std::cerr << m << '\n'; };
  const StrategyRun run = train_strategy(opt);
  for (const auto& s : run.seeds) {
    std::cout << strategy_name(run.kind) << " seed " << s.seed;
    if (s.eval) {
      std::cout << ": success " << s.eval->report.success_rate << "% collision " << s.eval->report.collision_rate
                << "% traffic speed " << s.eval->report.traffic_speed_mean << " m/s";
    }
    if (s.bc) std::cout << " (bc train accuracy " << s.bc->train_accuracy << ")";
    std::cout << '\n';
  }
  const ReportResult rep = report(out);
  if (!rep.complete) {
    for (const auto& m : rep.missing) std::cerr << "missing: " << m << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, int runs, const std::string& out, std::uint64_t seed,
             const std::string& config_path) {
  const RunConfig cfg = resolve_config(config_path, std::nullopt, std::nullopt);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const EvalResult res = evaluate(ck.params, runs, seed, cfg.env, true);
  write_eval(out, res);
  write_eval_report(std::cout, res.report);
  return 0;
}

int cmd_report(const std::string& dir) {
  const ReportResult rep = report(dir);
  if (!rep.complete) {
    std::cerr << "incomplete run directory:\n";
    for (const auto& m : rep.missing) std::cerr << "  missing " << m << '\n';
    return 2;
  }
  for (const auto& p : rep.written) std::cout << p.string() << '\n';
  return 0;
}

int cmd_demo_record(std::uint64_t seed, const std::string& mode, const std::string& out, int sessions, int port) {
  if (mode == "scripted") {
    const auto episodes = record_scripted_sessions(seed, sessions);
    export_demos(out, episodes);
    int ok = 0;
    for (const auto& e : episodes) ok += !e.steps.empty() && e.steps.back().outcome == Outcome::Success;
    std::cout << "recorded " << episodes.size() << " scripted sessions (" << ok << " successful) to " << out << '\n';
    return 0;
  }
  if (mode != "human") throw CLI::ValidationError("--mode", "expected scripted or human");
  ServeOptions so;
  so.port = port;
  so.seed = seed;
  so.max_sessions = sessions;
  so.out = out;
  DemoServer server(so);
  std::cout << "waiting for a client on ws://127.0.0.1:" << server.port() << "/ (" << sessions << " sessions)\n";
  server.run(g_stop);
  std::cout << "recorded " << server.service().completed().size() << " sessions to " << out << '\n';
  return 0;
}

int cmd_demo_validate(const std::string& file) {
  std::vector<DemoEpisode> episodes;
  try {
    episodes = load_demo_file(file);
  } catch (const DemoFormatError& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return 1;
  }
  const ValidationReport rep = validate_demos(episodes);
  std::size_t steps = 0;
  for (const auto& e : episodes) steps += e.steps.size();
  if (!rep.ok) {
    for (const auto& p : rep.problems) std::cerr << "invalid: " << p << '\n';
    return 1;
  }
  std::cout << "ok: " << episodes.size() << " sessions, " << steps << " transitions replay exactly\n";
  return 0;
}

int cmd_demo_serve(int port, const std::string& out, std::uint64_t seed, int tick_ms, bool any) {
  ServeOptions so;
  so.port = port;
  so.seed = seed;
  so.any_address = any;
  so.tick_period = std::chrono::milliseconds(tick_ms);
  if (!out.empty()) so.out = out;
  DemoServer server(so);
  std::cout << "serving on ws://" << (any ? "0.0.0.0" : "127.0.0.1") << ':' << server.port() << "/\n" << std::flush;
  server.run(g_stop);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  CLI::App app{"Lane-change D3QN training, evaluation and demonstration tools"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a strategy over several seeds");
  std::string strategy, seeds = "0", demos, out, config_path;
  std::optional<int> episodes, horizon;
  int jobs = 0;
  bool no_eval = false;
  train->add_option("--strategy", strategy, "proposed | vanilla | il")->required()->check(
      CLI::IsMember({"proposed", "vanilla", "il"}));
  train->add_option("--seeds", seeds, "seed list: 0..4, 3 or 0,2,5");
  train->add_option("--episodes", episodes, "training episodes per seed");
  train->add_option("--epsilon-horizon", horizon, "episodes of epsilon decay");
  train->add_option("--demos", demos, "demo file (proposed, il)");
  train->add_option("--out", out, "run directory")->required();
  train->add_option("--config", config_path, "key = value overrides");
  train->add_option("--jobs", jobs, "parallel seeds (0: one per core)");
  train->add_flag("--no-eval", no_eval, "skip the greedy evaluation after training");

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  std::string checkpoint, eval_out, eval_config;
  int runs = 30;
  std::uint64_t eval_seed = RunConfig{}.eval_seed;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--runs", runs, "evaluation runs")->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--seed", eval_seed, "base evaluation seed");
  eval->add_option("--config", eval_config, "key = value overrides");

  auto* rep = app.add_subcommand("report", "regenerate curves, tables and traces of a run directory");
  std::string report_dir;
  rep->add_option("dir", report_dir, "run directory")->required();

  auto* config_help = app.add_subcommand("config-keys", "list configuration keys and defaults");

  auto* demo = app.add_subcommand("demo", "demonstration capture");
  demo->require_subcommand(1);
  auto* record = demo->add_subcommand("record", "record demonstration sessions");
  std::uint64_t demo_seed = 0;
  std::string mode = "scripted", demo_out;
  int sessions = 30, demo_port = 8765;
  record->add_option("--seed", demo_seed, "base seed");
  record->add_option("--mode", mode, "scripted | human")->check(CLI::IsMember({"scripted", "human"}));
  record->add_option("--out", demo_out, "demo file")->required();
  record->add_option("--sessions", sessions, "sessions to record")->check(CLI::PositiveNumber);
  record->add_option("--port", demo_port, "listening port (human mode)");

  auto* validate = demo->add_subcommand("validate", "replay-check a demo file");
  std::string validate_file;
  validate->add_option("file", validate_file, "demo file")->required()->check(CLI::ExistingFile);

  auto* serve = demo->add_subcommand("serve", "serve human sessions over WebSocket");
  int serve_port = 8765, tick_ms = 500;
  std::string serve_out;
  std::uint64_t serve_seed = 0;
  bool any = false;
  serve->add_option("--port", serve_port, "listening port");
  serve->add_option("--out", serve_out, "demo file rewritten after every session");
  serve->add_option("--seed", serve_seed, "base seed");
  serve->add_option("--tick-ms", tick_ms, "decision tick period")->check(CLI::PositiveNumber);
  serve->add_flag("--any-address", any, "listen on all interfaces instead of loopback");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(strategy, seeds, episodes, horizon, demos, out, config_path, jobs, no_eval);
    if (*eval) return cmd_eval(checkpoint, runs, eval_out, eval_seed, eval_config);
    if (*rep) return cmd_report(report_dir);
    if (*config_help) {
      std::cout << config_reference();
      return 0;
    }
    if (*record) return cmd_demo_record(demo_seed, mode, demo_out, sessions, demo_port);
    if (*validate) return cmd_demo_validate(validate_file);
    if (*serve) return cmd_demo_serve(serve_port, serve_out, serve_seed, tick_ms, any);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
