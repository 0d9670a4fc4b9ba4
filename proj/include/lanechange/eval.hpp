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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lanechange/demo.hpp"
#include "lanechange/trainer.hpp"

namespace lanechange {

enum class StrategyKind { Proposed, VanillaD3QN, ImitationIL };

std::string_view strategy_name(StrategyKind k);
/// "proposed", "vanilla" or "il". Throws std::invalid_argument otherwise.
StrategyKind strategy_from_name(std::string_view name);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration file: `key = value` lines, `#` comments.

struct BcConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  double validation_fraction = 0.2;

  friend bool operator==(const BcConfig&, const BcConfig&) = default;
};

struct RunConfig {
  TrainerConfig trainer{};
  EnvConfig env{};
  BcConfig bc{};
  int eval_runs = 30;
  std::uint64_t eval_seed = 0x5eed;
};

/// Applies overrides on top of `base`. Throws ConfigError on unknown keys or
/// unparsable values.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
/// Every recognised key with its resolved value.
void write_config(std::ostream& out, const RunConfig& cfg);
/// Documentation of the recognised keys, one per line.
std::string config_reference();

// ---------------------------------------------------------------------------
// Curves

/// Percentage of collisions over episodes (e-window+1 .. e); the first
/// episodes use the available prefix.
std::vector<double> rolling_rate(const std::vector<bool>& events, int window = 50);

struct Aggregate {
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation across seeds
};

/// Element-wise mean and std; length is the shortest input series.
Aggregate aggregate(const std::vector<std::vector<double>>& series);

struct CurveSet {
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> reward;
  std::vector<std::vector<double>> final_lateral;
  std::vector<std::vector<double>> collision_rate;
  Aggregate reward_agg, lateral_agg, collision_agg;
};

CurveSet make_curves(const std::vector<std::uint64_t>& seeds,
                     const std::vector<std::vector<EpisodeMetrics>>& metrics, int window = 50);

// ---------------------------------------------------------------------------
// Behavior cloning

struct BcResult {
  NetworkParams<float> params;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double best_validation_loss = 0.0;
  int epochs = 0;
  int train_samples = 0;
  int validation_samples = 0;
  bool degenerate = false;  // the demonstrations use a single action
};

/// Softmax read-out over the Q outputs trained with cross-entropy against the
/// demonstrated actions. Episodes are split 80/20; training stops when the
/// validation loss has not improved for `patience` epochs and the best
/// parameters are returned. Throws std::invalid_argument on an empty set.
BcResult train_behavior_cloning(const std::vector<std::vector<Transition>>& episodes, std::uint64_t seed,
                                const BcConfig& cfg = {}, const Architecture& arch = {});

/// Row-wise softmax of a row-major N×A logit matrix.
std::vector<std::array<double, kActionCount>> softmax_rows(std::span<const float> logits);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRun {
  int run = 0;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Running;
  double reward = 0.0;
  int steps = 0;
  double traffic_mean_speed = 0.0;
  double final_lateral = 0.0;
  std::vector<TraceSample> trace;
};

struct EvalReport {
  double collision_rate = 0.0;  // percent
  double success_rate = 0.0;    // percent
  double traffic_speed_mean = 0.0;
  double traffic_speed_std = 0.0;
  int n_runs = 0;
};

struct EvalResult {
  EvalReport report;
  std::vector<EvalRun> runs;
};

std::uint64_t evaluation_seed(std::uint64_t base, int run);

/// Greedy (ε = 0) rollouts of `policy`, one per evaluation seed.
EvalResult evaluate(const NetworkParams<float>& policy, int runs, std::uint64_t base_seed,
                    const EnvConfig& env = {}, bool record_traces = true);
EvalReport summarize(const std::vector<EvalRun>& runs);

/// eval_runs.csv, eval_report.csv and traces/run_<k>.csv under `dir`.
void write_eval(const std::filesystem::path& dir, const EvalResult& result);
void write_eval_report(std::ostream& out, const EvalReport& r);

// ---------------------------------------------------------------------------
// Strategy runs

struct BatchEvent {
  std::uint64_t seed = 0;
  const MixedBatch* batch = nullptr;
  std::size_t demo_available = 0;     // buffer sizes when the batch was drawn
  std::size_t explore_available = 0;
};

struct TrainOptions {
  StrategyKind kind = StrategyKind::Proposed;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::filesystem::path> demo_file;
  std::filesystem::path out_dir;
  RunConfig config{};
  int jobs = 0;  // worker threads; 0 picks the hardware concurrency
  bool evaluate_after = true;
  std::function<void(const std::string&)> log;
  /// Sees every sampled minibatch of the D3QN strategies. Called from the
  /// worker threads, so it must be thread-safe when jobs > 1.
  using BatchObserver = std::function<void(const BatchEvent&)>;
  BatchObserver batch_observer;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeMetrics> metrics;
  std::size_t demo_buffer_size = 0;
  std::int64_t env_steps = 0;
  std::optional<BcResult> bc;
  std::optional<EvalResult> eval;
  NetworkParams<float> policy;
};

struct StrategyRun {
  StrategyKind kind = StrategyKind::Proposed;
  std::vector<SeedRun> seeds;
  CurveSet curves;
};

/// Trains every seed (in parallel when jobs > 1) and writes the run
/// directory. Throws ConfigError when Proposed or IL lack a demo file.
StrategyRun train_strategy(const TrainOptions& options);

/// Seed list from "0..4", "3" or "0,2,5".
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

// ---------------------------------------------------------------------------
// Report

struct ReportResult {
  bool complete = true;
  std::vector<std::string> missing;
  std::vector<std::filesystem::path> written;
};

/// Regenerates <dir>/report from the run directory. Output depends only on
/// the directory contents.
ReportResult report(const std::filesystem::path& dir);

}  // namespace lanechange
