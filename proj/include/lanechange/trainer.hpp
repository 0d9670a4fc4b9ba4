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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lanechange/env.hpp"
#include "lanechange/replay.hpp"
#include "lanechange/value_net.hpp"

namespace lanechange {

struct TrainerConfig {
  std::uint64_t seed = 0;
  double gamma = 0.9;
  double learning_rate = 0.005;
  int batch_size = 64;
  int demo_batch = 16;      // n1
  int explore_batch = 48;   // n2
  int episodes = 1000;      // E2
  int demo_episodes = 30;   // E1
  std::size_t buffer_capacity = 1'000'000;
  EpsilonSchedule epsilon{1.0, 0.1, 800};
  int checkpoint_every = 100;
  bool dueling_mean = true;
  Architecture arch{};

  void validate() const;
};

/// ε-greedy over forward(θ, obs). The uniform draw is always consumed.
int select_action(const NetworkParams<float>& theta, const Observation& obs, double epsilon, Rng& rng);

/// Mixed minibatch drawn from the demonstration and exploration buffers.
struct MixedBatch {
  std::vector<const Transition*> items;
  int demo_count = 0;
  int explore_count = 0;
};

/// n1 draws from `demo` and n2 from `explore`; a short buffer's deficit is
/// taken from the other one. nullopt when fewer than n1 + n2 transitions
/// exist in total.
std::optional<MixedBatch> sample_mixed_batch(const ReplayBuffer& demo, const ReplayBuffer& explore,
                                             int n1, int n2, Rng& rng);

/// Network-ready view of a batch: inputs are N × input_size tensors.
template <class T>
struct TdBatch {
  std::vector<T> inputs;
  std::vector<T> next_inputs;
  std::vector<int> actions;
  std::vector<T> rewards;
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> is_demo;

  int size() const { return static_cast<int>(actions.size()); }
};

TdBatch<float> to_td_batch(const MixedBatch& batch);

template <class T>
struct TdLoss {
  T loss{};
  std::vector<T> td_targets;
  /// Per-sample weights: 1/n_demo for demonstrations, 1/n_explore otherwise.
  std::vector<T> weights;
};

/// Double-Q targets: a* = argmax Q_online(s'), y = r + γ(1 - done) Q_target(s', a*).
template <class T>
std::vector<T> td_targets(const NetworkParams<T>& online, const NetworkParams<T>& target,
                          const TdBatch<T>& batch, double gamma);

/// Group weights for the two-term loss (mean over demonstrations plus mean
/// over exploration samples).
template <class T>
std::vector<T> group_weights(const TdBatch<T>& batch);

/// Loss = mean_demo (y - Q)² + mean_explore (y - Q)², targets constant.
template <class T>
TdLoss<T> compute_loss(const NetworkParams<T>& online, const NetworkParams<T>& target,
                       const TdBatch<T>& batch, double gamma);

/// One gradient step on `online` against `target`. Returns the loss.
template <class T>
T update_network(NetworkParams<T>& online, const NetworkParams<T>& target, AdamState<T>& opt,
                 const TdBatch<T>& batch, double gamma);

struct EpisodeMetrics {
  int episode = 0;
  double reward = 0.0;
  double final_lateral = 0.0;
  bool collision = false;
  Outcome outcome = Outcome::Running;
  double epsilon = 0.0;
  int steps = 0;
  double mean_loss = 0.0;
  bool aborted = false;

  friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpisodeMetrics& m);
/// Parses a metrics file written by write_metrics_*.
std::vector<EpisodeMetrics> read_metrics(std::istream& in);

using Demonstrator = std::function<DecisionAction(const Env&)>;

/// Dual-buffer ε-greedy dueling double-Q learner.
class Trainer {
 public:
  Trainer(TrainerConfig config, EnvConfig env_config);

  const TrainerConfig& config() const { return config_; }
  const EnvConfig& env_config() const { return env_config_; }

  /// Runs `episodes` demonstration episodes and stores their tuples in the
  /// demonstration buffer. Returns the number of transitions stored.
  std::size_t record_demonstrations(const Demonstrator& demonstrator, int episodes);
  /// Adds externally recorded demonstration tuples (is_demo is forced on).
  void load_demonstrations(std::span<const Transition> transitions);

  /// One ε-greedy training episode with per-step updates.
  EpisodeMetrics run_episode(int episode);

  /// Phase 1 (when a demonstrator is given and demo episodes are configured)
  /// followed by `episodes` training episodes. `on_episode` sees each row.
  std::vector<EpisodeMetrics> train(const Demonstrator* demonstrator = nullptr,
                                    const std::function<void(const EpisodeMetrics&)>& on_episode = {});

  void set_checkpoint_dir(std::optional<std::filesystem::path> dir) { checkpoint_dir_ = std::move(dir); }
  void set_batch_observer(std::function<void(const MixedBatch&)> f) { batch_observer_ = std::move(f); }
  /// Writes every hyperparameter, seed and flag.
  void write_manifest(std::ostream& out) const;

  const NetworkParams<float>& q1() const { return q1_; }
  const NetworkParams<float>& q2() const { return q2_; }
  const ReplayBuffer& demo_buffer() const { return demo_buffer_; }
  const ReplayBuffer& explore_buffer() const { return explore_buffer_; }
  std::int64_t updates_q1() const { return updates_q1_; }
  std::int64_t updates_q2() const { return updates_q2_; }
  std::int64_t env_steps() const { return env_steps_; }
  /// Single update on a freshly sampled batch; false when not ready.
  bool update_once();

 private:
  TrainerConfig config_;
  EnvConfig env_config_;
  Env env_;
  Rng rng_;
  NetworkParams<float> q1_, q2_;
  AdamState<float> opt1_, opt2_;
  ReplayBuffer demo_buffer_, explore_buffer_;
  std::int64_t updates_q1_ = 0, updates_q2_ = 0, env_steps_ = 0;
  double last_loss_ = 0.0;
  std::optional<std::filesystem::path> checkpoint_dir_;
  std::function<void(const MixedBatch&)> batch_observer_;

  void checkpoint(const std::string& tag) const;
};

/// Seeds used for episode environments, kept disjoint per purpose.
std::uint64_t training_episode_seed(std::uint64_t run_seed, int episode);
std::uint64_t demo_episode_seed(std::uint64_t run_seed, int episode);

}  // namespace lanechange
