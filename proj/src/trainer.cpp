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

#include "lanechange/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

namespace lanechange {

void TrainerConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (demo_batch < 0 || explore_batch < 0 || demo_batch + explore_batch != batch_size || batch_size <= 0) {
    throw std::invalid_argument("demo_batch + explore_batch must equal batch_size");
  }
  if (episodes < 0 || demo_episodes < 0) throw std::invalid_argument("episode counts must be non-negative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (epsilon.init < 0 || epsilon.init > 1 || epsilon.cutoff < 0 || epsilon.cutoff > 1) {
    throw std::invalid_argument("epsilon endpoints must lie in [0, 1]");
  }
}

int select_action(const NetworkParams<float>& theta, const Observation& obs, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) return static_cast<int>(rng.uniform_int(kActionCount));
  const QValues q = forward(theta, obs);
  return argmax<float>(q);
}

std::optional<MixedBatch> sample_mixed_batch(const ReplayBuffer& demo, const ReplayBuffer& explore,
                                             int n1, int n2, Rng& rng) {
  const std::size_t want = static_cast<std::size_t>(n1 + n2);
  if (demo.size() + explore.size() < want || want == 0) return std::nullopt;
  std::size_t from_demo = std::min<std::size_t>(n1, demo.size());
  std::size_t from_explore = std::min<std::size_t>(n2, explore.size());
  const std::size_t deficit = want - from_demo - from_explore;
  if (deficit > 0) {
    if (demo.size() > from_demo) {
      from_demo += std::min(deficit, demo.size() - from_demo);
    }
    from_explore = want - from_demo;
  }
  MixedBatch batch;
  batch.items.reserve(want);
  for (const std::size_t i : demo.sample_positions(from_demo, rng)) batch.items.push_back(&demo.at(i));
  for (const std::size_t i : explore.sample_positions(from_explore, rng)) batch.items.push_back(&explore.at(i));
  batch.demo_count = static_cast<int>(from_demo);
  batch.explore_count = static_cast<int>(from_explore);
  return batch;
}

TdBatch<float> to_td_batch(const MixedBatch& batch) {
  TdBatch<float> td;
  const std::size_t n = batch.items.size();
  td.inputs.resize(n * kObservationSize);
  td.next_inputs.resize(n * kObservationSize);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = *batch.items[i];
    observation_to_input(t.s, std::span<float>(td.inputs.data() + i * kObservationSize, kObservationSize));
    observation_to_input(t.s_next, std::span<float>(td.next_inputs.data() + i * kObservationSize, kObservationSize));
    td.actions.push_back(t.a);
    td.rewards.push_back(static_cast<float>(t.r));
    td.done.push_back(t.done ? 1 : 0);
    td.is_demo.push_back(t.is_demo ? 1 : 0);
  }
  return td;
}

template <class T>
std::vector<T> td_targets(const NetworkParams<T>& online, const NetworkParams<T>& target,
                          const TdBatch<T>& batch, double gamma) {
  const int n = batch.size();
  const int actions = online.arch.actions;
  const auto q_online = forward_batch<T>(online, batch.next_inputs, n);
  const auto q_target = forward_batch<T>(target, batch.next_inputs, n);
  std::vector<T> y(n);
  for (int i = 0; i < n; ++i) {
    const std::span<const T> row(q_online.data() + static_cast<std::size_t>(i) * actions, actions);
    const int best = argmax<T>(row);
    const T bootstrap = batch.done[i] ? T{} : q_target[static_cast<std::size_t>(i) * actions + best];
    y[i] = batch.rewards[i] + static_cast<T>(gamma) * bootstrap;
  }
  return y;
}

template <class T>
std::vector<T> group_weights(const TdBatch<T>& batch) {
  int demo = 0;
  for (const auto d : batch.is_demo) demo += d ? 1 : 0;
  const int explore = batch.size() - demo;
  std::vector<T> w(batch.size());
  for (int i = 0; i < batch.size(); ++i) {
    w[i] = batch.is_demo[i] ? T{1} / static_cast<T>(demo) : T{1} / static_cast<T>(explore);
  }
  return w;
}

template <class T>
TdLoss<T> compute_loss(const NetworkParams<T>& online, const NetworkParams<T>& target,
                       const TdBatch<T>& batch, double gamma) {
  TdLoss<T> out;
  out.td_targets = td_targets(online, target, batch, gamma);
  out.weights = group_weights(batch);
  out.loss = regression_loss<T>(online, {batch.inputs, batch.actions, out.td_targets, out.weights});
  return out;
}

template <class T>
T update_network(NetworkParams<T>& online, const NetworkParams<T>& target, AdamState<T>& opt,
                 const TdBatch<T>& batch, double gamma) {
  const auto y = td_targets(online, target, batch, gamma);
  const auto w = group_weights(batch);
  auto lg = backward<T>(online, {batch.inputs, batch.actions, y, w});
  optimize_step<T>(online, lg.grads, opt);
  return lg.loss;
}

template std::vector<float> td_targets<float>(const NetworkParams<float>&, const NetworkParams<float>&,
                                              const TdBatch<float>&, double);
template std::vector<double> td_targets<double>(const NetworkParams<double>&, const NetworkParams<double>&,
                                                const TdBatch<double>&, double);
template std::vector<float> group_weights<float>(const TdBatch<float>&);
template std::vector<double> group_weights<double>(const TdBatch<double>&);
template TdLoss<float> compute_loss<float>(const NetworkParams<float>&, const NetworkParams<float>&,
                                           const TdBatch<float>&, double);
template TdLoss<double> compute_loss<double>(const NetworkParams<double>&, const NetworkParams<double>&,
                                             const TdBatch<double>&, double);
template float update_network<float>(NetworkParams<float>&, const NetworkParams<float>&, AdamState<float>&,
                                     const TdBatch<float>&, double);
template double update_network<double>(NetworkParams<double>&, const NetworkParams<double>&,
                                       AdamState<double>&, const TdBatch<double>&, double);

// ---------------------------------------------------------------------------
// Metrics file

void write_metrics_header(std::ostream& out) {
  out << "episode,reward,final_lateral,collision,outcome,epsilon,steps,mean_loss\n";
}

void write_metrics_row(std::ostream& out, const EpisodeMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d,%s,%.17g,%d,%.17g\n", m.episode, m.reward, m.final_lateral,
                m.collision ? 1 : 0, m.aborted ? "aborted" : std::string(outcome_name(m.outcome)).c_str(),
                m.epsilon, m.steps, m.mean_loss);
  out << buf;
}

std::vector<EpisodeMetrics> read_metrics(std::istream& in) {
  std::vector<EpisodeMetrics> rows;
  std::string line;
  if (!std::getline(in, line) || line.rfind("episode,", 0) != 0) {
    throw std::runtime_error("metrics: missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw std::runtime_error("metrics: bad row: " + line);
    EpisodeMetrics m;
    m.episode = std::stoi(f[0]);
    m.reward = std::stod(f[1]);
    m.final_lateral = std::stod(f[2]);
    m.collision = f[3] == "1";
    if (f[4] == "aborted") {
      m.aborted = true;
    } else {
      m.outcome = outcome_from_name(f[4]);
    }
    m.epsilon = std::stod(f[5]);
    m.steps = std::stoi(f[6]);
    m.mean_loss = std::stod(f[7]);
    rows.push_back(m);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Trainer

std::uint64_t training_episode_seed(std::uint64_t run_seed, int episode) {
  return derive_seed(run_seed, 1'000'000ULL + static_cast<std::uint64_t>(episode));
}

std::uint64_t demo_episode_seed(std::uint64_t run_seed, int episode) {
  return derive_seed(run_seed, 2'000'000ULL + static_cast<std::uint64_t>(episode));
}

namespace {

Architecture with_flag(Architecture a, bool dueling_mean) {
  a.dueling_mean = dueling_mean;
  return a;
}

}  // namespace

Trainer::Trainer(TrainerConfig config, EnvConfig env_config)
    : config_(std::move(config)),
      env_config_(std::move(env_config)),
      env_(env_config_),
      rng_(derive_seed(config_.seed, 0)),
      q1_(init_params<float>(with_flag(config_.arch, config_.dueling_mean), derive_seed(config_.seed, 1))),
      q2_(init_params<float>(with_flag(config_.arch, config_.dueling_mean), derive_seed(config_.seed, 2))),
      opt1_(q1_.size(), config_.learning_rate),
      opt2_(q2_.size(), config_.learning_rate),
      demo_buffer_(config_.buffer_capacity),
      explore_buffer_(config_.buffer_capacity) {
  config_.validate();
}

std::size_t Trainer::record_demonstrations(const Demonstrator& demonstrator, int episodes) {
  std::size_t stored = 0;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = env_.reset(demo_episode_seed(config_.seed, e));
    while (!env_.done()) {
      const DecisionAction a = demonstrator(env_);
      const StepResult res = env_.step(a);
      demo_buffer_.push({obs, action_code(a), res.reward.total, res.observation, res.done, true});
      obs = res.observation;
      ++stored;
    }
  }
  return stored;
}

void Trainer::load_demonstrations(std::span<const Transition> transitions) {
  for (Transition t : transitions) {
    t.is_demo = true;
    demo_buffer_.push(std::move(t));
  }
}

bool Trainer::update_once() {
  auto batch = sample_mixed_batch(demo_buffer_, explore_buffer_, config_.demo_batch, config_.explore_batch, rng_);
  if (!batch) return false;
  if (batch_observer_) batch_observer_(*batch);
  const TdBatch<float> td = to_td_batch(*batch);
  if (rng_.bernoulli(0.5)) {
    last_loss_ = update_network<float>(q1_, q2_, opt1_, td, config_.gamma);
    ++updates_q1_;
  } else {
    last_loss_ = update_network<float>(q2_, q1_, opt2_, td, config_.gamma);
    ++updates_q2_;
  }
  return true;
}

EpisodeMetrics Trainer::run_episode(int episode) {
  EpisodeMetrics m;
  m.episode = episode;
  m.epsilon = epsilon_at(config_.epsilon, episode);
  double loss_sum = 0.0;
  int updates = 0;
  try {
    Observation obs = env_.reset(training_episode_seed(config_.seed, episode));
    while (!env_.done()) {
      const int a = select_action(q1_, obs, m.epsilon, rng_);
      const StepResult res = env_.step(action_from_code(a));
      explore_buffer_.push({obs, a, res.reward.total, res.observation, res.done, false});
      ++env_steps_;
      m.reward += res.reward.total;
      obs = res.observation;
      if (update_once()) {
        loss_sum += last_loss_;
        ++updates;
      }
    }
    m.outcome = env_.outcome();
    m.collision = m.outcome == Outcome::Collision;
  } catch (const NumericError&) {
    throw;
  } catch (const std::exception& e) {
    std::cerr << "episode " << episode << " aborted: " << e.what() << '\n';
    m.aborted = true;
  }
  m.steps = env_.steps();
  m.final_lateral = env_.world().vehicles.empty() ? 0.0 : env_.world().ego().lateral_pos;
  m.mean_loss = updates > 0 ? loss_sum / updates : 0.0;
  return m;
}

void Trainer::checkpoint(const std::string& tag) const {
  if (!checkpoint_dir_) return;
  save_checkpoint(*checkpoint_dir_ / (tag + "_q1.bin"), q1_, opt1_.step);
  save_checkpoint(*checkpoint_dir_ / (tag + "_q2.bin"), q2_, opt2_.step);
}

std::vector<EpisodeMetrics> Trainer::train(const Demonstrator* demonstrator,
                                           const std::function<void(const EpisodeMetrics&)>& on_episode) {
  if (demonstrator && config_.demo_batch > 0 && config_.demo_episodes > 0) {
    record_demonstrations(*demonstrator, config_.demo_episodes);
  }
  std::vector<EpisodeMetrics> rows;
  rows.reserve(config_.episodes);
  for (int e = 0; e < config_.episodes; ++e) {
    rows.push_back(run_episode(e));
    if (on_episode) on_episode(rows.back());
    if (config_.checkpoint_every > 0 && (e + 1) % config_.checkpoint_every == 0) {
      checkpoint("ckpt_ep" + std::to_string(e + 1));
    }
  }
  checkpoint("final");
  return rows;
}

void Trainer::write_manifest(std::ostream& out) const {
  const auto& c = config_;
  out << "seed=" << c.seed << '\n'
      << "gamma=" << c.gamma << '\n'
      << "learning_rate=" << c.learning_rate << '\n'
      << "optimizer=adam beta1=0.9 beta2=0.999 eps=1e-8\n"
      << "batch_size=" << c.batch_size << '\n'
      << "demo_batch=" << c.demo_batch << '\n'
      << "explore_batch=" << c.explore_batch << '\n'
      << "episodes=" << c.episodes << '\n'
      << "demo_episodes=" << c.demo_episodes << '\n'
      << "buffer_capacity=" << c.buffer_capacity << '\n'
      << "epsilon_init=" << c.epsilon.init << '\n'
      << "epsilon_cutoff=" << c.epsilon.cutoff << '\n'
      << "epsilon_horizon=" << c.epsilon.decay_horizon << '\n'
      << "checkpoint_every=" << c.checkpoint_every << '\n'
      << "dueling_mean=" << (c.dueling_mean ? 1 : 0) << '\n'
      << "architecture=" << q1_.arch.describe() << '\n'
      << "parameters=" << q1_.size() << '\n'
      << "update_rule=fair coin picks the online network; the other evaluates a*\n"
      << "reward_weights=" << env_config_.weights.w1 << ',' << env_config_.weights.w2 << ','
      << env_config_.weights.w3 << ',' << env_config_.weights.w4 << '\n'
      << "max_steps=" << env_config_.max_steps << '\n';
}

}  // namespace lanechange
