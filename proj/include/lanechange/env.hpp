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
#include <iosfwd>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "lanechange/ego_control.hpp"
#include "lanechange/world.hpp"

namespace lanechange {

/// 80×45 bird's-eye raster, row-major with rows along the lateral axis and
/// columns along the longitudinal axis. Pixels are stored as 8-bit levels;
/// intensity is level / 255.
struct Frame {
  static constexpr int kWidth = 80;
  static constexpr int kHeight = 45;
  static constexpr int kPixels = kWidth * kHeight;

  std::array<std::uint8_t, kPixels> levels{};

  std::uint8_t at(int row, int col) const { return levels[row * kWidth + col]; }
  float intensity(int row, int col) const { return static_cast<float>(at(row, col)) / 255.0f; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

using FramePtr = std::shared_ptr<const Frame>;

namespace palette {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kMarking = 64;
inline constexpr std::uint8_t kTraffic = 128;
inline constexpr std::uint8_t kEgo = 255;
}  // namespace palette

/// Rasterization geometry. Column c covers longitudinal offset c - 25 m
/// from the ego (pixel centers); row r covers lateral y = -4 + 0.5 r m.
struct BevGeometry {
  static constexpr double kBehind = 25.0;
  static constexpr double kMetersPerCol = 1.0;
  static constexpr double kMetersPerRow = 0.5;
  static constexpr int kEgoCol = 25;

  static double col_center(int col) { return (col - kEgoCol) * kMetersPerCol; }
  /// Lateral coordinate of row centers for a road of width `road_width`.
  static double row_center(int row, double road_width) {
    return 0.5 * road_width - 0.5 * Frame::kHeight * kMetersPerRow + (row + 0.5) * kMetersPerRow;
  }
};

/// Ego-centric rasterization; pure function of the world.
Frame render_bev(const WorldState& w);

inline constexpr int kStackDepth = 4;
inline constexpr int kObservationSize = kStackDepth * Frame::kPixels;

/// Four frames, oldest first.
struct Observation {
  std::array<FramePtr, kStackDepth> frames;

  friend bool operator==(const Observation& a, const Observation& b);
};

/// Last four frames of `history`, oldest first, padded with the earliest
/// frame. Requires a non-empty history.
Observation observe(std::span<const FramePtr> history);

/// Writes the observation as a C×H×W intensity tensor (C = 4).
void observation_to_input(const Observation& obs, std::span<float> out);

struct RewardWeights {
  double w1 = 1.0;
  double w2 = -10.0;
  double w3 = -1.0;
  double w4 = -1.0;
  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

struct RewardBreakdown {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  double total = 0.0;
  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

struct RewardEvents {
  bool rightward_change_completed = false;
  bool collision = false;
};

RewardBreakdown compute_reward(const WorldState& prev, const WorldState& cur,
                               const RewardEvents& events, const RewardWeights& weights = {});

enum class Outcome : int { Running = 0, Success = 1, Collision = 2, MissedExit = 3 };

std::string_view outcome_name(Outcome o);
Outcome outcome_from_name(std::string_view name);

struct StepResult {
  Observation observation;
  RewardBreakdown reward;
  bool done = false;
  Outcome outcome = Outcome::Running;
};

struct EnvConfig {
  RoadConfig road{};
  TrafficConfig traffic{};
  RewardWeights weights{};
  int max_steps = 120;
  bool record_trace = false;
};

/// One decision tick of the episode log.
struct EpisodeLogRecord {
  int step = 0;
  double time = 0.0;
  DecisionAction action = DecisionAction::Maintain;
  RewardBreakdown reward;
  double ego_lateral = 0.0;
  double ego_longitudinal = 0.0;
  double ego_speed = 0.0;
  Outcome outcome = Outcome::Running;
};

void write_episode_log(std::ostream& out, std::span<const EpisodeLogRecord> log);

/// Ego kinematics at control-tick resolution.
struct TraceSample {
  double time = 0.0;
  double lateral_pos = 0.0;
  double lateral_speed = 0.0;
  double longitudinal_pos = 0.0;
  double speed = 0.0;
};

class EnvStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The decision-level environment: one step applies a decision, runs 25
/// control ticks and captures one frame.
class Env {
 public:
  explicit Env(EnvConfig config = {});

  Observation reset(std::uint64_t seed);
  /// Throws EnvStateError when the episode is finished or never started.
  StepResult step(DecisionAction a);

  const EnvConfig& config() const { return config_; }
  const WorldState& world() const { return world_; }
  const EgoController& controller() const { return controller_; }
  std::uint64_t seed() const { return seed_; }
  int steps() const { return steps_; }
  bool done() const { return outcome_ != Outcome::Running; }
  Outcome outcome() const { return outcome_; }
  const Observation& observation() const { return observation_; }
  const std::vector<FramePtr>& frames() const { return frames_; }
  const std::vector<EpisodeLogRecord>& log() const { return log_; }
  const std::vector<TraceSample>& trace() const { return trace_; }
  /// Time-and-vehicle average speed of the surrounding traffic so far.
  double mean_traffic_speed() const;

 private:
  EnvConfig config_;
  WorldState world_;
  EgoController controller_;
  std::uint64_t seed_ = 0;
  int steps_ = 0;
  bool started_ = false;
  Outcome outcome_ = Outcome::Running;
  Observation observation_;
  std::vector<FramePtr> frames_;
  std::vector<EpisodeLogRecord> log_;
  std::vector<TraceSample> trace_;
  double traffic_speed_sum_ = 0.0;
  std::int64_t traffic_speed_count_ = 0;

  void record_tick();
};

}  // namespace lanechange
