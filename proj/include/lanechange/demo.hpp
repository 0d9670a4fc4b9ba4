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
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lanechange/env.hpp"
#include "lanechange/replay.hpp"

namespace lanechange {

// ---------------------------------------------------------------------------
// Scripted demonstrator

struct ScriptedThresholds {
  double lane_front_gap = 15.0;
  double lane_rear_gap = 4.0;
  double lane_rear_ttc = 4.0;
  double brake_ttc = 4.0;
  double cruise_speed = 30.0 * kKmh;
  double accelerate_front_gap = 25.0;
  // Drop back behind a vehicle blocking the right lane, down to this speed.
  bool yield_when_blocked = true;
  double yield_speed_floor = 10.0 * kKmh;
};

/// Rule policy standing in for the human subject: move right when the
/// adjacent lane is clear, brake on short front TTC, return to cruise.
DecisionAction scripted_demonstrator(const WorldState& w, const ScriptedThresholds& th = {});

// ---------------------------------------------------------------------------
// Key mapping

/// W/S/A/D/space, case-insensitive. nullopt for unmapped keys.
std::optional<DecisionAction> action_for_key(std::string_view key);

// ---------------------------------------------------------------------------
// Recorded sessions and the demo file

enum class SessionMode { Human, Scripted };
enum class SessionStatus { Active, Completed, Aborted };

std::string_view mode_name(SessionMode m);

struct DemoStep {
  int step = 0;
  DecisionAction action = DecisionAction::Maintain;
  RewardBreakdown reward;
  bool done = false;
  Outcome outcome = Outcome::Running;
  std::string digest;  // SHA-256 of the frame captured after the step
  FramePtr frame;

  friend bool operator==(const DemoStep& a, const DemoStep& b);
};

struct DemoEpisode {
  int session_id = 0;
  std::uint64_t seed = 0;
  SessionMode mode = SessionMode::Scripted;
  RoadConfig road{};
  RewardWeights weights{};
  int max_steps = 120;
  FramePtr initial_frame;
  std::vector<DemoStep> steps;

  friend bool operator==(const DemoEpisode& a, const DemoEpisode& b);
};

class DemoFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string frame_digest(const Frame& f);

inline constexpr int kDemoFormatVersion = 1;

void write_demos(std::ostream& out, const std::vector<DemoEpisode>& episodes);
/// Parses a demo file. Throws DemoFormatError on version, structure or
/// stored-digest mismatch.
std::vector<DemoEpisode> read_demos(std::istream& in);

void export_demos(const std::filesystem::path& path, const std::vector<DemoEpisode>& episodes);
std::vector<DemoEpisode> load_demo_file(const std::filesystem::path& path);

/// ξ^H tuples of one episode (is_demo set).
std::vector<Transition> to_transitions(const DemoEpisode& episode);
/// All tuples of a demo file, validated by replay first.
std::vector<Transition> load_demos(const std::filesystem::path& path);

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Re-simulates the seed and action sequence and compares every reward and
/// frame digest bit for bit.
ValidationReport validate_episode(const DemoEpisode& episode, const TrafficConfig& traffic = {});
ValidationReport validate_demos(const std::vector<DemoEpisode>& episodes, const TrafficConfig& traffic = {});

// ---------------------------------------------------------------------------
// Session service

class SessionBusy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SessionStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnknownKey : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct StepSummary {
  int step = 0;
  DecisionAction action = DecisionAction::Maintain;
  RewardBreakdown reward;
  bool done = false;
  Outcome outcome = Outcome::Running;
};

struct DemoSession {
  int id = 0;
  std::uint64_t seed = 0;
  SessionMode mode = SessionMode::Scripted;
  SessionStatus status = SessionStatus::Active;
  DemoEpisode record;
};

/// Owns at most one active session. Not thread-safe; one owner drives it.
class DemoService {
 public:
  explicit DemoService(EnvConfig env_config = {});

  /// Throws SessionBusy when a session is already active.
  const DemoSession& start_session(std::uint64_t seed, SessionMode mode);
  /// Maps the key and steps the environment. Throws UnknownKey (no step
  /// taken) or SessionStateError when no session is active.
  StepSummary submit_key(std::string_view key);
  StepSummary submit_action(DecisionAction a);
  /// Tick elapsed without input.
  StepSummary submit_timeout() { return submit_action(DecisionAction::Maintain); }
  /// Runs the scripted demonstrator to the end of the active session.
  const DemoSession& run_scripted(const ScriptedThresholds& th = {});
  void abort();

  bool has_active() const;
  const DemoSession* current() const { return current_ ? &*current_ : nullptr; }
  const Env& env() const { return env_; }
  /// Completed sessions, in completion order.
  const std::vector<DemoSession>& completed() const { return completed_; }
  std::vector<DemoEpisode> completed_episodes() const;

 private:
  EnvConfig env_config_;
  Env env_;
  std::optional<DemoSession> current_;
  std::vector<DemoSession> completed_;
  int next_id_ = 1;
};

/// Records `count` scripted sessions with seeds derived from `base_seed`.
std::vector<DemoEpisode> record_scripted_sessions(std::uint64_t base_seed, int count,
                                                  const EnvConfig& env_config = {});

}  // namespace lanechange
