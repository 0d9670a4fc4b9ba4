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

#include <optional>
#include <string_view>

#include "lanechange/trajectory.hpp"
#include "lanechange/world.hpp"

namespace lanechange {

/// High-level decisions. Codes are part of every file format.
enum class DecisionAction : int {
  Maintain = 0,
  Accelerate = 1,
  Brake = 2,
  LaneLeft = 3,
  LaneRight = 4,
};

inline constexpr int kActionCount = 5;

std::string_view action_name(DecisionAction a);
/// Throws std::out_of_range for codes outside [0, 5).
DecisionAction action_from_code(int code);
inline int action_code(DecisionAction a) { return static_cast<int>(a); }

struct PidGains {
  double kp = 1.2;
  double ki = 0.05;
  double kd = 0.0;
  friend bool operator==(const PidGains&, const PidGains&) = default;
};

struct EgoController {
  double target_speed = 0.0;
  std::optional<TrajectoryPlan> active_plan;
  int plan_target_lane = 0;
  PidGains pid_gains{};
  double pid_integral = 0.0;
  double pid_prev_error = 0.0;
  bool pid_primed = false;

  double speed_step = 2.0 * kKmh;
  double lane_change_duration = kDefaultLaneChangeDuration;
  double max_accel = 2.0;
  int ignored_lane_changes = 0;

  friend bool operator==(const EgoController&, const EgoController&) = default;
};

/// Controller cruising at the ego's current speed.
EgoController make_controller(const WorldState& w);

/// One 0.5 s decision. Lane changes at the road edge or during an active
/// plan are ignored and counted in `ignored_lane_changes`.
EgoController apply_decision(EgoController ctrl, DecisionAction a, const WorldState& w);

struct ControlCommand {
  double accel = 0.0;
  double lateral_speed = 0.0;
};

/// One 0.02 s tracking step: min(PID, IDM governor) longitudinally and the
/// plan's average speed over the coming tick laterally. Updates PID state.
ControlCommand control_tick(EgoController& ctrl, const WorldState& w);

/// Clears an elapsed plan and snaps the ego onto its target lane center.
/// Returns the lane offset of the completed change (+1 right, -1 left) or 0.
int complete_plan_if_done(EgoController& ctrl, WorldState& w);

}  // namespace lanechange
