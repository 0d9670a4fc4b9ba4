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

#include "lanechange/ego_control.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lanechange {

std::string_view action_name(DecisionAction a) {
  switch (a) {
    case DecisionAction::Maintain: return "maintain";
    case DecisionAction::Accelerate: return "accelerate";
    case DecisionAction::Brake: return "brake";
    case DecisionAction::LaneLeft: return "lane_left";
    case DecisionAction::LaneRight: return "lane_right";
  }
  return "unknown";
}

DecisionAction action_from_code(int code) {
  if (code < 0 || code >= kActionCount) {
    throw std::out_of_range("action code out of range: " + std::to_string(code));
  }
  return static_cast<DecisionAction>(code);
}

EgoController make_controller(const WorldState& w) {
  EgoController ctrl;
  ctrl.target_speed = w.ego().speed;
  ctrl.plan_target_lane = w.ego().lane_target;
  return ctrl;
}

EgoController apply_decision(EgoController ctrl, DecisionAction a, const WorldState& w) {
  const auto& ego = w.ego();
  const auto& road = w.road;
  switch (a) {
    case DecisionAction::Maintain:
      break;
    case DecisionAction::Accelerate:
      ctrl.target_speed = std::clamp(ctrl.target_speed + ctrl.speed_step, 0.0, road.speed_ceiling);
      break;
    case DecisionAction::Brake:
      ctrl.target_speed = std::clamp(ctrl.target_speed - ctrl.speed_step, 0.0, road.speed_ceiling);
      break;
    case DecisionAction::LaneLeft:
    case DecisionAction::LaneRight: {
      const int lane = road.lane_at(ego.lateral_pos);
      const int target = lane + (a == DecisionAction::LaneRight ? 1 : -1);
      if (ctrl.active_plan.has_value() || target < 0 || target >= road.lane_count) {
        ++ctrl.ignored_lane_changes;
        break;
      }
      ctrl.active_plan = plan_quintic(ego.lateral_pos, road.lane_center(target),
                                      ctrl.lane_change_duration, w.time());
      ctrl.plan_target_lane = target;
      break;
    }
  }
  return ctrl;
}

ControlCommand control_tick(EgoController& ctrl, const WorldState& w) {
  const auto& ego = w.ego();
  const double error = ctrl.target_speed - ego.speed;
  const double derivative = ctrl.pid_primed ? (error - ctrl.pid_prev_error) / kControlDt : 0.0;
  const auto& g = ctrl.pid_gains;
  const double unclamped = g.kp * error + g.ki * (ctrl.pid_integral + error * kControlDt) +
                           g.kd * derivative;
  const double pid = std::clamp(unclamped, -kMaxBraking, ctrl.max_accel);
  // Conditional integration: freeze the integrator while saturated.
  if (pid == unclamped) ctrl.pid_integral += error * kControlDt;
  ctrl.pid_prev_error = error;
  ctrl.pid_primed = true;

  ControlCommand cmd;
  cmd.accel = pid;
  if (idm_leader(w, ego.id).has_value()) {
    cmd.accel = std::min(cmd.accel, idm_for(w, ego.id, w.road.speed_ceiling));
  }

  if (ctrl.active_plan.has_value()) {
    const double t = w.time();
    cmd.lateral_speed =
        (ctrl.active_plan->position(t + kControlDt) - ctrl.active_plan->position(t)) / kControlDt;
  }
  return cmd;
}

int complete_plan_if_done(EgoController& ctrl, WorldState& w) {
  if (!ctrl.active_plan.has_value() || !ctrl.active_plan->finished(w.time())) return 0;
  auto& ego = w.ego();
  const int from = w.road.lane_at(ctrl.active_plan->start_lateral);
  ego.lateral_pos = ctrl.active_plan->end_lateral;
  ego.lateral_speed = 0.0;
  ego.lane_target = ctrl.plan_target_lane;
  ctrl.active_plan.reset();
  return ctrl.plan_target_lane - from;
}

}  // namespace lanechange
