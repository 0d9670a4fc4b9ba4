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

#include "lanechange/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lanechange {

// ---------------------------------------------------------------------------
// Rendering

namespace {

void fill_vehicle(Frame& f, const VehicleState& v, double ego_x, double road_width,
                  std::uint8_t level) {
  const double dx = v.longitudinal_pos - ego_x;
  const double half_l = 0.5 * v.length;
  const double half_w = 0.5 * v.width;
  // Pixel centers inside the rectangle (inclusive).
  const int c0 = static_cast<int>(std::ceil(dx - half_l - 1e-12)) + BevGeometry::kEgoCol;
  const int c1 = static_cast<int>(std::floor(dx + half_l + 1e-12)) + BevGeometry::kEgoCol;
  const double y0 = BevGeometry::row_center(0, road_width);
  const int r0 = static_cast<int>(std::ceil((v.lateral_pos - half_w - y0) / BevGeometry::kMetersPerRow - 1e-12));
  const int r1 = static_cast<int>(std::floor((v.lateral_pos + half_w - y0) / BevGeometry::kMetersPerRow + 1e-12));
  for (int r = std::max(r0, 0); r <= std::min(r1, Frame::kHeight - 1); ++r) {
    for (int c = std::max(c0, 0); c <= std::min(c1, Frame::kWidth - 1); ++c) {
      f.levels[r * Frame::kWidth + c] = level;
    }
  }
}

}  // namespace

Frame render_bev(const WorldState& w) {
  Frame f;
  const double road_width = w.road.road_width();
  const double y0 = BevGeometry::row_center(0, road_width);
  for (int boundary = 0; boundary <= w.road.lane_count; ++boundary) {
    const double y = boundary * w.road.lane_width;
    const int row = static_cast<int>(std::lround((y - y0) / BevGeometry::kMetersPerRow));
    if (row < 0 || row >= Frame::kHeight) continue;
    std::fill_n(f.levels.begin() + row * Frame::kWidth, Frame::kWidth, palette::kMarking);
  }
  const auto& ego = w.ego();
  for (const auto& v : w.vehicles) {
    if (!v.is_ego) fill_vehicle(f, v, ego.longitudinal_pos, road_width, palette::kTraffic);
  }
  fill_vehicle(f, ego, ego.longitudinal_pos, road_width, palette::kEgo);
  return f;
}

bool operator==(const Observation& a, const Observation& b) {
  for (int i = 0; i < kStackDepth; ++i) {
    if (a.frames[i] == b.frames[i]) continue;
    if (!a.frames[i] || !b.frames[i] || *a.frames[i] != *b.frames[i]) return false;
  }
  return true;
}

Observation observe(std::span<const FramePtr> history) {
  if (history.empty()) throw std::invalid_argument("observe: empty frame history");
  Observation obs;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(history.size());
  for (int slot = 0; slot < kStackDepth; ++slot) {
    const std::ptrdiff_t idx = n - kStackDepth + slot;
    obs.frames[slot] = history[std::max<std::ptrdiff_t>(idx, 0)];
  }
  return obs;
}

void observation_to_input(const Observation& obs, std::span<float> out) {
  if (out.size() != static_cast<std::size_t>(kObservationSize)) {
    throw std::invalid_argument("observation_to_input: output size mismatch");
  }
  constexpr float kScale = 1.0f / 255.0f;
  for (int k = 0; k < kStackDepth; ++k) {
    const auto& levels = obs.frames[k]->levels;
    float* dst = out.data() + k * Frame::kPixels;
    for (int i = 0; i < Frame::kPixels; ++i) dst[i] = static_cast<float>(levels[i]) * kScale;
  }
}

// ---------------------------------------------------------------------------
// Reward

RewardBreakdown compute_reward(const WorldState& /*prev*/, const WorldState& cur,
                               const RewardEvents& events, const RewardWeights& weights) {
  RewardBreakdown r;
  if (events.rightward_change_completed) r.r1 = weights.w1;
  if (events.collision) r.r2 = weights.w2;

  const auto& ego = cur.ego();
  const int lane = cur.road.lane_at(ego.lateral_pos);
  const auto around = neighbors(cur, ego.id, lane);
  if (around.front) {
    if (const auto t = ttc(cur, ego.id, *around.front)) r.r3 = weights.w3 / *t;
  }
  if (around.rear) {
    if (const auto t = ttc(cur, *around.rear, ego.id)) r.r4 = weights.w4 / *t;
  }
  r.total = r.r1 + r.r2 + r.r3 + r.r4;
  return r;
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Success: return "success";
    case Outcome::Collision: return "collision";
    case Outcome::MissedExit: return "missed_exit";
  }
  return "unknown";
}

Outcome outcome_from_name(std::string_view name) {
  for (Outcome o : {Outcome::Running, Outcome::Success, Outcome::Collision, Outcome::MissedExit}) {
    if (outcome_name(o) == name) return o;
  }
  throw std::invalid_argument("unknown outcome: " + std::string(name));
}

void write_episode_log(std::ostream& out, std::span<const EpisodeLogRecord> log) {
  out << "step,time,action,r1,r2,r3,r4,total,ego_lateral,ego_longitudinal,ego_speed,outcome\n";
  char buf[512];
  for (const auto& rec : log) {
    std::snprintf(buf, sizeof buf, "%d,%.2f,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n",
                  rec.step, rec.time, action_code(rec.action), rec.reward.r1, rec.reward.r2,
                  rec.reward.r3, rec.reward.r4, rec.reward.total, rec.ego_lateral,
                  rec.ego_longitudinal, rec.ego_speed, std::string(outcome_name(rec.outcome)).c_str());
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Environment

Env::Env(EnvConfig config) : config_(std::move(config)) { config_.road.validate(); }

Observation Env::reset(std::uint64_t seed) {
  seed_ = seed;
  world_ = spawn_world(seed, config_.road, config_.traffic);
  controller_ = make_controller(world_);
  steps_ = 0;
  started_ = true;
  outcome_ = Outcome::Running;
  frames_.clear();
  log_.clear();
  trace_.clear();
  traffic_speed_sum_ = 0.0;
  traffic_speed_count_ = 0;
  frames_.push_back(std::make_shared<const Frame>(render_bev(world_)));
  observation_ = observe(frames_);
  record_tick();
  return observation_;
}

void Env::record_tick() {
  for (const auto& v : world_.vehicles) {
    if (v.is_ego) continue;
    traffic_speed_sum_ += v.speed;
    ++traffic_speed_count_;
  }
  if (config_.record_trace) {
    const auto& ego = world_.ego();
    trace_.push_back({world_.time(), ego.lateral_pos, ego.lateral_speed, ego.longitudinal_pos, ego.speed});
  }
}

double Env::mean_traffic_speed() const {
  return traffic_speed_count_ == 0 ? 0.0 : traffic_speed_sum_ / static_cast<double>(traffic_speed_count_);
}

StepResult Env::step(DecisionAction a) {
  if (!started_) throw EnvStateError("Env::step before reset");
  if (done()) throw EnvStateError("Env::step on a finished episode");

  const WorldState prev = world_;
  const bool had_plan = controller_.active_plan.has_value();
  controller_ = apply_decision(controller_, a, world_);
  world_.ego().target_speed = controller_.target_speed;
  if (!had_plan && controller_.active_plan.has_value()) {
    world_.ego().lane_target = controller_.plan_target_lane;
  }

  const auto& road = world_.road;
  RewardEvents events;
  bool reached_shoulder = false;
  for (int tick = 0; tick < kTicksPerDecision; ++tick) {
    const ControlCommand cmd = control_tick(controller_, world_);
    world_ = step_world(std::move(world_), cmd.accel, cmd.lateral_speed);
    if (complete_plan_if_done(controller_, world_) > 0) events.rightward_change_completed = true;

    const auto& ego = world_.ego();
    for (const auto& [x, y] : detect_collision(world_)) {
      if (x == ego.id || y == ego.id) events.collision = true;
    }
    if (!controller_.active_plan.has_value() && road.lane_at(ego.lateral_pos) == road.shoulder_lane &&
        std::abs(ego.lateral_pos - road.lane_center(road.shoulder_lane)) < 1e-6 &&
        ego.longitudinal_pos <= road.goal_distance) {
      reached_shoulder = true;
    }
    record_tick();
  }

  ++steps_;
  frames_.push_back(std::make_shared<const Frame>(render_bev(world_)));
  observation_ = observe(frames_);

  StepResult result;
  result.observation = observation_;
  result.reward = compute_reward(prev, world_, events, config_.weights);

  const auto& ego = world_.ego();
  if (events.collision) {
    outcome_ = Outcome::Collision;
  } else if (reached_shoulder) {
    outcome_ = Outcome::Success;
  } else if (ego.longitudinal_pos > road.goal_distance || steps_ >= config_.max_steps) {
    outcome_ = Outcome::MissedExit;
  }
  result.outcome = outcome_;
  result.done = done();

  log_.push_back({steps_ - 1, world_.time(), a, result.reward, ego.lateral_pos, ego.longitudinal_pos,
                  ego.speed, outcome_});
  return result;
}

}  // namespace lanechange
