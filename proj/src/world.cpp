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

#include "lanechange/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace lanechange {

int RoadConfig::lane_at(double lateral) const {
  const int lane = static_cast<int>(std::floor(lateral / lane_width));
  return std::clamp(lane, 0, lane_count - 1);
}

void RoadConfig::validate() const {
  if (lane_count < 2) throw std::invalid_argument("RoadConfig: lane_count must be >= 2");
  if (!(lane_width > 0.0)) throw std::invalid_argument("RoadConfig: lane_width must be > 0");
  if (!(goal_distance > 0.0)) throw std::invalid_argument("RoadConfig: goal_distance must be > 0");
  if (shoulder_lane < 0 || shoulder_lane >= lane_count) {
    throw std::invalid_argument("RoadConfig: shoulder_lane out of range");
  }
  if (!(speed_floor > 0.0) || !(speed_ceiling >= speed_floor)) {
    throw std::invalid_argument("RoadConfig: invalid speed range");
  }
}

void IdmParams::validate() const {
  if (!(a_max > 0 && b_comf > 0 && s0 > 0 && headway_T > 0 && delta > 0)) {
    throw std::invalid_argument("IdmParams: all parameters must be strictly positive");
  }
}

const VehicleState& WorldState::ego() const {
  for (const auto& v : vehicles) {
    if (v.is_ego) return v;
  }
  throw std::logic_error("WorldState has no ego vehicle");
}

VehicleState& WorldState::ego() {
  return const_cast<VehicleState&>(std::as_const(*this).ego());
}

const VehicleState& WorldState::vehicle(int id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return v;
  }
  throw std::out_of_range("unknown vehicle id " + std::to_string(id));
}

// ---------------------------------------------------------------------------
// Geometry

bool occupies_lane(const VehicleState& v, int lane, const RoadConfig& road) {
  const double lo = std::max(v.lateral_pos - 0.5 * v.width, lane * road.lane_width);
  const double hi = std::min(v.lateral_pos + 0.5 * v.width, (lane + 1) * road.lane_width);
  return hi - lo > 1e-9;
}

double bumper_gap(const VehicleState& follower, const VehicleState& leader) {
  return leader.rear_bumper() - follower.front_bumper();
}

namespace {

bool ahead_of(const VehicleState& a, const VehicleState& b) {
  if (a.longitudinal_pos != b.longitudinal_pos) return a.longitudinal_pos > b.longitudinal_pos;
  return a.id > b.id;
}

bool share_lane(const VehicleState& a, const VehicleState& b, const RoadConfig& road) {
  for (int lane = 0; lane < road.lane_count; ++lane) {
    if (occupies_lane(a, lane, road) && occupies_lane(b, lane, road)) return true;
  }
  return false;
}

// Nearest vehicles around `self` among those occupying `lane`; with
// `include_targets` vehicles heading into `lane` count too.
std::pair<const VehicleState*, const VehicleState*> lane_neighbors(const WorldState& w,
                                                                   const VehicleState& self,
                                                                   int lane,
                                                                   bool include_targets) {
  const VehicleState* front = nullptr;
  const VehicleState* rear = nullptr;
  for (const auto& o : w.vehicles) {
    if (o.id == self.id) continue;
    const bool in_lane =
        occupies_lane(o, lane, w.road) || (include_targets && o.lane_target == lane);
    if (!in_lane) continue;
    if (ahead_of(o, self)) {
      if (front == nullptr || ahead_of(*front, o)) front = &o;
    } else {
      if (rear == nullptr || ahead_of(o, *rear)) rear = &o;
    }
  }
  return {front, rear};
}

}  // namespace

std::vector<std::pair<int, int>> detect_collision(const WorldState& w) {
  std::vector<std::pair<int, int>> pairs;
  const auto& vs = w.vehicles;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      const auto& a = vs[i];
      const auto& b = vs[j];
      const double ox = 0.5 * (a.length + b.length) - std::abs(a.longitudinal_pos - b.longitudinal_pos);
      const double oy = 0.5 * (a.width + b.width) - std::abs(a.lateral_pos - b.lateral_pos);
      if (ox > 0.0 && oy > 0.0) pairs.emplace_back(std::min(a.id, b.id), std::max(a.id, b.id));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::optional<double> ttc(const WorldState& w, int follower_id, int leader_id) {
  const auto& f = w.vehicle(follower_id);
  const auto& l = w.vehicle(leader_id);
  const double closing = f.speed - l.speed;
  if (!(closing > 0.0) || !share_lane(f, l, w.road)) return std::nullopt;
  return std::max(bumper_gap(f, l) / closing, kTtcFloor);
}

Neighbors neighbors(const WorldState& w, int vehicle_id, int lane) {
  const auto& self = w.vehicle(vehicle_id);
  const auto [front, rear] = lane_neighbors(w, self, lane, false);
  Neighbors n;
  if (front) n.front = front->id;
  if (rear) n.rear = rear->id;
  return n;
}

std::optional<int> idm_leader(const WorldState& w, int vehicle_id) {
  const auto& self = w.vehicle(vehicle_id);
  const VehicleState* best = nullptr;
  for (int lane = 0; lane < w.road.lane_count; ++lane) {
    if (lane != self.lane_target && !occupies_lane(self, lane, w.road)) continue;
    const auto front = lane_neighbors(w, self, lane, false).first;
    if (front && (best == nullptr || ahead_of(*best, *front))) best = front;
  }
  if (best == nullptr) return std::nullopt;
  return best->id;
}

// ---------------------------------------------------------------------------
// IDM

double idm_acceleration(double v, double v0, std::optional<double> gap, double dv,
                        const IdmParams& p) {
  double interaction = 0.0;
  if (gap.has_value()) {
    if (*gap <= 0.0) return -kMaxBraking;
    const double s_star = p.s0 + v * p.headway_T + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf));
    const double ratio = std::max(s_star, 0.0) / *gap;
    interaction = ratio * ratio;
  }
  const double a = p.a_max * (1.0 - std::pow(v / v0, p.delta) - interaction);
  return std::clamp(a, -kMaxBraking, p.a_max);
}

double idm_for(const WorldState& w, int vehicle_id, double v0) {
  const auto& self = w.vehicle(vehicle_id);
  const auto leader_id = idm_leader(w, vehicle_id);
  if (!leader_id) return idm_acceleration(self.speed, v0, std::nullopt, 0.0, w.traffic.idm);
  const auto& leader = w.vehicle(*leader_id);
  return idm_acceleration(self.speed, v0, bumper_gap(self, leader), self.speed - leader.speed,
                          w.traffic.idm);
}

// ---------------------------------------------------------------------------
// Spawning and stepping

namespace {

// Lower initial speeds so nobody starts faster than a close leader.
void settle_initial_speeds(WorldState& w) {
  std::vector<std::size_t> order(w.vehicles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ahead_of(w.vehicles[a], w.vehicles[b]);
  });
  for (const std::size_t i : order) {
    auto& v = w.vehicles[i];
    if (v.is_ego) continue;
    const auto [front, rear] = lane_neighbors(w, v, v.lane_target, false);
    (void)rear;
    if (front && bumper_gap(v, *front) < 40.0) v.speed = std::min(v.speed, front->speed);
  }
}

bool placement_ok(const WorldState& w, int lane, double x, double spacing, int skip_id) {
  for (const auto& o : w.vehicles) {
    if (o.id == skip_id) continue;
    const bool in_lane = o.lane_target == lane || std::abs(o.lateral_pos - w.road.lane_center(lane)) <
                                                      w.road.lane_width * 0.5 + 0.5 * o.width;
    if (in_lane && std::abs(o.longitudinal_pos - x) < spacing) return false;
  }
  return true;
}

void run_traffic_manager(WorldState& w) {
  const auto& tm = w.traffic.manager;
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    const VehicleState& v = w.vehicles[i];
    if (v.is_ego || v.plan.has_value()) continue;
    const int lane = v.lane_target;
    const auto leader = lane_neighbors(w, v, lane, false).first;
    const bool blocked = leader != nullptr && bumper_gap(v, *leader) < tm.blocked_lookahead &&
                         leader->speed < v.target_speed - tm.blocked_margin;
    if (!blocked) continue;
    if (!w.rng.bernoulli(tm.change_probability)) continue;

    int target;
    if (lane == 0) {
      target = 1;
    } else if (lane == w.road.lane_count - 1) {
      target = lane - 1;
    } else {
      target = w.rng.bernoulli(0.5) ? lane - 1 : lane + 1;
    }
    const auto [front, rear] = lane_neighbors(w, v, target, true);
    if (front && bumper_gap(v, *front) <= tm.min_front_gap) continue;
    if (rear && bumper_gap(*rear, v) <= tm.min_rear_gap) continue;

    VehicleState& mv = w.vehicles[i];
    mv.lane_target = target;
    mv.plan = plan_quintic(mv.lateral_pos, w.road.lane_center(target), tm.lane_change_duration,
                           w.time());
  }
}

void recycle(WorldState& w) {
  const auto& ego = w.ego();
  const double ego_x = ego.longitudinal_pos;
  const double spacing = w.traffic.idm.s0 + 4.5 + 4.0;
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    if (w.vehicles[i].is_ego) continue;
    if (w.vehicles[i].longitudinal_pos >= ego_x - w.traffic.recycle_behind) continue;
    for (int attempt = 0; attempt < 20; ++attempt) {
      const int lane = static_cast<int>(w.rng.uniform_int(w.road.lane_count));
      const double x = ego_x + w.rng.uniform(w.traffic.recycle_ahead_min, w.traffic.recycle_ahead_max);
      if (!placement_ok(w, lane, x, spacing, w.vehicles[i].id)) continue;
      VehicleState& v = w.vehicles[i];
      v.lane_target = lane;
      v.lateral_pos = w.road.lane_center(lane);
      v.lateral_speed = 0.0;
      v.longitudinal_pos = x;
      v.plan.reset();
      v.accel = 0.0;
      const auto [front, rear] = lane_neighbors(w, v, lane, false);
      v.speed = v.target_speed;
      if (front && bumper_gap(v, *front) < 40.0) v.speed = std::min(v.speed, front->speed);
      if (rear && bumper_gap(*rear, v) < 40.0) v.speed = std::max(v.speed, std::min(rear->speed, v.target_speed));
      break;
    }
  }
}

}  // namespace

WorldState spawn_world(std::uint64_t seed, const RoadConfig& road, const TrafficConfig& traffic) {
  road.validate();
  traffic.idm.validate();
  WorldState w;
  w.rng = Rng(seed);
  w.road = road;
  w.traffic = traffic;

  VehicleState ego;
  ego.id = 0;
  ego.is_ego = true;
  ego.lane_target = 0;
  ego.lateral_pos = road.lane_center(0);
  ego.speed = traffic.ego_initial_speed;
  ego.target_speed = traffic.ego_initial_speed;
  w.vehicles.push_back(ego);

  const double spacing = traffic.idm.s0 + ego.length;
  for (int id = 1; id <= traffic.surrounding_count; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < traffic.spawn_retries && !placed; ++attempt) {
      const int lane = static_cast<int>(w.rng.uniform_int(road.lane_count));
      const double x = w.rng.uniform(-traffic.spawn_behind, traffic.spawn_ahead);
      bool ok = true;
      for (const auto& o : w.vehicles) {
        if (o.lane_target == lane && std::abs(o.longitudinal_pos - x) < spacing) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      VehicleState v;
      v.id = id;
      v.lane_target = lane;
      v.lateral_pos = road.lane_center(lane);
      v.longitudinal_pos = x;
      v.target_speed = w.rng.uniform(road.speed_floor, road.speed_ceiling);
      v.speed = v.target_speed;
      w.vehicles.push_back(v);
      placed = true;
    }
    if (!placed) {
      throw SpawnError("spawn_world: could not place vehicle " + std::to_string(id) + " after " +
                       std::to_string(traffic.spawn_retries) + " attempts");
    }
  }
  settle_initial_speeds(w);
  return w;
}

WorldState step_world(WorldState w, double ego_accel, double ego_lateral_speed, double dt) {
  if (std::abs(dt - kControlDt) > 1e-12) {
    throw std::invalid_argument("step_world: dt must be exactly 0.02 s");
  }
  if (w.tick % kTicksPerDecision == 0) run_traffic_manager(w);

  std::vector<double> accel(w.vehicles.size(), 0.0);
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    const auto& v = w.vehicles[i];
    accel[i] = v.is_ego ? ego_accel : idm_for(w, v.id, v.target_speed);
  }

  const double t_next = static_cast<double>(w.tick + 1) * kControlDt;
  const double road_width = w.road.road_width();
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    auto& v = w.vehicles[i];
    v.accel = accel[i];
    v.speed = std::max(0.0, v.speed + accel[i] * dt);
    if (v.is_ego) v.speed = std::min(v.speed, w.road.speed_ceiling);
    v.longitudinal_pos += v.speed * dt;

    if (v.is_ego) {
      v.lateral_speed = ego_lateral_speed;
      v.lateral_pos = std::clamp(v.lateral_pos + ego_lateral_speed * dt, 0.0, road_width);
    } else if (v.plan.has_value()) {
      const double next = v.plan->position(t_next);
      v.lateral_speed = (next - v.lateral_pos) / dt;
      v.lateral_pos = next;
      if (v.plan->finished(t_next)) {
        v.lateral_pos = v.plan->end_lateral;
        v.lateral_speed = 0.0;
        v.plan.reset();
      }
    }
  }
  ++w.tick;
  recycle(w);
  return w;
}

// ---------------------------------------------------------------------------
// Snapshots

void write_snapshot(std::ostream& out, const WorldState& w) {
  out << "LCWORLD 1 tick " << w.tick << " vehicles " << w.vehicles.size() << '\n';
  char buf[256];
  for (const auto& v : w.vehicles) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g %.17g %.17g\n", v.id, v.lane_target,
                  v.lateral_pos, v.longitudinal_pos, v.speed, v.lateral_speed);
    out << buf;
  }
}

Snapshot read_snapshot(std::istream& in) {
  std::string magic, tick_kw, veh_kw;
  int version = 0;
  std::size_t count = 0;
  Snapshot snap;
  if (!(in >> magic >> version >> tick_kw >> snap.tick >> veh_kw >> count) || magic != "LCWORLD" ||
      tick_kw != "tick" || veh_kw != "vehicles") {
    throw std::runtime_error("read_snapshot: malformed header");
  }
  if (version != 1) throw std::runtime_error("read_snapshot: unsupported version " + std::to_string(version));
  snap.vehicles.resize(count);
  for (auto& r : snap.vehicles) {
    if (!(in >> r.id >> r.lane_target >> r.lateral_pos >> r.longitudinal_pos >> r.speed >> r.lateral_speed)) {
      throw std::runtime_error("read_snapshot: truncated vehicle record");
    }
  }
  return snap;
}

}  // namespace lanechange
