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
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lanechange/rng.hpp"
#include "lanechange/trajectory.hpp"

namespace lanechange {

inline constexpr double kControlDt = 0.02;
inline constexpr int kTicksPerDecision = 25;
inline constexpr double kDecisionDt = kControlDt * kTicksPerDecision;
inline constexpr double kKmh = 1.0 / 3.6;

/// Straight multi-lane road. Lane 0 is the leftmost lane and lateral
/// positions grow to the right from the road's left edge.
struct RoadConfig {
  int lane_count = 4;
  double lane_width = 3.5;
  double goal_distance = 240.0;
  int shoulder_lane = 3;
  double speed_floor = 20.0 * kKmh;
  double speed_ceiling = 50.0 * kKmh;

  double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
  double road_width() const { return lane_count * lane_width; }
  /// Lane containing `lateral`, clamped to the road.
  int lane_at(double lateral) const;
  void validate() const;

  friend bool operator==(const RoadConfig&, const RoadConfig&) = default;
};

struct IdmParams {
  double a_max = 1.5;
  double b_comf = 2.0;
  double s0 = 2.0;
  double headway_T = 1.0;
  double delta = 4.0;

  void validate() const;
  friend bool operator==(const IdmParams&, const IdmParams&) = default;
};

inline constexpr double kMaxBraking = 8.0;

/// Gap-acceptance lane changing for surrounding vehicles.
struct TrafficManagerParams {
  double change_probability = 0.02;
  double blocked_margin = 2.0;     // leader slower than own target by more than this
  double blocked_lookahead = 50.0; // leader must be within this bumper gap to block
  double min_front_gap = 10.0;
  double min_rear_gap = 10.0;
  double lane_change_duration = kDefaultLaneChangeDuration;

  friend bool operator==(const TrafficManagerParams&, const TrafficManagerParams&) = default;
};

struct TrafficConfig {
  int surrounding_count = 15;
  double spawn_behind = 40.0;
  double spawn_ahead = 100.0;
  double ego_initial_speed = 30.0 * kKmh;
  double recycle_behind = 100.0;
  double recycle_ahead_min = 100.0;
  double recycle_ahead_max = 140.0;
  int spawn_retries = 1000;
  IdmParams idm{};
  TrafficManagerParams manager{};

  friend bool operator==(const TrafficConfig&, const TrafficConfig&) = default;
};

struct VehicleState {
  int id = 0;
  int lane_target = 0;
  double lateral_pos = 0.0;
  double longitudinal_pos = 0.0;
  double speed = 0.0;
  double lateral_speed = 0.0;
  double accel = 0.0;
  double target_speed = 0.0;
  double length = 4.5;
  double width = 2.0;
  bool is_ego = false;
  /// Traffic-manager lane change in progress (surrounding vehicles only;
  /// the ego's plan lives in its controller).
  std::optional<TrajectoryPlan> plan;

  double front_bumper() const { return longitudinal_pos + 0.5 * length; }
  double rear_bumper() const { return longitudinal_pos - 0.5 * length; }

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct WorldState {
  std::vector<VehicleState> vehicles;
  std::int64_t tick = 0;
  Rng rng;
  RoadConfig road;
  TrafficConfig traffic;

  /// Simulation clock; an integer tick count keeps increments exact.
  double time() const { return static_cast<double>(tick) * kControlDt; }

  const VehicleState& ego() const;
  VehicleState& ego();
  /// Throws std::out_of_range for an unknown id.
  const VehicleState& vehicle(int id) const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ego in the leftmost lane at the origin plus randomly placed traffic.
/// Throws SpawnError when placement keeps failing.
WorldState spawn_world(std::uint64_t seed, const RoadConfig& road = {},
                       const TrafficConfig& traffic = {});

/// IDM acceleration. `gap` is the bumper gap to the leader (nullopt when
/// there is none) and `dv` the approach rate v - v_leader.
double idm_acceleration(double v, double v0, std::optional<double> gap, double dv,
                        const IdmParams& p);

/// Advances the world by one control tick. Only dt == kControlDt is accepted.
WorldState step_world(WorldState w, double ego_accel, double ego_lateral_speed,
                      double dt = kControlDt);

/// Ids (a < b) of every overlapping pair of vehicle rectangles.
std::vector<std::pair<int, int>> detect_collision(const WorldState& w);

/// True when the vehicle body covers part of `lane` with positive width.
bool occupies_lane(const VehicleState& v, int lane, const RoadConfig& road);

/// Bumper-to-bumper distance from follower front to leader rear.
double bumper_gap(const VehicleState& follower, const VehicleState& leader);

inline constexpr double kTtcFloor = 0.1;

/// Time-to-collision in seconds, nullopt when not closing or the vehicles
/// share no lane. Floored at kTtcFloor.
std::optional<double> ttc(const WorldState& w, int follower_id, int leader_id);

struct Neighbors {
  std::optional<int> front;
  std::optional<int> rear;
  friend bool operator==(const Neighbors&, const Neighbors&) = default;
};

/// Nearest vehicles ahead of and behind `vehicle_id` among those occupying
/// `lane`. Ahead/behind is ordered by (longitudinal_pos, id).
Neighbors neighbors(const WorldState& w, int vehicle_id, int lane);

/// The IDM leader of a vehicle: nearest vehicle ahead occupying any lane the
/// vehicle occupies or is moving into.
std::optional<int> idm_leader(const WorldState& w, int vehicle_id);

/// IDM acceleration of `vehicle_id` against its leader with desired speed v0.
double idm_for(const WorldState& w, int vehicle_id, double v0);

/// Versioned line-oriented snapshot: one vehicle per line with id,
/// lane_target, lateral_pos, longitudinal_pos, speed, lateral_speed.
void write_snapshot(std::ostream& out, const WorldState& w);

struct SnapshotRecord {
  int id = 0;
  int lane_target = 0;
  double lateral_pos = 0.0;
  double longitudinal_pos = 0.0;
  double speed = 0.0;
  double lateral_speed = 0.0;
  friend bool operator==(const SnapshotRecord&, const SnapshotRecord&) = default;
};

struct Snapshot {
  std::int64_t tick = 0;
  std::vector<SnapshotRecord> vehicles;
};

/// Throws std::runtime_error on a malformed or wrong-version snapshot.
Snapshot read_snapshot(std::istream& in);

}  // namespace lanechange
