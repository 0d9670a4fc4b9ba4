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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lanechange/trajectory.hpp"
#include "lanechange/world.hpp"
#include "oracle.hpp"

using namespace lanechange;

namespace {

// Vehicles at integer positions so that ties in x are common.
WorldState random_world(Rng& rng) {
  WorldState w;
  const int n = 2 + static_cast<int>(rng.uniform_int(14));
  for (int i = 0; i < n; ++i) {
    VehicleState v;
    v.id = i;
    v.is_ego = i == 0;
    v.lateral_pos = rng.uniform(0.0, w.road.road_width());
    v.lane_target = w.road.lane_at(v.lateral_pos);
    v.longitudinal_pos = static_cast<double>(rng.uniform_int(60));
    v.speed = rng.uniform(0.0, 15.0);
    w.vehicles.push_back(v);
  }
  return w;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("quintic boundary conditions") {
    for (double d1 : {-3.5, 1.75, 3.5, 7.0}) {
      const auto p = plan_quintic(1.75, d1, 5.5, 2.0);
      CHECK(std::abs(p.position(2.0) - 1.75) < 1e-9);
      CHECK(std::abs(p.position(7.5) - d1) < 1e-9);
      for (double t : {2.0, 7.5}) {
        CHECK(std::abs(p.velocity(t)) < 1e-9);
        CHECK(std::abs(p.acceleration(t)) < 1e-9);
      }
      CHECK(p.position(0.0) == p.start_lateral);
      CHECK(p.position(100.0) == p.end_lateral);
      CHECK(p.velocity(100.0) == 0.0);
    }
  }

  TEST_CASE("quintic peak lateral speed") {
    const auto p = plan_quintic(0.0, 3.5, 5.5);
    const double expected = 15.0 * 3.5 / (8.0 * 5.5);
    CHECK(std::abs(p.velocity(2.75) - expected) < 1e-6);
    CHECK(quintic_peak_speed(-3.5, 5.5) == doctest::Approx(expected).epsilon(1e-12));
    double peak = 0.0;
    for (int i = 0; i <= 5500; ++i) peak = std::max(peak, std::abs(p.velocity(i * 1e-3)));
    CHECK(std::abs(peak - expected) < 1e-6);
  }

  TEST_CASE("quintic rejects non-positive duration") {
    CHECK_THROWS_AS(plan_quintic(0.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(plan_quintic(0.0, 1.0, -1.0), std::invalid_argument);
  }

  TEST_CASE("lanes and occupancy") {
    RoadConfig road;
    CHECK(road.lane_at(-1.0) == 0);
    CHECK(road.lane_at(3.49) == 0);
    CHECK(road.lane_at(3.5) == 1);
    CHECK(road.lane_at(100.0) == 3);
    VehicleState v;
    v.lateral_pos = road.lane_center(1);
    CHECK(occupies_lane(v, 1, road));
    CHECK_FALSE(occupies_lane(v, 0, road));
    v.lateral_pos = 3.5;  // straddling the 0/1 boundary
    CHECK(occupies_lane(v, 0, road));
    CHECK(occupies_lane(v, 1, road));
    v.lateral_pos = 3.5 + 1.0;  // left edge exactly on the boundary
    CHECK_FALSE(occupies_lane(v, 0, road));
    RoadConfig bad;
    bad.shoulder_lane = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("idm acceleration") {
    const IdmParams p;
    CHECK(idm_acceleration(0.0, 10.0, std::nullopt, 0.0, p) == doctest::Approx(p.a_max));
    CHECK(idm_acceleration(10.0, 10.0, std::nullopt, 0.0, p) == doctest::Approx(0.0));
    CHECK(idm_acceleration(5.0, 10.0, 0.0, 0.0, p) == -kMaxBraking);
    CHECK(idm_acceleration(10.0, 10.0, 1.0, 5.0, p) == -kMaxBraking);
    const double far = idm_acceleration(5.0, 10.0, 1000.0, 0.0, p);
    const double free = idm_acceleration(5.0, 10.0, std::nullopt, 0.0, p);
    CHECK(far == doctest::Approx(free).epsilon(1e-3));
  }

  TEST_CASE("ttc and neighbors agree with brute force") {
    Rng rng(11);
    for (int k = 0; k < 300; ++k) {
      const WorldState w = random_world(rng);
      for (const auto& a : w.vehicles) {
        for (int lane = 0; lane < w.road.lane_count; ++lane) {
          REQUIRE(neighbors(w, a.id, lane) == oracle::neighbors(w, a.id, lane));
        }
        for (const auto& b : w.vehicles) {
          if (a.id == b.id) continue;
          REQUIRE(ttc(w, a.id, b.id) == oracle::ttc(w, a.id, b.id));
        }
      }
    }
  }

  TEST_CASE("ttc floor and sign") {
    WorldState w;
    VehicleState f, l;
    f.id = 0;
    f.is_ego = true;
    l.id = 1;
    f.lateral_pos = l.lateral_pos = w.road.lane_center(0);
    l.longitudinal_pos = 4.6;
    f.speed = 10.0;
    l.speed = 5.0;
    w.vehicles = {f, l};
    CHECK(*ttc(w, 0, 1) == doctest::Approx(kTtcFloor));
    CHECK_FALSE(ttc(w, 1, 0).has_value());
    w.vehicles[1].lateral_pos = w.road.lane_center(2);
    CHECK_FALSE(ttc(w, 0, 1).has_value());
    CHECK_THROWS_AS(ttc(w, 0, 9), std::out_of_range);
  }

  TEST_CASE("collision pairs are sorted and symmetric") {
    WorldState w;
    for (int i = 0; i < 3; ++i) {
      VehicleState v;
      v.id = 2 - i;
      v.is_ego = i == 0;
      v.lateral_pos = 1.75;
      v.longitudinal_pos = i * 3.0;
      w.vehicles.push_back(v);
    }
    const auto pairs = detect_collision(w);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == std::pair{0, 1});
    CHECK(pairs[1] == std::pair{1, 2});
  }

  TEST_CASE("spawn and step are deterministic") {
    const WorldState a = spawn_world(5);
    const WorldState b = spawn_world(5);
    CHECK(a == b);
    CHECK(a.vehicles.size() == 16);
    CHECK(a.ego().lane_target == 0);
    WorldState x = a, y = b;
    for (int i = 0; i < 200; ++i) {
      x = step_world(std::move(x), 0.1, 0.0);
      y = step_world(std::move(y), 0.1, 0.0);
    }
    CHECK(x == y);
    CHECK(x.tick == 200);
    CHECK_THROWS_AS(step_world(a, 0.0, 0.0, 0.01), std::invalid_argument);
  }

  TEST_CASE("spawned traffic starts without overlap") {
    for (std::uint64_t s = 0; s < 200; ++s) CHECK(detect_collision(spawn_world(s)).empty());
  }

  TEST_CASE("idm platoon stays collision free below target speeds") {
    WorldState w;
    w.traffic.manager.change_probability = 0.0;
    w.traffic.recycle_behind = 1e9;
    VehicleState ego;
    ego.id = 0;
    ego.is_ego = true;
    ego.lateral_pos = w.road.lane_center(0);
    ego.longitudinal_pos = 1e6;
    w.vehicles.push_back(ego);
    Rng rng(3);
    for (int i = 1; i <= 10; ++i) {
      VehicleState v;
      v.id = i;
      v.lane_target = 2;
      v.lateral_pos = w.road.lane_center(2);
      v.longitudinal_pos = 200.0 - 15.0 * i;
      v.target_speed = rng.uniform(w.road.speed_floor, w.road.speed_ceiling);
      v.speed = v.target_speed;
      w.vehicles.push_back(v);
    }
    for (int t = 0; t < 3000; ++t) {
      w = step_world(std::move(w), 0.0, 0.0);
      REQUIRE(detect_collision(w).empty());
      for (const auto& v : w.vehicles) REQUIRE(v.speed <= v.target_speed + 1e-6);
    }
  }

  TEST_CASE("snapshot round trip") {
    const WorldState w = spawn_world(9);
    std::stringstream ss;
    write_snapshot(ss, w);
    const Snapshot s = read_snapshot(ss);
    CHECK(s.tick == w.tick);
    REQUIRE(s.vehicles.size() == w.vehicles.size());
    for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
      CHECK(s.vehicles[i].id == w.vehicles[i].id);
      CHECK(s.vehicles[i].longitudinal_pos == w.vehicles[i].longitudinal_pos);
      CHECK(s.vehicles[i].speed == w.vehicles[i].speed);
    }
    std::stringstream bad("not a snapshot\n");
    CHECK_THROWS_AS(read_snapshot(bad), std::runtime_error);
  }
}
