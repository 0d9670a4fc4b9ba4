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
#include <stdexcept>

namespace lanechange {

inline constexpr double kDefaultLaneChangeDuration = 5.5;

/// Minimum-jerk lateral profile between two lateral offsets.
///
/// `coefficients` are in local time t' = t - start_time, so that
/// d(t') = sum_k c_k t'^k. Outside [0, duration] the profile is held at its
/// endpoints.
struct TrajectoryPlan {
  double start_lateral = 0.0;
  double end_lateral = 0.0;
  double duration = kDefaultLaneChangeDuration;
  double start_time = 0.0;
  std::array<double, 6> coefficients{};

  double position(double t) const;
  double velocity(double t) const;
  double acceleration(double t) const;
  bool finished(double t) const { return t - start_time >= duration - 1e-9; }

  friend bool operator==(const TrajectoryPlan&, const TrajectoryPlan&) = default;
};

/// d(τ) = d0 + (d1 - d0)(10τ³ - 15τ⁴ + 6τ⁵), τ = t/T. Throws
/// std::invalid_argument for T <= 0.
TrajectoryPlan plan_quintic(double d0, double d1, double duration, double start_time = 0.0);

/// Closed-form peak |d'| of the profile: 15·|Δd| / (8T), reached at τ = 0.5.
inline double quintic_peak_speed(double delta, double duration) {
  return 15.0 * (delta < 0 ? -delta : delta) / (8.0 * duration);
}

}  // namespace lanechange
