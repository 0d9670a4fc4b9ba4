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

#include "lanechange/trajectory.hpp"

#include <algorithm>

namespace lanechange {

TrajectoryPlan plan_quintic(double d0, double d1, double duration, double start_time) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("plan_quintic: duration must be positive");
  }
  TrajectoryPlan plan;
  plan.start_lateral = d0;
  plan.end_lateral = d1;
  plan.duration = duration;
  plan.start_time = start_time;

  const double delta = d1 - d0;
  const double t3 = duration * duration * duration;
  const double t4 = t3 * duration;
  const double t5 = t4 * duration;
  plan.coefficients = {d0, 0.0, 0.0, 10.0 * delta / t3, -15.0 * delta / t4, 6.0 * delta / t5};
  return plan;
}

namespace {

double local_time(const TrajectoryPlan& plan, double t) {
  return std::clamp(t - plan.start_time, 0.0, plan.duration);
}

}  // namespace

double TrajectoryPlan::position(double t) const {
  const double s = local_time(*this, t);
  if (s >= duration) return end_lateral;
  const auto& c = coefficients;
  return c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
}

double TrajectoryPlan::velocity(double t) const {
  const double s = t - start_time;
  if (s <= 0.0 || s >= duration) return 0.0;
  const auto& c = coefficients;
  return c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
}

double TrajectoryPlan::acceleration(double t) const {
  const double s = t - start_time;
  if (s <= 0.0 || s >= duration) return 0.0;
  const auto& c = coefficients;
  return 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
}

}  // namespace lanechange
