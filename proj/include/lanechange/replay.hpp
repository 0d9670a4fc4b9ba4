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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lanechange/env.hpp"
#include "lanechange/rng.hpp"

namespace lanechange {

/// One replay record. Frames are shared, so consecutive transitions cost
/// one frame each.
struct Transition {
  Observation s;
  int a = 0;
  double r = 0.0;
  Observation s_next;
  bool done = false;
  bool is_demo = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Fixed-capacity FIFO ring.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  /// Total pushes, including evicted items.
  std::uint64_t inserted() const { return inserted_; }
  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;

  /// `k` distinct positions (0 = oldest) drawn uniformly without
  /// replacement. Requires k <= size().
  std::vector<std::size_t> sample_positions(std::size_t k, Rng& rng) const;

 private:
  std::vector<Transition> storage_;
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest element
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;
};

/// Linear decay from `init` to `cutoff` over `horizon` episodes.
struct EpsilonSchedule {
  double init = 1.0;
  double cutoff = 0.1;
  int decay_horizon = 800;
};

double epsilon_at(const EpsilonSchedule& schedule, int episode);

}  // namespace lanechange
