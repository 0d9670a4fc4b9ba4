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

#include "lanechange/replay.hpp"

#include <algorithm>

namespace lanechange {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  ++inserted_;
  if (size_ < capacity_) {
    storage_.push_back(std::move(t));
    ++size_;
    return;
  }
  storage_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index out of range");
  return storage_[(head_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_positions(std::size_t k, Rng& rng) const {
  if (k > size_) throw std::invalid_argument("ReplayBuffer: sample larger than buffer");
  // Floyd's algorithm: k draws, each distinct.
  std::vector<std::size_t> picked;
  picked.reserve(k);
  for (std::size_t j = size_ - k; j < size_; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.uniform_int(j + 1));
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  return picked;
}

double epsilon_at(const EpsilonSchedule& schedule, int episode) {
  if (episode <= 0) return schedule.init;
  if (schedule.decay_horizon <= 0 || episode >= schedule.decay_horizon) return schedule.cutoff;
  const double frac = static_cast<double>(episode) / schedule.decay_horizon;
  return schedule.init + (schedule.cutoff - schedule.init) * frac;
}

}  // namespace lanechange
