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

// Slow reference implementations written independently of the library code.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "lanechange/trainer.hpp"
#include "lanechange/world.hpp"

namespace oracle {

using namespace lanechange;

// ---------------------------------------------------------------------------
// Geometry

inline bool covers(const VehicleState& v, int lane, double lane_width) {
  const double left = v.lateral_pos - v.width / 2, right = v.lateral_pos + v.width / 2;
  const double a = lane * lane_width, b = a + lane_width;
  return std::min(right, b) - std::max(left, a) > 1e-9;
}

inline std::optional<double> ttc(const WorldState& w, int follower, int leader) {
  const VehicleState* f = nullptr;
  const VehicleState* l = nullptr;
  for (const auto& v : w.vehicles) {
    if (v.id == follower) f = &v;
    if (v.id == leader) l = &v;
  }
  bool shared = false;
  for (int lane = 0; lane < w.road.lane_count; ++lane) {
    shared = shared || (covers(*f, lane, w.road.lane_width) && covers(*l, lane, w.road.lane_width));
  }
  const double dv = f->speed - l->speed;
  if (!shared || dv <= 0) return std::nullopt;
  const double gap = (l->longitudinal_pos - l->length / 2) - (f->longitudinal_pos + f->length / 2);
  return std::max(gap / dv, 0.1);
}

/// Sorts every lane occupant by (x, id) and picks the entries adjacent to the
/// vehicle's own position in that order.
inline Neighbors neighbors(const WorldState& w, int id, int lane) {
  struct Key {
    double x;
    int id;
  };
  std::vector<Key> keys;
  Key self{};
  for (const auto& v : w.vehicles) {
    if (v.id == id) self = {v.longitudinal_pos, v.id};
  }
  for (const auto& v : w.vehicles) {
    if (v.id == id || !covers(v, lane, w.road.lane_width)) continue;
    keys.push_back({v.longitudinal_pos, v.id});
  }
  auto less = [](const Key& a, const Key& b) { return a.x < b.x || (a.x == b.x && a.id < b.id); };
  std::sort(keys.begin(), keys.end(), less);
  Neighbors n;
  for (const auto& k : keys) {
    if (less(k, self)) n.rear = k.id;
  }
  for (auto it = keys.rbegin(); it != keys.rend(); ++it) {
    if (less(self, *it)) n.front = it->id;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Network

/// Direct-loop forward pass of one C×H×W input, in double.
inline std::vector<double> forward(const NetworkParams<double>& p, const std::vector<double>& input) {
  const Architecture& a = p.arch;
  const auto& v = p.values;
  int c = a.in_channels, h = a.in_height, wd = a.in_width;
  std::vector<double> x = input;
  for (std::size_t l = 0; l < a.conv_channels.size(); ++l) {
    const int oc = a.conv_channels[l];
    const int ho = (h + a.stride - 1) / a.stride, wo = (wd + a.stride - 1) / a.stride;
    const int pad_h = std::max((ho - 1) * a.stride + a.kernel - h, 0);
    const int pad_w = std::max((wo - 1) * a.stride + a.kernel - wd, 0);
    const auto& slot = p.layout.conv[l];
    std::vector<double> y(static_cast<std::size_t>(oc) * ho * wo);
    for (int o = 0; o < oc; ++o) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double s = v[slot.bias_offset + o];
          for (int ic = 0; ic < c; ++ic) {
            for (int ky = 0; ky < a.kernel; ++ky) {
              for (int kx = 0; kx < a.kernel; ++kx) {
                const int iy = oy * a.stride - pad_h / 2 + ky, ix = ox * a.stride - pad_w / 2 + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                const double wgt = v[slot.weight_offset + ((static_cast<std::size_t>(o) * c + ic) * a.kernel + ky) *
                                                              a.kernel + kx];
                s += wgt * x[(static_cast<std::size_t>(ic) * h + iy) * wd + ix];
              }
            }
          }
          y[(static_cast<std::size_t>(o) * ho + oy) * wo + ox] = std::max(s, 0.0);
        }
      }
    }
    x = std::move(y);
    c = oc;
    h = ho;
    wd = wo;
  }
  auto dense = [&](const LayerSlot& s, const std::vector<double>& in, bool relu) {
    std::vector<double> out(s.out);
    for (int o = 0; o < s.out; ++o) {
      double acc = v[s.bias_offset + o];
      for (int i = 0; i < s.in; ++i) acc += v[s.weight_offset + static_cast<std::size_t>(o) * s.in + i] * in[i];
      out[o] = relu ? std::max(acc, 0.0) : acc;
    }
    return out;
  };
  const auto trunk = dense(p.layout.trunk, x, true);
  const double value = dense(p.layout.value_out, dense(p.layout.value_hidden, trunk, true), false)[0];
  const auto adv = dense(p.layout.adv_out, dense(p.layout.adv_hidden, trunk, true), false);
  double mean = 0;
  for (double q : adv) mean += q;
  mean /= static_cast<double>(adv.size());
  std::vector<double> q(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) q[i] = value + adv[i] - (a.dueling_mean ? mean : 0.0);
  return q;
}

inline std::vector<double> sample(const std::vector<double>& flat, int i, int size) {
  return {flat.begin() + static_cast<std::ptrdiff_t>(i) * size, flat.begin() + static_cast<std::ptrdiff_t>(i + 1) * size};
}

/// Brute-force double-Q targets.
inline std::vector<double> td_targets(const NetworkParams<double>& online, const NetworkParams<double>& target,
                                      const TdBatch<double>& b, double gamma) {
  const int size = online.arch.input_size();
  std::vector<double> y;
  for (int i = 0; i < b.size(); ++i) {
    const auto next = sample(b.next_inputs, i, size);
    const auto qo = forward(online, next);
    const auto qt = forward(target, next);
    int best = 0;
    for (int k = 1; k < static_cast<int>(qo.size()); ++k) {
      if (qo[k] > qo[best]) best = k;
    }
    y.push_back(b.rewards[i] + (b.done[i] ? 0.0 : gamma * qt[best]));
  }
  return y;
}

/// mean over demonstrations plus mean over exploration samples of (y - Q)².
inline double td_loss(const NetworkParams<double>& online, const NetworkParams<double>& target,
                      const TdBatch<double>& b, double gamma) {
  const auto y = td_targets(online, target, b, gamma);
  const int size = online.arch.input_size();
  double sum_demo = 0, sum_explore = 0;
  int n_demo = 0, n_explore = 0;
  for (int i = 0; i < b.size(); ++i) {
    const double q = forward(online, sample(b.inputs, i, size))[b.actions[i]];
    const double e = (y[i] - q) * (y[i] - q);
    if (b.is_demo[i]) {
      sum_demo += e;
      ++n_demo;
    } else {
      sum_explore += e;
      ++n_explore;
    }
  }
  return (n_demo ? sum_demo / n_demo : 0.0) + (n_explore ? sum_explore / n_explore : 0.0);
}

}  // namespace oracle
