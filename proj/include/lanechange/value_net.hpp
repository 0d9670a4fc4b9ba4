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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lanechange/env.hpp"

namespace lanechange {

/// Shape of a stride-2 "same" convolution stage.
struct ConvShape {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int out_channels = 0;
  int out_height = 0;
  int out_width = 0;
  int pad_top = 0;
  int pad_left = 0;
};

/// Convolutional trunk followed by a shared dense layer and two dense
/// branches: value (-> 1) and advantage (-> actions).
struct Architecture {
  int in_channels = kStackDepth;
  int in_height = Frame::kHeight;
  int in_width = Frame::kWidth;
  std::vector<int> conv_channels{16, 32, 64};
  int kernel = 3;
  int stride = 2;
  int trunk = 256;
  int branch = 128;
  int actions = kActionCount;
  /// Q = V + (A - mean A) when set, Q = V + A otherwise.
  bool dueling_mean = true;

  std::vector<ConvShape> conv_shapes() const;
  int input_size() const { return in_channels * in_height * in_width; }
  int flat_features() const;
  std::size_t param_count() const;
  /// FNV-1a over every shape-defining field (excludes the dueling flag).
  std::uint64_t hash() const;
  std::string describe() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Offsets of one dense or conv layer inside the flat parameter array.
/// Weights are [out][in] (conv: [out][in][k][k]), followed by [out] biases.
struct LayerSlot {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  int out = 0;
  int in = 0;  // fan-in per output unit
  friend bool operator==(const LayerSlot&, const LayerSlot&) = default;
};

struct ParamLayout {
  std::vector<LayerSlot> conv;
  LayerSlot trunk, value_hidden, value_out, adv_hidden, adv_out;
  std::size_t total = 0;
  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

ParamLayout make_layout(const Architecture& arch);

class ArchitectureMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter storage with Eigen's maximum alignment. Vectorized reductions
/// peel according to the buffer address, so a fixed base alignment keeps the
/// arithmetic identical from process to process.
template <class T>
using ParamVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <class T>
struct NetworkParams {
  Architecture arch;
  ParamLayout layout;
  ParamVector<T> values;

  NetworkParams() = default;
  explicit NetworkParams(Architecture a);

  std::size_t size() const { return values.size(); }
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
template <class T>
NetworkParams<T> init_params(const Architecture& arch, std::uint64_t seed);

using QValues = std::array<float, kActionCount>;

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-layer activations retained for backpropagation.
template <class T>
struct ForwardCache {
  int batch = 0;
  std::vector<RowMatrix<T>> conv_cols;  // im2col of each conv input, (C·k·k) × (N·Ho·Wo)
  std::vector<RowMatrix<T>> conv_out;   // post-relu, C × (N·H·W)
  RowMatrix<T> flat;                    // N × flat_features
  RowMatrix<T> trunk, value_hidden, adv_hidden;
  RowMatrix<T> value, advantage;        // N × 1, N × actions
};

/// Q values for `batch` inputs laid out back to back as C×H×W tensors.
/// Returns N × actions, row-major. Throws std::invalid_argument on a size
/// mismatch.
template <class T>
std::vector<T> forward_batch(const NetworkParams<T>& p, std::span<const T> inputs, int batch,
                             ForwardCache<T>* cache = nullptr);

/// Single-observation forward for the full-size float network.
QValues forward(const NetworkParams<float>& p, const Observation& obs);

/// Dueling combine of one sample's head outputs.
template <class T>
std::vector<T> dueling_combine(T value, std::span<const T> advantage, bool subtract_mean);

/// Backpropagates dL/dQ (N × actions) through the cached forward pass.
template <class T>
std::vector<T> backward_from_output(const NetworkParams<T>& p, const ForwardCache<T>& cache,
                                    std::span<const T> d_q);

template <class T>
struct RegressionBatch {
  std::span<const T> inputs;   // N × input_size
  std::span<const int> actions;
  std::span<const T> targets;
  /// Per-sample loss weights; empty means 1/N each.
  std::span<const T> weights;
};

template <class T>
struct LossAndGrad {
  T loss{};
  std::vector<T> grads;
};

/// L = Σ_i w_i (target_i - Q(s_i, a_i))². Targets are constants. Throws
/// NumericError when the loss is not finite.
template <class T>
LossAndGrad<T> backward(const NetworkParams<T>& p, const RegressionBatch<T>& batch);

/// Loss only, no gradient.
template <class T>
T regression_loss(const NetworkParams<T>& p, const RegressionBatch<T>& batch);

template <class T>
struct AdamState {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<T> m, v;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate) : lr(learning_rate), m(n, T{}), v(n, T{}) {}
};

template <class T>
void optimize_step(NetworkParams<T>& p, std::span<const T> grads, AdamState<T>& opt);

/// Euclidean distance between parameter vectors. Throws ArchitectureMismatch.
template <class T>
double param_distance(const NetworkParams<T>& a, const NetworkParams<T>& b);

template <class T>
NetworkParams<T> copy_params(const NetworkParams<T>& p) {
  return p;
}

/// Binary checkpoint: versioned header (architecture, dueling flag, scalar
/// width, step count) followed by the little-endian parameter array.
void save_checkpoint(const std::filesystem::path& path, const NetworkParams<float>& p,
                     std::int64_t step_count);

struct Checkpoint {
  NetworkParams<float> params;
  std::int64_t step_count = 0;
};

/// Throws std::runtime_error on I/O failure, bad magic, version or hash.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Index of the largest value; ties go to the lowest index.
template <class T>
int argmax(std::span<const T> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace lanechange
