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

#include "lanechange/value_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lanechange/rng.hpp"

namespace lanechange {

// ---------------------------------------------------------------------------
// Architecture

std::vector<ConvShape> Architecture::conv_shapes() const {
  std::vector<ConvShape> shapes;
  int c = in_channels, h = in_height, w = in_width;
  for (const int out : conv_channels) {
    ConvShape s;
    s.in_channels = c;
    s.in_height = h;
    s.in_width = w;
    s.out_channels = out;
    s.out_height = (h + stride - 1) / stride;
    s.out_width = (w + stride - 1) / stride;
    const int pad_h = std::max((s.out_height - 1) * stride + kernel - h, 0);
    const int pad_w = std::max((s.out_width - 1) * stride + kernel - w, 0);
    s.pad_top = pad_h / 2;
    s.pad_left = pad_w / 2;
    shapes.push_back(s);
    c = out;
    h = s.out_height;
    w = s.out_width;
  }
  return shapes;
}

int Architecture::flat_features() const {
  if (conv_channels.empty()) return input_size();
  const auto last = conv_shapes().back();
  return last.out_channels * last.out_height * last.out_width;
}

std::size_t Architecture::param_count() const { return make_layout(*this).total; }

std::uint64_t Architecture::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::int64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<std::uint64_t>((x >> (8 * i)) & 0xff);
      h *= 0x100000001b3ULL;
    }
  };
  for (const int x : {in_channels, in_height, in_width, kernel, stride, trunk, branch, actions}) mix(x);
  mix(static_cast<std::int64_t>(conv_channels.size()));
  for (const int x : conv_channels) mix(x);
  return h;
}

std::string Architecture::describe() const {
  std::ostringstream os;
  os << "input " << in_channels << "x" << in_height << "x" << in_width << ", conv [";
  for (std::size_t i = 0; i < conv_channels.size(); ++i) os << (i ? "," : "") << conv_channels[i];
  os << "] k" << kernel << " s" << stride << ", trunk " << trunk << ", branches " << branch
     << " -> 1 | " << branch << " -> " << actions << ", dueling_mean " << (dueling_mean ? "on" : "off");
  return os.str();
}

ParamLayout make_layout(const Architecture& arch) {
  ParamLayout layout;
  std::size_t offset = 0;
  auto slot = [&offset](int out, int in) {
    LayerSlot s;
    s.out = out;
    s.in = in;
    s.weight_offset = offset;
    offset += static_cast<std::size_t>(out) * in;
    s.bias_offset = offset;
    offset += out;
    return s;
  };
  for (const auto& shape : arch.conv_shapes()) {
    layout.conv.push_back(slot(shape.out_channels, shape.in_channels * arch.kernel * arch.kernel));
  }
  layout.trunk = slot(arch.trunk, arch.flat_features());
  layout.value_hidden = slot(arch.branch, arch.trunk);
  layout.value_out = slot(1, arch.branch);
  layout.adv_hidden = slot(arch.branch, arch.trunk);
  layout.adv_out = slot(arch.actions, arch.branch);
  layout.total = offset;
  return layout;
}

template <class T>
NetworkParams<T>::NetworkParams(Architecture a)
    : arch(std::move(a)), layout(make_layout(arch)), values(layout.total, T{}) {}

template <class T>
NetworkParams<T> init_params(const Architecture& arch, std::uint64_t seed) {
  NetworkParams<T> p(arch);
  Rng rng(seed);
  auto fill = [&](const LayerSlot& s) {
    const double limit = std::sqrt(6.0 / s.in);
    const std::size_t n = static_cast<std::size_t>(s.out) * s.in;
    for (std::size_t i = 0; i < n; ++i) p.values[s.weight_offset + i] = static_cast<T>(rng.uniform(-limit, limit));
  };
  for (const auto& s : p.layout.conv) fill(s);
  for (const auto* s : {&p.layout.trunk, &p.layout.value_hidden, &p.layout.value_out,
                        &p.layout.adv_hidden, &p.layout.adv_out}) {
    fill(*s);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

template <class T>
using ConstMap = Eigen::Map<const RowMatrix<T>>;
template <class T>
using MutMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

template <class T>
ConstMap<T> weights(const NetworkParams<T>& p, const LayerSlot& s) {
  return ConstMap<T>(p.values.data() + s.weight_offset, s.out, s.in);
}

template <class T>
ConstVecMap<T> biases(const NetworkParams<T>& p, const LayerSlot& s) {
  return ConstVecMap<T>(p.values.data() + s.bias_offset, s.out);
}

// src is [C][N][H][W]; cols is (C·k·k) × (N·Ho·Wo).
template <class T>
void im2col(const T* src, const ConvShape& s, int n_batch, int k, int stride, RowMatrix<T>& cols) {
  const int hw_out = s.out_height * s.out_width;
  cols.resize(static_cast<Eigen::Index>(s.in_channels) * k * k, static_cast<Eigen::Index>(n_batch) * hw_out);
  for (int c = 0; c < s.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols.data() + ((static_cast<Eigen::Index>(c) * k + ky) * k + kx) * cols.cols();
        for (int n = 0; n < n_batch; ++n) {
          const T* plane = src + (static_cast<std::size_t>(c) * n_batch + n) * s.in_height * s.in_width;
          for (int oy = 0; oy < s.out_height; ++oy) {
            const int iy = oy * stride - s.pad_top + ky;
            T* row = dst + static_cast<std::size_t>(n) * hw_out + oy * s.out_width;
            if (iy < 0 || iy >= s.in_height) {
              std::fill_n(row, s.out_width, T{});
              continue;
            }
            const T* in_row = plane + static_cast<std::size_t>(iy) * s.in_width;
            for (int ox = 0; ox < s.out_width; ++ox) {
              const int ix = ox * stride - s.pad_left + kx;
              row[ox] = (ix >= 0 && ix < s.in_width) ? in_row[ix] : T{};
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates cols back into dst ([C][N][H][W], zeroed by caller).
template <class T>
void col2im(const RowMatrix<T>& cols, const ConvShape& s, int n_batch, int k, int stride, T* dst) {
  const int hw_out = s.out_height * s.out_width;
  for (int c = 0; c < s.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = cols.data() + ((static_cast<Eigen::Index>(c) * k + ky) * k + kx) * cols.cols();
        for (int n = 0; n < n_batch; ++n) {
          T* plane = dst + (static_cast<std::size_t>(c) * n_batch + n) * s.in_height * s.in_width;
          for (int oy = 0; oy < s.out_height; ++oy) {
            const int iy = oy * stride - s.pad_top + ky;
            if (iy < 0 || iy >= s.in_height) continue;
            const T* row = src + static_cast<std::size_t>(n) * hw_out + oy * s.out_width;
            T* out_row = plane + static_cast<std::size_t>(iy) * s.in_width;
            for (int ox = 0; ox < s.out_width; ++ox) {
              const int ix = ox * stride - s.pad_left + kx;
              if (ix >= 0 && ix < s.in_width) out_row[ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

template <class T>
RowMatrix<T> dense(const NetworkParams<T>& p, const LayerSlot& s, const RowMatrix<T>& x, bool relu) {
  RowMatrix<T> y(x.rows(), s.out);
  y.noalias() = x * weights(p, s).transpose();
  y.rowwise() += biases(p, s);
  if (relu) y = y.cwiseMax(T{});
  return y;
}

// Writes dW, db into grads; returns dX.
template <class T>
RowMatrix<T> dense_backward(const NetworkParams<T>& p, const LayerSlot& s, const RowMatrix<T>& x,
                            const RowMatrix<T>& dy, std::vector<T>& grads, bool need_dx = true) {
  // Products go through aligned temporaries; GEMM blocking follows the
  // destination alignment and would otherwise vary with the allocator.
  RowMatrix<T> dw(s.out, s.in);
  dw.noalias() = dy.transpose() * x;
  MutMap<T>(grads.data() + s.weight_offset, s.out, s.in) += dw;
  const RowMatrix<T> db = dy.colwise().sum();
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grads.data() + s.bias_offset, s.out) += db;
  if (!need_dx) return {};
  RowMatrix<T> dx(dy.rows(), s.in);
  dx.noalias() = dy * weights(p, s);
  return dx;
}

template <class T>
void relu_backward(RowMatrix<T>& grad, const RowMatrix<T>& activation) {
  grad = (activation.array() > T{}).select(grad, T{});
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward

template <class T>
std::vector<T> forward_batch(const NetworkParams<T>& p, std::span<const T> inputs, int batch,
                             ForwardCache<T>* cache) {
  const auto& arch = p.arch;
  if (batch <= 0) throw std::invalid_argument("forward_batch: batch must be positive");
  if (inputs.size() != static_cast<std::size_t>(batch) * arch.input_size()) {
    throw std::invalid_argument("forward_batch: expected " + std::to_string(batch) + " inputs of size " +
                                std::to_string(arch.input_size()) + ", got " +
                                std::to_string(inputs.size()) + " values");
  }
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.batch = batch;
  c.conv_cols.clear();
  c.conv_out.clear();

  const auto shapes = arch.conv_shapes();
  if (shapes.empty()) {
    c.flat = ConstMap<T>(inputs.data(), batch, arch.input_size());
  } else {
    // NCHW -> CNHW so that each conv stage is one GEMM over the whole batch.
    const int plane = arch.in_height * arch.in_width;
    RowMatrix<T> cur(arch.in_channels, static_cast<Eigen::Index>(batch) * plane);
    for (int n = 0; n < batch; ++n) {
      for (int ch = 0; ch < arch.in_channels; ++ch) {
        std::copy_n(inputs.data() + (static_cast<std::size_t>(n) * arch.in_channels + ch) * plane, plane,
                    cur.data() + (static_cast<std::size_t>(ch) * batch + n) * plane);
      }
    }
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      const auto& s = shapes[l];
      const auto& slot = p.layout.conv[l];
      RowMatrix<T> cols;
      im2col(cur.data(), s, batch, arch.kernel, arch.stride, cols);
      RowMatrix<T> out(s.out_channels, cols.cols());
      out.noalias() = weights(p, slot) * cols;
      out.colwise() += biases(p, slot).transpose();
      out = out.cwiseMax(T{});
      if (cache) c.conv_cols.push_back(std::move(cols));
      cur = std::move(out);
      if (cache) c.conv_out.push_back(cur);
    }
    const auto& last = shapes.back();
    const int positions = last.out_height * last.out_width;
    c.flat.resize(batch, static_cast<Eigen::Index>(last.out_channels) * positions);
    for (int n = 0; n < batch; ++n) {
      for (int ch = 0; ch < last.out_channels; ++ch) {
        std::copy_n(cur.data() + (static_cast<std::size_t>(ch) * batch + n) * positions, positions,
                    c.flat.data() + static_cast<std::size_t>(n) * c.flat.cols() + ch * positions);
      }
    }
  }

  c.trunk = dense(p, p.layout.trunk, c.flat, true);
  c.value_hidden = dense(p, p.layout.value_hidden, c.trunk, true);
  c.value = dense(p, p.layout.value_out, c.value_hidden, false);
  c.adv_hidden = dense(p, p.layout.adv_hidden, c.trunk, true);
  c.advantage = dense(p, p.layout.adv_out, c.adv_hidden, false);

  RowMatrix<T> q = c.advantage;
  if (arch.dueling_mean) q.colwise() -= q.rowwise().mean();
  q.colwise() += c.value.col(0);
  return std::vector<T>(q.data(), q.data() + q.size());
}

QValues forward(const NetworkParams<float>& p, const Observation& obs) {
  if (p.arch.input_size() != kObservationSize || p.arch.actions != kActionCount) {
    throw std::invalid_argument("forward: network does not accept 4x80x45 observations");
  }
  std::vector<float> input(kObservationSize);
  observation_to_input(obs, input);
  const auto q = forward_batch<float>(p, input, 1);
  QValues out{};
  std::copy(q.begin(), q.end(), out.begin());
  return out;
}

template <class T>
std::vector<T> dueling_combine(T value, std::span<const T> advantage, bool subtract_mean) {
  T mean{};
  if (subtract_mean && !advantage.empty()) {
    for (const T a : advantage) mean += a;
    mean /= static_cast<T>(advantage.size());
  }
  std::vector<T> q(advantage.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = value + advantage[i] - mean;
  return q;
}

template <class T>
std::vector<T> backward_from_output(const NetworkParams<T>& p, const ForwardCache<T>& c,
                                    std::span<const T> d_q) {
  const auto& arch = p.arch;
  const int batch = c.batch;
  if (d_q.size() != static_cast<std::size_t>(batch) * arch.actions) {
    throw std::invalid_argument("backward_from_output: gradient size mismatch");
  }
  std::vector<T> grads(p.values.size(), T{});
  // Copied so that the reductions below see aligned storage.
  const RowMatrix<T> dq = ConstMap<T>(d_q.data(), batch, arch.actions);

  RowMatrix<T> d_value = dq.rowwise().sum();
  RowMatrix<T> d_adv = dq;
  if (arch.dueling_mean) d_adv.colwise() -= dq.rowwise().mean();

  RowMatrix<T> d_vh = dense_backward(p, p.layout.value_out, c.value_hidden, d_value, grads);
  relu_backward(d_vh, c.value_hidden);
  RowMatrix<T> d_trunk = dense_backward(p, p.layout.value_hidden, c.trunk, d_vh, grads);

  RowMatrix<T> d_ah = dense_backward(p, p.layout.adv_out, c.adv_hidden, d_adv, grads);
  relu_backward(d_ah, c.adv_hidden);
  d_trunk += dense_backward(p, p.layout.adv_hidden, c.trunk, d_ah, grads);
  relu_backward(d_trunk, c.trunk);

  const auto shapes = arch.conv_shapes();
  const bool need_flat = !shapes.empty();
  RowMatrix<T> d_flat = dense_backward(p, p.layout.trunk, c.flat, d_trunk, grads, need_flat);
  if (!need_flat) return grads;

  const auto& last = shapes.back();
  const int positions = last.out_height * last.out_width;
  RowMatrix<T> d_out(last.out_channels, static_cast<Eigen::Index>(batch) * positions);
  for (int n = 0; n < batch; ++n) {
    for (int ch = 0; ch < last.out_channels; ++ch) {
      std::copy_n(d_flat.data() + static_cast<std::size_t>(n) * d_flat.cols() + ch * positions, positions,
                  d_out.data() + (static_cast<std::size_t>(ch) * batch + n) * positions);
    }
  }
  for (int l = static_cast<int>(shapes.size()) - 1; l >= 0; --l) {
    const auto& s = shapes[l];
    const auto& slot = p.layout.conv[l];
    relu_backward(d_out, c.conv_out[l]);
    RowMatrix<T> dw(slot.out, slot.in);
    dw.noalias() = d_out * c.conv_cols[l].transpose();
    MutMap<T>(grads.data() + slot.weight_offset, slot.out, slot.in) += dw;
    const Eigen::Matrix<T, Eigen::Dynamic, 1> db = d_out.rowwise().sum();
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(grads.data() + slot.bias_offset, slot.out) += db;
    if (l == 0) break;
    RowMatrix<T> d_cols(slot.in, d_out.cols());
    d_cols.noalias() = weights(p, slot).transpose() * d_out;
    RowMatrix<T> d_in = RowMatrix<T>::Zero(s.in_channels, static_cast<Eigen::Index>(batch) * s.in_height * s.in_width);
    col2im(d_cols, s, batch, arch.kernel, arch.stride, d_in.data());
    d_out = std::move(d_in);
  }
  return grads;
}

namespace {

template <class T>
void check_batch(const NetworkParams<T>& p, const RegressionBatch<T>& b) {
  const std::size_t n = b.actions.size();
  if (n == 0) throw std::invalid_argument("regression batch is empty");
  if (b.targets.size() != n || (!b.weights.empty() && b.weights.size() != n) ||
      b.inputs.size() != n * static_cast<std::size_t>(p.arch.input_size())) {
    throw std::invalid_argument("regression batch fields disagree in size");
  }
  for (const int a : b.actions) {
    if (a < 0 || a >= p.arch.actions) throw std::invalid_argument("regression batch action out of range");
  }
}

template <class T>
T sample_weight(const RegressionBatch<T>& b, std::size_t i) {
  return b.weights.empty() ? T{1} / static_cast<T>(b.actions.size()) : b.weights[i];
}

}  // namespace

template <class T>
LossAndGrad<T> backward(const NetworkParams<T>& p, const RegressionBatch<T>& b) {
  check_batch(p, b);
  const int n = static_cast<int>(b.actions.size());
  ForwardCache<T> cache;
  const auto q = forward_batch(p, b.inputs, n, &cache);
  std::vector<T> d_q(q.size(), T{});
  LossAndGrad<T> out;
  for (int i = 0; i < n; ++i) {
    const T w = sample_weight(b, i);
    const T err = b.targets[i] - q[static_cast<std::size_t>(i) * p.arch.actions + b.actions[i]];
    out.loss += w * err * err;
    d_q[static_cast<std::size_t>(i) * p.arch.actions + b.actions[i]] = T{-2} * w * err;
  }
  if (!std::isfinite(static_cast<double>(out.loss))) {
    std::ostringstream os;
    os << "non-finite regression loss " << out.loss << " over " << n << " samples";
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(static_cast<double>(b.targets[i]))) os << "; target[" << i << "] = " << b.targets[i];
    }
    throw NumericError(os.str());
  }
  out.grads = backward_from_output(p, cache, std::span<const T>(d_q));
  return out;
}

template <class T>
T regression_loss(const NetworkParams<T>& p, const RegressionBatch<T>& b) {
  check_batch(p, b);
  const int n = static_cast<int>(b.actions.size());
  const auto q = forward_batch(p, b.inputs, n);
  T loss{};
  for (int i = 0; i < n; ++i) {
    const T err = b.targets[i] - q[static_cast<std::size_t>(i) * p.arch.actions + b.actions[i]];
    loss += sample_weight(b, i) * err * err;
  }
  return loss;
}

template <class T>
void optimize_step(NetworkParams<T>& p, std::span<const T> grads, AdamState<T>& opt) {
  const std::size_t n = p.values.size();
  if (grads.size() != n) throw std::invalid_argument("optimize_step: gradient size mismatch");
  if (opt.m.size() != n) {
    opt.m.assign(n, T{});
    opt.v.assign(n, T{});
  }
  ++opt.step;
  const double b1 = opt.beta1, b2 = opt.beta2;
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(b1, static_cast<double>(opt.step))));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(b2, static_cast<double>(opt.step))));
  const T lr = static_cast<T>(opt.lr), eps = static_cast<T>(opt.eps);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grads[i];
    opt.m[i] = tb1 * opt.m[i] + (T{1} - tb1) * g;
    opt.v[i] = tb2 * opt.v[i] + (T{1} - tb2) * g * g;
    const T m_hat = opt.m[i] * c1;
    const T v_hat = opt.v[i] * c2;
    p.values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <class T>
double param_distance(const NetworkParams<T>& a, const NetworkParams<T>& b) {
  if (!(a.arch == b.arch) || a.values.size() != b.values.size()) {
    throw ArchitectureMismatch("param_distance: architectures differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[8] = {'L', 'C', 'Q', 'N', 'E', 'T', '\0', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class U>
void put_le(std::ostream& out, U value) {
  static_assert(std::is_integral_v<U>);
  unsigned char buf[sizeof(U)];
  using Unsigned = std::make_unsigned_t<U>;
  auto v = static_cast<Unsigned>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<unsigned char>(v & 0xff);
    v = static_cast<Unsigned>(v >> 8);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw std::runtime_error("checkpoint: truncated header");
  std::make_unsigned_t<U> v = 0;
  for (std::size_t i = sizeof(U); i-- > 0;) v = static_cast<decltype(v)>((v << 8) | buf[i]);
  return static_cast<U>(v);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkParams<float>& p, std::int64_t step_count) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const auto& a = p.arch;
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, a.hash());
  put_le<std::uint8_t>(out, a.dueling_mean ? 1 : 0);
  put_le<std::uint8_t>(out, sizeof(float));
  put_le<std::uint16_t>(out, 0);
  put_le<std::int64_t>(out, step_count);
  for (const int x : {a.in_channels, a.in_height, a.in_width, a.kernel, a.stride, a.trunk, a.branch, a.actions}) {
    put_le<std::int32_t>(out, x);
  }
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.conv_channels.size()));
  for (const int x : a.conv_channels) put_le<std::int32_t>(out, x);
  put_le<std::uint64_t>(out, p.values.size());
  for (const float v : p.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto hash = get_le<std::uint64_t>(in);
  const bool dueling_mean = get_le<std::uint8_t>(in) != 0;
  const auto scalar = get_le<std::uint8_t>(in);
  (void)get_le<std::uint16_t>(in);
  if (scalar != sizeof(float)) throw std::runtime_error("checkpoint: unsupported scalar width");
  Checkpoint ck;
  ck.step_count = get_le<std::int64_t>(in);
  Architecture a;
  for (int* f : {&a.in_channels, &a.in_height, &a.in_width, &a.kernel, &a.stride, &a.trunk, &a.branch, &a.actions}) {
    *f = get_le<std::int32_t>(in);
  }
  const auto n_conv = get_le<std::uint32_t>(in);
  if (n_conv > 64) throw std::runtime_error("checkpoint: implausible conv depth");
  a.conv_channels.resize(n_conv);
  for (auto& c : a.conv_channels) c = get_le<std::int32_t>(in);
  a.dueling_mean = dueling_mean;
  if (a.hash() != hash) throw std::runtime_error("checkpoint: architecture hash mismatch");
  const auto count = get_le<std::uint64_t>(in);
  ck.params = NetworkParams<float>(a);
  if (count != ck.params.values.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto& v : ck.params.values) v = std::bit_cast<float>(get_le<std::uint32_t>(in));
  return ck;
}

// ---------------------------------------------------------------------------

#define LANECHANGE_INSTANTIATE(T)                                                                  \
  template struct NetworkParams<T>;                                                                \
  template NetworkParams<T> init_params<T>(const Architecture&, std::uint64_t);                   \
  template std::vector<T> forward_batch<T>(const NetworkParams<T>&, std::span<const T>, int,      \
                                           ForwardCache<T>*);                                      \
  template std::vector<T> dueling_combine<T>(T, std::span<const T>, bool);                        \
  template std::vector<T> backward_from_output<T>(const NetworkParams<T>&, const ForwardCache<T>&, \
                                                  std::span<const T>);                            \
  template LossAndGrad<T> backward<T>(const NetworkParams<T>&, const RegressionBatch<T>&);       \
  template T regression_loss<T>(const NetworkParams<T>&, const RegressionBatch<T>&);             \
  template void optimize_step<T>(NetworkParams<T>&, std::span<const T>, AdamState<T>&);            \
  template double param_distance<T>(const NetworkParams<T>&, const NetworkParams<T>&);

LANECHANGE_INSTANTIATE(float)
LANECHANGE_INSTANTIATE(double)

#undef LANECHANGE_INSTANTIATE

}  // namespace lanechange
