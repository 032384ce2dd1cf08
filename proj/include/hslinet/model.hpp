// Copyright 2026 The HSLiNet Authors
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

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hslinet/dataio.hpp"
#include "hslinet/error.hpp"
#include "hslinet/ops.hpp"
#include "hslinet/random.hpp"
#include "hslinet/tape.hpp"
#include "hslinet/tensor.hpp"

namespace hslinet {

enum class Modality { Both, HsiOnly, LidarOnly };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::Both: return "both";
    case Modality::HsiOnly: return "hsi";
    case Modality::LidarOnly: return "lidar";
  }
  return "?";
}

inline Modality parse_modality(const std::string& s) {
  if (s == "both") return Modality::Both;
  if (s == "hsi") return Modality::HsiOnly;
  if (s == "lidar") return Modality::LidarOnly;
  throw DataError("unknown modality '" + s + "' (expected both|hsi|lidar)");
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::SiLU: return "silu";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "silu") return Activation::SiLU;
  throw DataError("unknown activation '" + s + "' (expected relu|tanh|silu)");
}

struct ModelConfig {
  std::size_t patch = 7;          // p
  std::size_t bands = 32;         // CH; the spectral sequence has CH + 1 steps
  std::size_t hidden = 64;        // d
  std::size_t k1 = 3;             // 1-D kernel size
  std::size_t k2 = 3;             // 2-D kernel size
  std::size_t s_channels = 16;
  std::size_t s_depth = 2;        // Conv2d-BatchNorm-ReLU repetitions
  std::size_t head_channels = 16; // output channels of the fusion Conv1d
  std::size_t classes = 8;
  Activation activation = Activation::SiLU;
  bool enable_forward = true;
  bool enable_reversed = true;
  bool enable_spatial = true;
  Modality modality = Modality::Both;

  std::size_t seq_len() const { return bands + 1; }
  bool spectral() const { return enable_forward || enable_reversed; }
  /// Length of the fused feature vector fed to the head.
  std::size_t fusion_width() const {
    return (spectral() ? hidden : 0) + (enable_spatial ? s_channels : 0);
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw DataError("model config: " + m); };
    if (!enable_forward && !enable_reversed && !enable_spatial) fail("all branches disabled");
    if (patch == 0 || patch % 2 == 0) fail("patch size must be odd");
    if (k1 % 2 == 0 || k2 % 2 == 0) fail("kernel sizes must be odd");
    if (bands == 0 || hidden == 0 || s_channels == 0 || head_channels == 0) fail("zero width");
    if (enable_spatial && s_depth == 0) fail("spatial depth must be >= 1");
    if (classes < 2) fail("need at least 2 classes");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct Dense {
  Parameter<T> weight;  // [out, in]
  Parameter<T> bias;    // [out]
};

template <typename T>
struct Conv {
  Parameter<T> kernels;  // [out, in, K] or [out, in, K, K]
  Parameter<T> bias;     // [out]
};

/// One direction of the bidirectional block: its projection (W_x or W_z),
/// its 1-D convolution, and its state vector (A or B).
template <typename T>
struct Direction {
  Dense<T> proj;
  Conv<T> conv;
  Parameter<T> state;  // [d]
};

template <typename T>
struct BiNetParams {
  std::optional<Direction<T>> forward;   // W_x, conv_f, A
  std::optional<Direction<T>> reversed;  // W_z, conv_b, B
  Parameter<T> delta;                    // [d]
};

template <typename T>
struct SBlockLayer {
  Conv<T> conv;
  Parameter<T> gamma;
  Parameter<T> beta;
  BatchNormStats<T> stats;
};

template <typename T>
struct SBlockParams {
  std::vector<SBlockLayer<T>> layers;
};

template <typename T>
struct HeadParams {
  Conv<T> conv;  // [head_channels, 1, k1]
  Dense<T> out;  // [C, head_channels * fusion_width]
};

/// All learnable state of the network. Branches disabled in `config` hold
/// no parameters at all.
template <typename T>
struct HsLiNetModel {
  ModelConfig config;
  std::optional<BiNetParams<T>> binet;
  std::optional<SBlockParams<T>> sblock;
  HeadParams<T> head;
};

/// Visits every Parameter exactly once in the fixed checkpoint order.
template <typename T, typename Fn>
void for_each_parameter(HsLiNetModel<T>& m, Fn&& fn) {
  auto dense = [&](const std::string& n, Dense<T>& d) {
    fn(n + ".weight", d.weight);
    fn(n + ".bias", d.bias);
  };
  auto conv = [&](const std::string& n, Conv<T>& c) {
    fn(n + ".kernels", c.kernels);
    fn(n + ".bias", c.bias);
  };
  if (m.binet) {
    if (m.binet->forward) {
      dense("binet.w_x", m.binet->forward->proj);
      conv("binet.conv_f", m.binet->forward->conv);
      fn("binet.A", m.binet->forward->state);
    }
    if (m.binet->reversed) {
      dense("binet.w_z", m.binet->reversed->proj);
      conv("binet.conv_b", m.binet->reversed->conv);
      fn("binet.B", m.binet->reversed->state);
    }
    fn("binet.delta", m.binet->delta);
  }
  if (m.sblock) {
    for (std::size_t i = 0; i < m.sblock->layers.size(); ++i) {
      auto& l = m.sblock->layers[i];
      const std::string n = "sblock." + std::to_string(i);
      conv(n + ".conv", l.conv);
      fn(n + ".gamma", l.gamma);
      fn(n + ".beta", l.beta);
    }
  }
  conv("head.conv", m.head.conv);
  dense("head.linear", m.head.out);
}

template <typename T>
std::vector<Parameter<T>*> parameters(HsLiNetModel<T>& m) {
  std::vector<Parameter<T>*> out;
  for_each_parameter(m, [&](const std::string&, Parameter<T>& p) { out.push_back(&p); });
  return out;
}

template <typename T>
std::size_t parameter_count(HsLiNetModel<T>& m) {
  std::size_t n = 0;
  for_each_parameter(m, [&](const std::string&, Parameter<T>& p) { n += p.value.size(); });
  return n;
}

// ---------------------------------------------------------------------------
// Initialization

namespace detail {

template <typename T>
Parameter<T> uniform_param(Rng& rng, Shape shape, std::size_t fan_in) {
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-a, a));
  return Parameter<T>(std::move(t));
}

template <typename T>
Dense<T> make_dense(Rng& rng, std::size_t out, std::size_t in) {
  auto w = uniform_param<T>(rng, {out, in}, in);
  auto b = uniform_param<T>(rng, {out}, in);
  return {std::move(w), std::move(b)};
}

template <typename T>
Conv<T> make_conv1d(Rng& rng, std::size_t out, std::size_t in, std::size_t k) {
  auto w = uniform_param<T>(rng, {out, in, k}, in * k);
  auto b = uniform_param<T>(rng, {out}, in * k);
  return {std::move(w), std::move(b)};
}

template <typename T>
Conv<T> make_conv2d(Rng& rng, std::size_t out, std::size_t in, std::size_t k) {
  auto w = uniform_param<T>(rng, {out, in, k, k}, in * k * k);
  auto b = uniform_param<T>(rng, {out}, in * k * k);
  return {std::move(w), std::move(b)};
}

}  // namespace detail

/**
 * Builds a model for `cfg`. Weights and biases of every convolution and
 * linear map are drawn from U(-a, a) with a = sqrt(1 / fan_in); A and B
 * start at zero, Delta at one, batch-norm gamma at one and beta at zero.
 */
template <typename T>
HsLiNetModel<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  HsLiNetModel<T> m;
  m.config = cfg;
  const std::size_t d = cfg.hidden, step = cfg.patch * cfg.patch;
  if (cfg.spectral()) {
    BiNetParams<T> bn;
    auto direction = [&] {
      Direction<T> dir;
      dir.proj = detail::make_dense<T>(rng, d, step);
      dir.conv = detail::make_conv1d<T>(rng, d, d, cfg.k1);
      dir.state = Parameter<T>(Tensor<T>({d}, T(0)));
      return dir;
    };
    if (cfg.enable_forward) bn.forward = direction();
    if (cfg.enable_reversed) bn.reversed = direction();
    bn.delta = Parameter<T>(Tensor<T>({d}, T(1)));
    m.binet = std::move(bn);
  }
  if (cfg.enable_spatial) {
    SBlockParams<T> sb;
    std::size_t in = cfg.seq_len();
    for (std::size_t i = 0; i < cfg.s_depth; ++i) {
      SBlockLayer<T> l;
      l.conv = detail::make_conv2d<T>(rng, cfg.s_channels, in, cfg.k2);
      l.gamma = Parameter<T>(Tensor<T>({cfg.s_channels}, T(1)));
      l.beta = Parameter<T>(Tensor<T>({cfg.s_channels}, T(0)));
      l.stats = BatchNormStats<T>(cfg.s_channels);
      sb.layers.push_back(std::move(l));
      in = cfg.s_channels;
    }
    m.sblock = std::move(sb);
  }
  m.head.conv = detail::make_conv1d<T>(rng, cfg.head_channels, 1, cfg.k1);
  m.head.out = detail::make_dense<T>(rng, cfg.classes, cfg.head_channels * cfg.fusion_width());
  return m;
}

// ---------------------------------------------------------------------------
// Forward pass

/// Channel-axis concatenation [p, p, CH] + [p, p, 1] -> [p, p, CH + 1]. The
/// absent modality of a single-modality run is zero-filled, never dropped.
inline Tensor<float> fuse_inputs(const Tensor<float>& hsi_patch, const Tensor<float>& lidar_patch,
                                 Modality modality) {
  if (hsi_patch.rank() != 3 || lidar_patch.rank() != 3 || lidar_patch.dim(2) != 1 ||
      hsi_patch.dim(0) != lidar_patch.dim(0) || hsi_patch.dim(1) != lidar_patch.dim(1)) {
    throw ShapeError("fuse_inputs: expected [p,p,CH] and [p,p,1], got " +
                     shape_str(hsi_patch.shape()) + " and " + shape_str(lidar_patch.shape()));
  }
  const std::size_t px = hsi_patch.dim(0) * hsi_patch.dim(1), ch = hsi_patch.dim(2);
  Tensor<float> out({hsi_patch.dim(0), hsi_patch.dim(1), ch + 1});
  for (std::size_t i = 0; i < px; ++i) {
    if (modality != Modality::LidarOnly)
      std::copy_n(hsi_patch.raw() + i * ch, ch, out.raw() + i * (ch + 1));
    if (modality != Modality::HsiOnly) out[i * (ch + 1) + ch] = lidar_patch[i];
  }
  return out;
}

/// Stacks fused samples channels-first: [N, CH + 1, p, p].
template <typename T>
Tensor<T> make_batch(std::span<const Sample> samples, const ModelConfig& cfg) {
  if (samples.empty()) throw ShapeError("make_batch: no samples");
  const std::size_t p = cfg.patch, len = cfg.seq_len();
  Tensor<T> out({samples.size(), len, p, p});
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& s = samples[n];
    if (s.hsi_patch.shape() != Shape{p, p, cfg.bands}) {
      throw ShapeError("sample patch " + shape_str(s.hsi_patch.shape()) + " does not match model (p=" +
                       std::to_string(p) + ", CH=" + std::to_string(cfg.bands) + ")");
    }
    const Tensor<float> fused = fuse_inputs(s.hsi_patch, s.lidar_patch, cfg.modality);
    for (std::size_t px = 0; px < p * p; ++px)
      for (std::size_t c = 0; c < len; ++c)
        out[(n * len + c) * p * p + px] = static_cast<T>(fused[px * len + c]);
  }
  return out;
}

template <typename T>
std::vector<std::size_t> batch_labels(std::span<const Sample> samples) {
  std::vector<std::size_t> out;
  for (const auto& s : samples) out.push_back(s.label - 1);
  return out;
}

/// Flattens each spectral step's p x p slice and projects it to width d.
/// fused [N, L, p, p] -> sequence [N, d, L].
template <typename T>
Var project_sequence(Tape<T>& tape, Var fused, Dense<T>& proj) {
  const auto& fv = tape.value(fused);
  const std::size_t n = fv.dim(0), len = fv.dim(1), step = fv.dim(2) * fv.dim(3);
  Var flat = reshape(tape, fused, {n, len, step});
  Var y = linear(tape, flat, tape.param(proj.weight), tape.param(proj.bias));
  return transpose_last2(tape, y);
}

/// (x_proj, z_proj) for the enabled directions.
template <typename T>
std::pair<std::optional<Var>, std::optional<Var>> spectral_embed(Tape<T>& tape, Var fused,
                                                                 BiNetParams<T>& bn) {
  std::optional<Var> x, z;
  if (bn.forward) x = project_sequence(tape, fused, bn.forward->proj);
  if (bn.reversed) z = project_sequence(tape, fused, bn.reversed->proj);
  return {x, z};
}

namespace detail {

// tanh(f(conv(seq)) + state * delta), averaged over the sequence axis.
template <typename T>
Var direction_state(Tape<T>& tape, Var seq, Direction<T>& dir, Var delta, Activation act) {
  Var c = conv1d(tape, seq, tape.param(dir.conv.kernels), tape.param(dir.conv.bias));
  Var a = activation(tape, c, act);
  Var mod = mul(tape, tape.param(dir.state), delta);
  const std::size_t rank = tape.value(a).rank();
  Var h = tanh(tape, add_along(tape, a, mod, rank - 2));
  return mean_reduce(tape, h, rank - 1);
}

}  // namespace detail

/**
 * Bidirectional spectral block.
 *
 * x_proj and z_proj are [d, L] or [N, d, L]. The forward path convolves
 * x_proj in band order, the reversed path convolves z_proj after reversing
 * the band axis. Each activated sequence is shifted by A*Delta (resp.
 * B*Delta) at every position, passed through tanh, then averaged.
 * The two means are summed. A disabled direction contributes no addend.
 */
template <typename T>
Var binet_forward(Tape<T>& tape, BiNetParams<T>& bn, Activation act, std::optional<Var> x_proj,
                  std::optional<Var> z_proj) {
  if (!bn.forward && !bn.reversed) throw DataError("binet_forward: both pathways disabled");
  Var delta = tape.param(bn.delta);
  std::optional<Var> h;
  if (bn.forward) {
    if (!x_proj) throw ShapeError("binet_forward: forward pathway needs x_proj");
    h = detail::direction_state(tape, *x_proj, *bn.forward, delta, act);
  }
  if (bn.reversed) {
    if (!z_proj) throw ShapeError("binet_forward: reversed pathway needs z_proj");
    const std::size_t rank = tape.value(*z_proj).rank();
    Var rev = reverse_axis(tape, *z_proj, rank - 1);
    Var hb = detail::direction_state(tape, rev, *bn.reversed, delta, act);
    h = h ? add(tape, *h, hb) : hb;
  }
  return *h;
}

/// Conv2d -> BatchNorm -> ReLU per layer, then global average pooling.
/// fused [N, L, p, p] -> [N, s_channels].
template <typename T>
Var sblock_forward(Tape<T>& tape, Var fused, SBlockParams<T>& sb, Mode mode) {
  if (sb.layers.empty()) throw DataError("sblock_forward: spatial block disabled");
  Var x = fused;
  for (auto& l : sb.layers) {
    x = conv2d(tape, x, tape.param(l.conv.kernels), tape.param(l.conv.bias));
    x = batchnorm2d(tape, x, tape.param(l.gamma), tape.param(l.beta), l.stats, mode);
    x = relu(tape, x);
  }
  const auto& s = tape.value(x).shape();
  Var flat = reshape(tape, x, {s[0], s[1], s[2] * s[3]});
  return mean_reduce(tape, flat, 2);
}

/// Logits [N, C] for a channels-first fused batch [N, L, p, p].
template <typename T>
Var model_forward(Tape<T>& tape, HsLiNetModel<T>& m, Var fused, Mode mode) {
  const auto& cfg = m.config;
  const auto& fv = tape.value(fused);
  if (fv.rank() != 4 || fv.dim(1) != cfg.seq_len() || fv.dim(2) != cfg.patch || fv.dim(3) != cfg.patch) {
    throw ShapeError("model_forward: batch " + shape_str(fv.shape()) + " does not match config");
  }
  const std::size_t n = fv.dim(0);
  Var y = tape.constant(Tensor<T>());
  if (m.binet) {
    auto [x, z] = spectral_embed(tape, fused, *m.binet);
    y = binet_forward(tape, *m.binet, cfg.activation, x, z);
  }
  if (m.sblock) y = concat(tape, y, sblock_forward(tape, fused, *m.sblock, mode), 1);
  if (!m.binet && !m.sblock) throw DataError("model_forward: all branches disabled");
  const std::size_t width = tape.value(y).dim(1);
  Var seq = reshape(tape, y, {n, 1, width});
  Var c = conv1d(tape, seq, tape.param(m.head.conv.kernels), tape.param(m.head.conv.bias));
  Var flat = reshape(tape, c, {n, cfg.head_channels * width});
  return linear(tape, flat, tape.param(m.head.out.weight), tape.param(m.head.out.bias));
}

/// Convenience: logits [N, C] for samples in the given mode, without
/// recording gradients.
template <typename T>
Tensor<T> predict_logits(HsLiNetModel<T>& m, std::span<const Sample> samples, Mode mode = Mode::Infer) {
  Tape<T> tape(false);
  Var x = tape.constant(make_batch<T>(samples, m.config));
  return tape.value(model_forward(tape, m, x, mode));
}

}  // namespace hslinet
