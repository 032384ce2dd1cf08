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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hslinet/error.hpp"
#include "hslinet/tape.hpp"
#include "hslinet/tensor.hpp"

namespace hslinet {

enum class Mode { Train, Infer };

enum class Activation { ReLU, Tanh, SiLU };

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

inline Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out.push_back(s[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

// (outer, extent, inner) view of a row-major shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Gradient slot of `v` or nullptr when `v` does not need one.
template <typename T>
T* grad_or_null(Tape<T>& t, Var v) {
  return t.requires_grad(v) ? t.grad(v).raw() : nullptr;
}

// Dot product with independent partial sums so long reductions pipeline.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  T s = 0;
  for (; i < n; ++i) s += a[i] * b[i];
  for (T v : acc) s += v;
  return s;
}

template <typename T>
void axpy(T* y, T alpha, const T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcasting

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.shape() == bv.shape(), "add: shape mismatch " + shape_str(av.shape()) +
                                                " vs " + shape_str(bv.shape()));
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    for (Var in : {a, b}) {
      if (T* gi = detail::grad_or_null(t, in))
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  }, "add");
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.shape() == bv.shape(), "mul: shape mismatch " + shape_str(av.shape()) +
                                                " vs " + shape_str(bv.shape()));
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (T* ga = detail::grad_or_null(t, a))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    if (T* gb = detail::grad_or_null(t, b))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  }, "mul");
}

/// Adds the vector `v` (length x.dim(axis)) along `axis` of `x`.
template <typename T>
Var add_along(Tape<T>& tape, Var x, Var v, std::size_t axis) {
  const auto& xv = tape.value(x);
  const auto& vv = tape.value(v);
  detail::require(axis < xv.rank(), "add_along: axis out of range");
  detail::require(vv.rank() == 1 && vv.size() == xv.dim(axis),
                  "add_along: vector length must equal x.dim(axis)");
  const auto sp = detail::split_at(xv.shape(), axis);
  Tensor<T> out(xv.shape());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t e = 0; e < sp.extent; ++e) {
      const std::size_t base = (o * sp.extent + e) * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) out[base + i] = xv[base + i] + vv[e];
    }
  return tape.record(std::move(out), {x, v}, [x, v, sp](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    if (T* gx = detail::grad_or_null(t, x))
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    if (T* gv = detail::grad_or_null(t, v)) {
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t e = 0; e < sp.extent; ++e) {
          const std::size_t base = (o * sp.extent + e) * sp.inner;
          T acc = 0;
          for (std::size_t i = 0; i < sp.inner; ++i) acc += g[base + i];
          gv[e] += acc;
        }
    }
  }, "add_along");
}

template <typename T>
Var activation(Tape<T>& tape, Var x, Activation kind) {
  const auto& xv = tape.value(x);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T a = xv[i];
    switch (kind) {
      case Activation::ReLU: out[i] = a > T(0) ? a : T(0); break;
      case Activation::Tanh: out[i] = std::tanh(a); break;
      case Activation::SiLU: out[i] = a * detail::sigmoid(a); break;
    }
  }
  return tape.record(std::move(out), {x}, [x, kind](Tape<T>& t, Var self) {
    T* gx = detail::grad_or_null(t, x);
    if (!gx) return;
    const auto& g = t.grad(self);
    const auto& xv = t.value(x);
    const auto& yv = t.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) {
      T d = 0;
      switch (kind) {
        case Activation::ReLU: d = xv[i] > T(0) ? T(1) : T(0); break;
        case Activation::Tanh: d = T(1) - yv[i] * yv[i]; break;
        case Activation::SiLU: {
          const T s = detail::sigmoid(xv[i]);
          d = s * (T(1) + xv[i] * (T(1) - s));
          break;
        }
      }
      gx[i] += g[i] * d;
    }
  }, "activation");
}

template <typename T>
Var relu(Tape<T>& tape, Var x) { return activation(tape, x, Activation::ReLU); }
template <typename T>
Var tanh(Tape<T>& tape, Var x) { return activation(tape, x, Activation::Tanh); }

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape) {
  Tensor<T> out = tape.value(x).reshaped(std::move(shape));
  return tape.record(std::move(out), {x}, [x](Tape<T>& t, Var self) {
    T* gx = detail::grad_or_null(t, x);
    if (!gx) return;
    const auto& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  }, "reshape");
}

/// Swaps the two trailing axes: [..., R, C] -> [..., C, R].
template <typename T>
Var transpose_last2(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  detail::require(xv.rank() >= 2, "transpose_last2: rank must be >= 2");
  const std::size_t rows = xv.dim(xv.rank() - 2), cols = xv.dim(xv.rank() - 1);
  const std::size_t batch = xv.size() / (rows * cols);
  Shape shape = xv.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor<T> out(shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        out[b * rows * cols + c * rows + r] = xv[b * rows * cols + r * cols + c];
  return tape.record(std::move(out), {x}, [x, rows, cols, batch](Tape<T>& t, Var self) {
    T* gx = detail::grad_or_null(t, x);
    if (!gx) return;
    const auto& g = t.grad(self);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          gx[b * rows * cols + r * cols + c] += g[b * rows * cols + c * rows + r];
  }, "transpose_last2");
}

template <typename T>
Tensor<T> reverse_tensor(const Tensor<T>& x, std::size_t axis) {
  const auto sp = detail::split_at(x.shape(), axis);
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t e = 0; e < sp.extent; ++e) {
      const std::size_t src = (o * sp.extent + e) * sp.inner;
      const std::size_t dst = (o * sp.extent + (sp.extent - 1 - e)) * sp.inner;
      std::copy_n(x.raw() + src, sp.inner, out.raw() + dst);
    }
  return out;
}

template <typename T>
Var reverse_axis(Tape<T>& tape, Var x, std::size_t axis) {
  const auto& xv = tape.value(x);
  detail::require(axis < xv.rank(), "reverse_axis: axis " + std::to_string(axis) +
                                        " out of range for rank " + std::to_string(xv.rank()));
  return tape.record(reverse_tensor(xv, axis), {x}, [x, axis](Tape<T>& t, Var self) {
    T* gx = detail::grad_or_null(t, x);
    if (!gx) return;
    const Tensor<T> g = reverse_tensor(t.grad(self), axis);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  }, "reverse_axis");
}

/// Arithmetic mean along `axis`; the axis is removed (rank-1 input gives [1]).
template <typename T>
Var mean_reduce(Tape<T>& tape, Var x, std::size_t axis) {
  const auto& xv = tape.value(x);
  detail::require(axis < xv.rank(), "mean_reduce: axis out of range");
  const auto sp = detail::split_at(xv.shape(), axis);
  Tensor<T> out(detail::drop_axis(xv.shape(), axis));
  const T inv = T(1) / static_cast<T>(sp.extent);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      T acc = 0;
      for (std::size_t e = 0; e < sp.extent; ++e) acc += xv[(o * sp.extent + e) * sp.inner + i];
      out[o * sp.inner + i] = acc * inv;
    }
  return tape.record(std::move(out), {x}, [x, sp, inv](Tape<T>& t, Var self) {
    T* gx = detail::grad_or_null(t, x);
    if (!gx) return;
    const auto& g = t.grad(self);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t e = 0; e < sp.extent; ++e)
        for (std::size_t i = 0; i < sp.inner; ++i)
          gx[(o * sp.extent + e) * sp.inner + i] += g[o * sp.inner + i] * inv;
  }, "mean_reduce");
}

/// Sum of all elements as a [1] tensor.
template <typename T>
Var sum(Tape<T>& tape, Var x) {
  const auto& xv = tape.value(x);
  T acc = 0;
  for (T v : xv.data()) acc += v;
  return tape.record(Tensor<T>({1}, acc), {x}, [x](Tape<T>& t, Var self) {
    T* gx = detail::grad_or_null(t, x);
    if (!gx) return;
    const T g = t.grad(self)[0];
    const std::size_t n = t.value(x).size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  }, "sum");
}

/// Joins along `axis`. An empty operand (default-constructed tensor) is the
/// identity element.
template <typename T>
Var concat(Tape<T>& tape, Var a, Var b, std::size_t axis) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (bv.empty()) return a;
  if (av.empty()) return b;
  detail::require(av.rank() == bv.rank() && axis < av.rank(), "concat: rank/axis mismatch");
  for (std::size_t i = 0; i < av.rank(); ++i)
    detail::require(i == axis || av.dim(i) == bv.dim(i),
                    "concat: incompatible shapes " + shape_str(av.shape()) + " and " +
                        shape_str(bv.shape()));
  const auto sa = detail::split_at(av.shape(), axis);
  const auto sb = detail::split_at(bv.shape(), axis);
  Shape shape = av.shape();
  shape[axis] += bv.dim(axis);
  Tensor<T> out(shape);
  const std::size_t ca = sa.extent * sa.inner, cb = sb.extent * sb.inner;
  for (std::size_t o = 0; o < sa.outer; ++o) {
    std::copy_n(av.raw() + o * ca, ca, out.raw() + o * (ca + cb));
    std::copy_n(bv.raw() + o * cb, cb, out.raw() + o * (ca + cb) + ca);
  }
  return tape.record(std::move(out), {a, b}, [a, b, ca, cb, outer = sa.outer](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    T* ga = detail::grad_or_null(t, a);
    T* gb = detail::grad_or_null(t, b);
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = g.raw() + o * (ca + cb);
      if (ga)
        for (std::size_t i = 0; i < ca; ++i) ga[o * ca + i] += src[i];
      if (gb)
        for (std::size_t i = 0; i < cb; ++i) gb[o * cb + i] += src[ca + i];
    }
  }, "concat");
}

// ---------------------------------------------------------------------------
// Learnable layers

/// Affine map on the trailing dimension: y = x W^T + b.
template <typename T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias) {
  const auto& xv = tape.value(x);
  const auto& wv = tape.value(weight);
  const auto& bv = tape.value(bias);
  detail::require(wv.rank() == 2, "linear: weight must be [D_out, D_in]");
  const std::size_t dout = wv.dim(0), din = wv.dim(1);
  detail::require(bv.rank() == 1 && bv.size() == dout, "linear: bias must be [D_out]");
  detail::require(xv.dim(xv.rank() - 1) == din,
                  "linear: trailing dim " + std::to_string(xv.dim(xv.rank() - 1)) +
                      " != D_in " + std::to_string(din));
  const std::size_t rows = xv.size() / din;
  Shape shape = xv.shape();
  shape.back() = dout;
  Tensor<T> out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.raw() + r * din;
    for (std::size_t o = 0; o < dout; ++o) {
      out[r * dout + o] = detail::dot(wv.raw() + o * din, xr, din) + bv[o];
    }
  }
  return tape.record(std::move(out), {x, weight, bias},
                     [x, weight, bias, rows, din, dout](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(x);
    const auto& wv = t.value(weight);
    T* gx = detail::grad_or_null(t, x);
    T* gw = detail::grad_or_null(t, weight);
    T* gb = detail::grad_or_null(t, bias);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* gr = g.raw() + r * dout;
      const T* xr = xv.raw() + r * din;
      for (std::size_t o = 0; o < dout; ++o) {
        const T go = gr[o];
        if (gb) gb[o] += go;
        if (gw) detail::axpy(gw + o * din, go, xr, din);
        if (gx) detail::axpy(gx + r * din, go, wv.raw() + o * din, din);
      }
    }
  }, "linear");
}

namespace detail {

// Convolutions run on a zero-padded layout where every sample of the batch
// is laid end to end per channel: [C][N * padded_extent]. A single shifted
// axpy per (c_out, c_in, tap) then covers the whole batch; positions that
// straddle two samples are computed and discarded.
struct PaddedGeometry {
  std::size_t n = 1;          // batch
  std::size_t h = 1, w = 1;   // spatial extent (h = 1 for 1-D)
  std::size_t pad = 0;
  std::size_t hp = 1, wp = 1; // padded extent
  std::size_t plane() const { return hp * wp; }
  std::size_t total() const { return n * plane(); }
  // Number of output anchor positions that keep every tap in range.
  std::size_t valid(std::size_t k, bool two_d) const {
    return total() - (two_d ? (k - 1) * wp + (k - 1) : (k - 1));
  }
  // Flat anchor index of output (b, r, c).
  std::size_t anchor(std::size_t b, std::size_t r, std::size_t c) const {
    return b * plane() + r * wp + c;
  }
};

template <typename T>
std::vector<T> pad_channels(const T* x, std::size_t channels, const PaddedGeometry& g) {
  std::vector<T> out(channels * g.total(), T(0));
  for (std::size_t b = 0; b < g.n; ++b)
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const T* src = x + (b * channels + ch) * g.h * g.w;
      T* dst = out.data() + ch * g.total() + b * g.plane();
      const std::size_t row0 = g.hp > 1 || g.h > 1 ? g.pad : 0;
      for (std::size_t r = 0; r < g.h; ++r)
        std::copy_n(src + r * g.w, g.w, dst + (r + row0) * g.wp + g.pad);
    }
  return out;
}

}  // namespace detail

/**
 * 1-D cross-correlation with zero "same" padding.
 *
 * input [C_in, L] or [N, C_in, L]; kernels [C_out, C_in, K] with K odd;
 * bias [C_out]. Output keeps the input's rank with C_out channels and
 * length L.
 */
template <typename T>
Var conv1d(Tape<T>& tape, Var input, Var kernels, Var bias) {
  const auto& xv = tape.value(input);
  const auto& wv = tape.value(kernels);
  const auto& bv = tape.value(bias);
  detail::require(!xv.empty(), "conv1d: empty input");
  detail::require(xv.rank() == 2 || xv.rank() == 3, "conv1d: input must be [C,L] or [N,C,L]");
  detail::require(wv.rank() == 3, "conv1d: kernels must be [C_out, C_in, K]");
  const bool batched = xv.rank() == 3;
  const std::size_t cin = xv.dim(batched ? 1 : 0), len = xv.dim(batched ? 2 : 1);
  const std::size_t cout = wv.dim(0), k = wv.dim(2);
  detail::require(wv.dim(1) == cin, "conv1d: kernel C_in " + std::to_string(wv.dim(1)) +
                                        " != input channels " + std::to_string(cin));
  detail::require(k % 2 == 1, "conv1d: kernel size must be odd, got " + std::to_string(k));
  detail::require(bv.rank() == 1 && bv.size() == cout, "conv1d: bias must be [C_out]");

  detail::PaddedGeometry geo;
  geo.n = batched ? xv.dim(0) : 1;
  geo.w = len;
  geo.pad = k / 2;
  geo.wp = len + 2 * geo.pad;
  const std::size_t valid = geo.valid(k, false), total = geo.total();
  std::vector<T> xp = detail::pad_channels(xv.raw(), cin, geo);

  std::vector<T> yf(valid);
  Shape shape = batched ? Shape{geo.n, cout, len} : Shape{cout, len};
  Tensor<T> out(shape);
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill(yf.begin(), yf.end(), bv[co]);
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t kk = 0; kk < k; ++kk)
        detail::axpy(yf.data(), wv[(co * cin + ci) * k + kk], xp.data() + ci * total + kk, valid);
    for (std::size_t b = 0; b < geo.n; ++b)
      std::copy_n(yf.data() + geo.anchor(b, 0, 0), len, out.raw() + (b * cout + co) * len);
  }
  return tape.record(std::move(out), {input, kernels, bias},
                     [=, xp = std::move(xp)](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    const auto& wv = t.value(kernels);
    T* gx = detail::grad_or_null(t, input);
    T* gw = detail::grad_or_null(t, kernels);
    T* gb = detail::grad_or_null(t, bias);
    std::vector<T> gyf(valid);
    std::vector<T> gxp(gx ? cin * total : 0, T(0));
    for (std::size_t co = 0; co < cout; ++co) {
      std::fill(gyf.begin(), gyf.end(), T(0));
      T bsum = 0;
      for (std::size_t b = 0; b < geo.n; ++b) {
        const T* src = g.raw() + (b * cout + co) * len;
        std::copy_n(src, len, gyf.data() + geo.anchor(b, 0, 0));
        for (std::size_t l = 0; l < len; ++l) bsum += src[l];
      }
      if (gb) gb[co] += bsum;
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::size_t widx = (co * cin + ci) * k + kk;
          if (gw) gw[widx] += detail::dot(gyf.data(), xp.data() + ci * total + kk, valid);
          if (gx) detail::axpy(gxp.data() + ci * total + kk, wv[widx], gyf.data(), valid);
        }
    }
    if (gx)
      for (std::size_t b = 0; b < geo.n; ++b)
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const T* src = gxp.data() + ci * total + b * geo.plane() + geo.pad;
          T* dst = gx + (b * cin + ci) * len;
          for (std::size_t l = 0; l < len; ++l) dst[l] += src[l];
        }
  }, "conv1d");
}

/**
 * 2-D cross-correlation with zero "same" padding.
 *
 * input [C_in, H, W] or [N, C_in, H, W]; kernels [C_out, C_in, K, K], K odd.
 */
template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernels, Var bias) {
  const auto& xv = tape.value(input);
  const auto& wv = tape.value(kernels);
  const auto& bv = tape.value(bias);
  detail::require(!xv.empty(), "conv2d: empty input");
  detail::require(xv.rank() == 3 || xv.rank() == 4, "conv2d: input must be [C,H,W] or [N,C,H,W]");
  detail::require(wv.rank() == 4 && wv.dim(2) == wv.dim(3),
                  "conv2d: kernels must be [C_out, C_in, K, K]");
  const bool batched = xv.rank() == 4;
  const std::size_t off0 = batched ? 1 : 0;
  const std::size_t cin = xv.dim(off0), h = xv.dim(off0 + 1), w = xv.dim(off0 + 2);
  const std::size_t cout = wv.dim(0), k = wv.dim(2);
  detail::require(wv.dim(1) == cin, "conv2d: kernel C_in " + std::to_string(wv.dim(1)) +
                                        " != input channels " + std::to_string(cin));
  detail::require(k % 2 == 1, "conv2d: kernel size must be odd, got " + std::to_string(k));
  detail::require(bv.rank() == 1 && bv.size() == cout, "conv2d: bias must be [C_out]");

  detail::PaddedGeometry geo;
  geo.n = batched ? xv.dim(0) : 1;
  geo.h = h;
  geo.w = w;
  geo.pad = k / 2;
  geo.hp = h + 2 * geo.pad;
  geo.wp = w + 2 * geo.pad;
  const std::size_t valid = geo.valid(k, true), total = geo.total(), wp = geo.wp;
  std::vector<T> xp = detail::pad_channels(xv.raw(), cin, geo);

  std::vector<T> yf(valid);
  Shape shape = batched ? Shape{geo.n, cout, h, w} : Shape{cout, h, w};
  Tensor<T> out(shape);
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill(yf.begin(), yf.end(), bv[co]);
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t ky = 0; ky < k; ++ky)
        for (std::size_t kx = 0; kx < k; ++kx)
          detail::axpy(yf.data(), wv[((co * cin + ci) * k + ky) * k + kx],
                       xp.data() + ci * total + ky * wp + kx, valid);
    for (std::size_t b = 0; b < geo.n; ++b)
      for (std::size_t r = 0; r < h; ++r)
        std::copy_n(yf.data() + geo.anchor(b, r, 0), w, out.raw() + ((b * cout + co) * h + r) * w);
  }
  return tape.record(std::move(out), {input, kernels, bias},
                     [=, xp = std::move(xp)](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    const auto& wv = t.value(kernels);
    T* gx = detail::grad_or_null(t, input);
    T* gw = detail::grad_or_null(t, kernels);
    T* gb = detail::grad_or_null(t, bias);
    std::vector<T> gyf(valid);
    std::vector<T> gxp(gx ? cin * total : 0, T(0));
    for (std::size_t co = 0; co < cout; ++co) {
      std::fill(gyf.begin(), gyf.end(), T(0));
      T bsum = 0;
      for (std::size_t b = 0; b < geo.n; ++b)
        for (std::size_t r = 0; r < h; ++r) {
          const T* src = g.raw() + ((b * cout + co) * h + r) * w;
          std::copy_n(src, w, gyf.data() + geo.anchor(b, r, 0));
          for (std::size_t c = 0; c < w; ++c) bsum += src[c];
        }
      if (gb) gb[co] += bsum;
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((co * cin + ci) * k + ky) * k + kx;
            const std::size_t shift = ci * total + ky * wp + kx;
            if (gw) gw[widx] += detail::dot(gyf.data(), xp.data() + shift, valid);
            if (gx) detail::axpy(gxp.data() + shift, wv[widx], gyf.data(), valid);
          }
    }
    if (gx)
      for (std::size_t b = 0; b < geo.n; ++b)
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t r = 0; r < h; ++r) {
            const T* src = gxp.data() + ci * total + b * geo.plane() + (r + geo.pad) * wp + geo.pad;
            T* dst = gx + ((b * cin + ci) * h + r) * w;
            for (std::size_t c = 0; c < w; ++c) dst[c] += src[c];
          }
  }, "conv2d");
}

/// Per-channel running statistics owned by a batch-norm layer.
template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNormStats() = default;
  explicit BatchNormStats(std::size_t channels)
      : running_mean({channels}, T(0)), running_var({channels}, T(1)) {}
};

/**
 * Batch normalization over [N, C, H, W].
 *
 * Train mode normalizes with the batch statistics (biased variance) and
 * folds them into `stats` by exponential moving average, using the unbiased
 * variance for the running estimate. Infer mode reads `stats` only.
 */
template <typename T>
Var batchnorm2d(Tape<T>& tape, Var input, Var gamma, Var beta, BatchNormStats<T>& stats,
                Mode mode) {
  const auto& xv = tape.value(input);
  const auto& gv = tape.value(gamma);
  const auto& bv = tape.value(beta);
  detail::require(xv.rank() == 4, "batchnorm2d: input must be [N,C,H,W]");
  const std::size_t n = xv.dim(0), c = xv.dim(1), plane = xv.dim(2) * xv.dim(3);
  detail::require(gv.size() == c && bv.size() == c, "batchnorm2d: gamma/beta must be [C]");
  detail::require(stats.running_mean.size() == c && stats.running_var.size() == c,
                  "batchnorm2d: running statistics must be [C]");
  const std::size_t count = n * plane;
  if (mode == Mode::Train && count < 2) {
    throw ShapeError("batchnorm2d: train mode needs at least 2 elements per channel");
  }

  Tensor<T> xhat(xv.shape());
  std::vector<T> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T mean, var;
    if (mode == Mode::Train) {
      double acc = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < plane; ++i) acc += xv[(b * c + ch) * plane + i];
      mean = static_cast<T>(acc / static_cast<double>(count));
      double sq = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = xv[(b * c + ch) * plane + i] - mean;
          sq += d * d;
        }
      var = static_cast<T>(sq / static_cast<double>(count));
      const T unbiased = static_cast<T>(sq / static_cast<double>(count - 1));
      const T mom = static_cast<T>(stats.momentum);
      stats.running_mean[ch] = (T(1) - mom) * stats.running_mean[ch] + mom * mean;
      stats.running_var[ch] = (T(1) - mom) * stats.running_var[ch] + mom * unbiased;
    } else {
      mean = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    inv_std[ch] = T(1) / std::sqrt(var + static_cast<T>(stats.eps));
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t idx = (b * c + ch) * plane + i;
        xhat[idx] = (xv[idx] - mean) * inv_std[ch];
      }
  }
  Tensor<T> out(xv.shape());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t idx = (b * c + ch) * plane + i;
        out[idx] = gv[ch] * xhat[idx] + bv[ch];
      }
  const bool train = mode == Mode::Train;
  return tape.record(std::move(out), {input, gamma, beta},
                     [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, Var self) {
    const auto& g = t.grad(self);
    const auto& gv = t.value(gamma);
    T* gx = detail::grad_or_null(t, input);
    T* gg = detail::grad_or_null(t, gamma);
    T* gbeta = detail::grad_or_null(t, beta);
    const T m = static_cast<T>(count);
    for (std::size_t ch = 0; ch < c; ++ch) {
      T sum_g = 0, sum_gx = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t idx = (b * c + ch) * plane + i;
          sum_g += g[idx];
          sum_gx += g[idx] * xhat[idx];
        }
      if (gg) gg[ch] += sum_gx;
      if (gbeta) gbeta[ch] += sum_g;
      if (!gx) continue;
      const T scale = gv[ch] * inv_std[ch];
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t idx = (b * c + ch) * plane + i;
          if (train) {
            gx[idx] += scale * (g[idx] - sum_g / m - xhat[idx] * sum_gx / m);
          } else {
            gx[idx] += scale * g[idx];
          }
        }
    }
  }, "batchnorm2d");
}

/**
 * Mean over the batch of -log softmax(logits)[label].
 *
 * logits [N, C]; labels are 0-based class indices. Returns a [1] tensor.
 */
template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const std::size_t> labels) {
  const auto& lv = tape.value(logits);
  detail::require(lv.rank() == 2, "softmax_cross_entropy: logits must be [N, C]");
  const std::size_t n = lv.dim(0), c = lv.dim(1);
  detail::require(labels.size() == n, "softmax_cross_entropy: label count != batch size");
  Tensor<T> prob(lv.shape());
  T loss = 0;
  for (std::size_t b = 0; b < n; ++b) {
    if (labels[b] >= c) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(labels[b]) +
                       " out of range for " + std::to_string(c) + " classes");
    }
    const T* row = lv.raw() + b * c;
    const T mx = *std::max_element(row, row + c);
    T z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) prob[b * c + j] = std::exp(row[j] - mx) / z;
    loss += std::log(z) - (row[labels[b]] - mx);
  }
  loss /= static_cast<T>(n);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return tape.record(Tensor<T>({1}, loss), {logits},
                     [logits, n, c, prob = std::move(prob), lab = std::move(lab)](Tape<T>& t, Var self) {
    T* gl = detail::grad_or_null(t, logits);
    if (!gl) return;
    const T g = t.grad(self)[0] / static_cast<T>(n);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < c; ++j)
        gl[b * c + j] += g * (prob[b * c + j] - (j == lab[b] ? T(1) : T(0)));
  }, "softmax_cross_entropy");
}

}  // namespace hslinet
