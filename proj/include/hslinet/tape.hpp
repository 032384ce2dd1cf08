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

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hslinet/error.hpp"
#include "hslinet/tensor.hpp"

namespace hslinet {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/**
 * Records a forward computation and replays it in reverse to propagate
 * gradients.
 *
 * Every recorded value is checked for NaN/Inf at recording time, so a
 * non-finite activation surfaces as a NumericalError at the operation that
 * produced it. Parameter leaves reference the Parameter's value without
 * copying; the Parameter must outlive the tape.
 *
 * A tape supports exactly one backward pass. Gradients of intermediate values
 * remain readable through grad() afterwards.
 */
template <typename T>
class Tape {
 public:
  // Receives the tape and the handle of the output it was recorded for.
  using BackwardFn = std::function<void(Tape&, Var)>;

  /// With grad disabled no backward closures are kept (inference).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value) {
    require_finite(value, "tape constant");
    Node n;
    n.owned = std::move(value);
    return push(std::move(n));
  }

  Var param(Parameter<T>& p) {
    Node n;
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = grad_enabled_;
    return push(std::move(n));
  }

  /// Records an operation output. `inputs` decide whether the output needs a
  /// gradient; `backward` runs only when it does.
  Var record(Tensor<T> out, std::initializer_list<Var> inputs, BackwardFn backward,
             const char* op_name) {
    require_finite(out, op_name);
    Node n;
    n.owned = std::move(out);
    if (grad_enabled_) {
      for (Var v : inputs) n.requires_grad = n.requires_grad || nodes_.at(v.id).requires_grad;
      if (n.requires_grad) n.backward = std::move(backward);
    }
    return push(std::move(n));
  }

  const Tensor<T>& value(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.external ? *n.external : n.owned;
  }

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient slot of `v`, zero-allocated on first access.
  Tensor<T>& grad(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.empty()) n.grad = Tensor<T>(value(v).shape());
    return n.grad;
  }

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Propagates d(loss)/d(.) to every participating value and accumulates
  /// into the referenced Parameters' `grad`.
  void backward(Var loss) {
    if (consumed_) throw StateError("backward called twice on the same tape");
    if (nodes_.empty()) throw StateError("backward called on an empty tape");
    if (!grad_enabled_) throw StateError("backward called on a no-grad tape");
    if (value(loss).size() != 1) {
      throw ShapeError("backward requires a scalar loss, got " + shape_str(value(loss).shape()));
    }
    consumed_ = true;
    grad(loss)[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.requires_grad) continue;
      if (n.backward) n.backward(*this, Var{i});
      if (n.param) {
        require_finite(n.grad, "parameter gradient");
        auto& dst = n.param->grad.data();
        const auto& src = n.grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        n.param->touched = true;
      }
    }
  }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    Parameter<T>* param = nullptr;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool consumed_ = false;
};

}  // namespace hslinet
