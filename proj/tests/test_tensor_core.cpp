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

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "hslinet/ops.hpp"
#include "hslinet/tape.hpp"
#include "oracles.hpp"

using namespace hslinet;
using oracle::finite_difference;
using oracle::random_tensor;

namespace {

constexpr double kFdTol = 1e-6;

Tensor<double> values(Shape shape, std::vector<double> v) { return Tensor<double>(std::move(shape), std::move(v)); }

Tensor<double> eval1(const std::function<Var(Tape<double>&, Var)>& f, const Tensor<double>& x) {
  Tape<double> tape(false);
  return tape.value(f(tape, tape.constant(x)));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor<double>({2, 0}), ShapeError);
  const Tensor<double> t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_TRUE(Tensor<double>().empty());
}

TEST(Tensor, ReshapeKeepsData) {
  const auto t = values({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto r = t.reshaped({3, 2});
  EXPECT_EQ(r.data(), t.data());
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  const auto t = values({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.at(1, 0), 4);
  EXPECT_EQ(t.at(0, 2), 3);
}

// ---------------------------------------------------------------------------
// Tape

TEST(Tape, SumGradientIsOnes) {
  Parameter<double> p(values({3}, {1, -2, 5}));
  Tape<double> tape;
  tape.backward(sum(tape, tape.param(p)));
  for (double g : p.grad.data()) EXPECT_EQ(g, 1.0);
  EXPECT_TRUE(p.touched);
}

TEST(Tape, SecondBackwardIsAnError) {
  Parameter<double> p(values({2}, {1, 2}));
  Tape<double> tape;
  Var loss = sum(tape, tape.param(p));
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), StateError);
}

TEST(Tape, EmptyAndNoGradTapesRefuseBackward) {
  Tape<double> empty;
  EXPECT_THROW(empty.backward(Var{0}), StateError);
  Parameter<double> p(values({1}, {1}));
  Tape<double> no_grad(false);
  Var x = no_grad.param(p);
  EXPECT_THROW(no_grad.backward(x), StateError);
}

TEST(Tape, LossMustBeScalar) {
  Parameter<double> p(values({2}, {1, 2}));
  Tape<double> tape;
  EXPECT_THROW(tape.backward(tape.param(p)), ShapeError);
}

TEST(Tape, NonFiniteValuesAbort) {
  Tape<double> tape;
  EXPECT_THROW(tape.constant(values({1}, {std::nan("")})), NumericalError);
  Var big = tape.constant(values({1}, {1e200}));
  EXPECT_THROW(mul(tape, big, big), NumericalError);
}

TEST(Tape, GradientsAccumulateAcrossUses) {
  Parameter<double> p(values({2}, {3, 4}));
  Tape<double> tape;
  Var x = tape.param(p);
  tape.backward(sum(tape, add(tape, x, x)));
  EXPECT_EQ(p.grad[0], 2.0);
  EXPECT_EQ(p.grad[1], 2.0);
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops

TEST(Ops, AddMulShapeMismatch) {
  Tape<double> tape;
  Var a = tape.constant(Tensor<double>({2}));
  Var b = tape.constant(Tensor<double>({3}));
  EXPECT_THROW(add(tape, a, b), ShapeError);
  EXPECT_THROW(mul(tape, a, b), ShapeError);
}

TEST(Ops, ActivationValues) {
  const auto x = values({3}, {-1, 0, 2});
  const auto r = eval1([](auto& t, Var v) { return relu(t, v); }, x);
  EXPECT_EQ(r.data(), (std::vector<double>{0, 0, 2}));
  const auto th = eval1([](auto& t, Var v) { return hslinet::tanh(t, v); }, x);
  EXPECT_EQ(th[1], 0.0);
  EXPECT_NEAR(th[2], std::tanh(2.0), 1e-15);
  const auto s = eval1([](auto& t, Var v) { return activation(t, v, Activation::SiLU); }, x);
  EXPECT_NEAR(s[2], 2.0 / (1.0 + std::exp(-2.0)), 1e-15);
}

TEST(Ops, TanhGradientAtZeroIsOne) {
  Parameter<double> p(values({1}, {0}));
  Tape<double> tape;
  tape.backward(sum(tape, hslinet::tanh(tape, tape.param(p))));
  EXPECT_DOUBLE_EQ(p.grad[0], 1.0);
}

TEST(Ops, ActivationGradients) {
  Rng rng(3);
  for (auto kind : {Activation::Tanh, Activation::SiLU, Activation::ReLU}) {
    auto x = random_tensor({4, 5}, rng);
    // keep ReLU inputs away from the kink
    for (auto& v : x.data())
      if (std::abs(v) < 0.05) v = 0.3;
    const auto r = finite_difference([kind](auto& t, const auto& v) { return activation(t, v[0], kind); }, {x});
    EXPECT_LT(r.max_rel, kFdTol) << static_cast<int>(kind);
  }
}

TEST(Ops, ReverseAxis) {
  const auto x = values({3}, {1, 2, 3});
  EXPECT_EQ(eval1([](auto& t, Var v) { return reverse_axis(t, v, 0); }, x).data(), (std::vector<double>{3, 2, 1}));
  Rng rng(5);
  const auto y = random_tensor({2, 3, 4}, rng);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const auto twice = eval1([axis](auto& t, Var v) { return reverse_axis(t, reverse_axis(t, v, axis), axis); }, y);
    EXPECT_EQ(twice, y);
  }
  Tape<double> tape;
  EXPECT_THROW(reverse_axis(tape, tape.constant(y), 3), ShapeError);
}

TEST(Ops, ReverseGradientOfSumIsOnes) {
  Parameter<double> p(values({4}, {1, 2, 3, 4}));
  Tape<double> tape;
  tape.backward(sum(tape, reverse_axis(tape, tape.param(p), 0)));
  for (double g : p.grad.data()) EXPECT_EQ(g, 1.0);
}

TEST(Ops, MeanReduce) {
  const auto x = values({2, 2}, {1, 3, 5, 7});
  EXPECT_EQ(eval1([](auto& t, Var v) { return mean_reduce(t, v, 1); }, x).data(), (std::vector<double>{2, 6}));
  const auto c = Tensor<double>({5}, 4.25);
  const auto m = eval1([](auto& t, Var v) { return mean_reduce(t, v, 0); }, c);
  EXPECT_EQ(m.shape(), (Shape{1}));
  EXPECT_EQ(m[0], 4.25);
  Tape<double> tape;
  EXPECT_THROW(mean_reduce(tape, tape.constant(x), 2), ShapeError);
}

TEST(Ops, MeanReduceIsPermutationInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 2 + rng.index(9);
    auto x = random_tensor({3, len}, rng);
    auto y = x;
    std::vector<std::size_t> perm(len);
    for (std::size_t i = 0; i < len; ++i) perm[i] = i;
    rng.shuffle(perm);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t i = 0; i < len; ++i) y.at(r, i) = x.at(r, perm[i]);
    const auto a = eval1([](auto& t, Var v) { return mean_reduce(t, v, 1); }, x);
    const auto b = eval1([](auto& t, Var v) { return mean_reduce(t, v, 1); }, y);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(a[r], b[r], 1e-14);
  }
}

TEST(Ops, Concat) {
  Tape<double> tape;
  Var a = tape.constant(Tensor<double>({4}, 1.0));
  Var b = tape.constant(Tensor<double>({6}, 2.0));
  EXPECT_EQ(tape.value(concat(tape, a, b, 0)).shape(), (Shape{10}));
  Var e = tape.constant(Tensor<double>());
  EXPECT_EQ(concat(tape, a, e, 0).id, a.id);
  EXPECT_EQ(concat(tape, e, b, 0).id, b.id);
  Var m1 = tape.constant(Tensor<double>({2, 3}));
  Var m2 = tape.constant(Tensor<double>({3, 3}));
  EXPECT_THROW(concat(tape, m1, m2, 1), ShapeError);
}

TEST(Ops, ShapeOpGradients) {
  Rng rng(17);
  const auto a = random_tensor({2, 3}, rng), b = random_tensor({2, 4}, rng);
  EXPECT_LT(finite_difference([](auto& t, const auto& v) { return concat(t, v[0], v[1], 1); }, {a, b}).max_rel, kFdTol);
  const auto x = random_tensor({2, 3, 4}, rng);
  EXPECT_LT(finite_difference([](auto& t, const auto& v) { return transpose_last2(t, v[0]); }, {x}).max_rel, kFdTol);
  EXPECT_LT(finite_difference([](auto& t, const auto& v) { return mean_reduce(t, v[0], 1); }, {x}).max_rel, kFdTol);
  EXPECT_LT(finite_difference([](auto& t, const auto& v) { return reverse_axis(t, v[0], 2); }, {x}).max_rel, kFdTol);
  EXPECT_LT(finite_difference([](auto& t, const auto& v) { return reshape(t, v[0], Shape{4, 6}); }, {x}).max_rel,
            kFdTol);
  const auto vec = random_tensor({3}, rng);
  EXPECT_LT(finite_difference([](auto& t, const auto& v) { return add_along(t, v[0], v[1], 1); }, {x, vec}).max_rel,
            kFdTol);
  const auto y = random_tensor({2, 3, 4}, rng);
  EXPECT_LT(finite_difference([](auto& t, const auto& v) { return mul(t, v[0], v[1]); }, {x, y}).max_rel, kFdTol);
}

// ---------------------------------------------------------------------------
// Linear

TEST(Linear, IdentityAndHandExample) {
  Tape<double> tape(false);
  Var x = tape.constant(values({2}, {3, 2}));
  Var eye = tape.constant(values({2, 2}, {1, 0, 0, 1}));
  Var zero = tape.constant(Tensor<double>({2}));
  EXPECT_EQ(tape.value(linear(tape, x, eye, zero)).data(), (std::vector<double>{3, 2}));
  Var w = tape.constant(values({2, 2}, {1, 1, 1, -1}));
  EXPECT_EQ(tape.value(linear(tape, x, w, zero)).data(), (std::vector<double>{5, 1}));
}

TEST(Linear, DimensionMismatch) {
  Tape<double> tape(false);
  Var x = tape.constant(Tensor<double>({3}));
  Var w = tape.constant(Tensor<double>({2, 2}));
  Var b = tape.constant(Tensor<double>({2}));
  EXPECT_THROW(linear(tape, x, w, b), ShapeError);
}

TEST(Linear, Gradients) {
  Rng rng(23);
  const auto x = random_tensor({2, 3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
  const auto r = finite_difference([](auto& t, const auto& v) { return linear(t, v[0], v[1], v[2]); }, {x, w, b});
  EXPECT_LT(r.max_rel, kFdTol);
}

// ---------------------------------------------------------------------------
// Conv1d

TEST(Conv1d, HandExample) {
  Tape<double> tape(false);
  Var x = tape.constant(values({1, 3}, {1, 2, 3}));
  Var k = tape.constant(values({1, 1, 3}, {1, 0, -1}));
  Var b = tape.constant(Tensor<double>({1}));
  EXPECT_EQ(tape.value(conv1d(tape, x, k, b)).data(), (std::vector<double>{-2, -2, 2}));
}

TEST(Conv1d, IdentityKernel) {
  Rng rng(1);
  const auto x = random_tensor({2, 7}, rng);
  Tape<double> tape(false);
  Var k = tape.constant(values({2, 2, 1}, {1, 0, 0, 1}));
  Var b = tape.constant(Tensor<double>({2}));
  EXPECT_EQ(tape.value(conv1d(tape, tape.constant(x), k, b)), x);
}

TEST(Conv1d, MatchesDirectLoops) {
  Rng rng(2);
  for (std::size_t k : {1u, 3u, 5u}) {
    const auto x = random_tensor({3, 9}, rng), w = random_tensor({4, 3, k}, rng), b = random_tensor({4}, rng);
    Tape<double> tape(false);
    const auto got = tape.value(conv1d(tape, tape.constant(x), tape.constant(w), tape.constant(b)));
    const auto want = oracle::conv1d_direct(x, w, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-13);
  }
}

TEST(Conv1d, BatchedEqualsPerSample) {
  Rng rng(4);
  const auto x = random_tensor({3, 2, 6}, rng), w = random_tensor({2, 2, 3}, rng), b = random_tensor({2}, rng);
  Tape<double> tape(false);
  const auto all = tape.value(conv1d(tape, tape.constant(x), tape.constant(w), tape.constant(b)));
  for (std::size_t n = 0; n < 3; ++n) {
    Tensor<double> one({2, 6});
    std::copy_n(x.raw() + n * 12, 12, one.raw());
    const auto got = tape.value(conv1d(tape, tape.constant(one), tape.constant(w), tape.constant(b)));
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(got[i], all[n * 12 + i]);
  }
}

TEST(Conv1d, Errors) {
  Tape<double> tape(false);
  Var x = tape.constant(Tensor<double>({2, 5}));
  Var b = tape.constant(Tensor<double>({1}));
  EXPECT_THROW(conv1d(tape, x, tape.constant(Tensor<double>({1, 2, 2})), b), ShapeError);
  EXPECT_THROW(conv1d(tape, x, tape.constant(Tensor<double>({1, 3, 3})), b), ShapeError);
  EXPECT_THROW(conv1d(tape, tape.constant(Tensor<double>()), tape.constant(Tensor<double>({1, 2, 3})), b),
               ShapeError);
}

TEST(Conv1d, Gradients) {
  Rng rng(6);
  for (std::size_t k : {1u, 3u}) {
    const auto x = random_tensor({2, 3, 7}, rng), w = random_tensor({4, 3, k}, rng), b = random_tensor({4}, rng);
    const auto r = finite_difference([](auto& t, const auto& v) { return conv1d(t, v[0], v[1], v[2]); }, {x, w, b});
    EXPECT_LT(r.max_rel, kFdTol) << "K=" << k;
  }
}

TEST(Conv1d, ReversalIdentityWithFlippedKernels) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_tensor({3, 11}, rng), w = random_tensor({2, 3, 3}, rng), b = random_tensor({2}, rng);
    Tape<double> tape(false);
    Var wv = tape.constant(w), bv = tape.constant(b), xv = tape.constant(x);
    Var flipped = tape.constant(reverse_tensor(w, 2));
    const auto lhs = tape.value(conv1d(tape, reverse_axis(tape, xv, 1), wv, bv));
    const auto rhs = tape.value(reverse_axis(tape, conv1d(tape, xv, flipped, bv), 1));
    for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Conv2d

TEST(Conv2d, OnesExample) {
  Tape<double> tape(false);
  Var x = tape.constant(Tensor<double>({1, 3, 3}, 1.0));
  Var k = tape.constant(Tensor<double>({1, 1, 3, 3}, 1.0));
  Var b = tape.constant(Tensor<double>({1}));
  const auto y = tape.value(conv2d(tape, x, k, b));
  EXPECT_EQ(y.at(0, 1, 1), 9);
  EXPECT_EQ(y.at(0, 0, 0), 4);
  EXPECT_EQ(y.at(0, 2, 2), 4);
  EXPECT_EQ(y.at(0, 0, 1), 6);
}

TEST(Conv2d, MatchesDirectLoops) {
  Rng rng(9);
  for (std::size_t k : {1u, 3u, 5u}) {
    const auto x = random_tensor({2, 5, 6}, rng), w = random_tensor({3, 2, k, k}, rng), b = random_tensor({3}, rng);
    Tape<double> tape(false);
    const auto got = tape.value(conv2d(tape, tape.constant(x), tape.constant(w), tape.constant(b)));
    const auto want = oracle::conv2d_direct(x, w, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-13);
  }
}

TEST(Conv2d, Errors) {
  Tape<double> tape(false);
  Var x = tape.constant(Tensor<double>({2, 4, 4}));
  Var b = tape.constant(Tensor<double>({1}));
  EXPECT_THROW(conv2d(tape, x, tape.constant(Tensor<double>({1, 2, 2, 2})), b), ShapeError);
  EXPECT_THROW(conv2d(tape, x, tape.constant(Tensor<double>({1, 3, 3, 3})), b), ShapeError);
}

TEST(Conv2d, Gradients) {
  Rng rng(10);
  const auto x = random_tensor({2, 2, 4, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  const auto r = finite_difference([](auto& t, const auto& v) { return conv2d(t, v[0], v[1], v[2]); }, {x, w, b});
  EXPECT_LT(r.max_rel, kFdTol);
}

// ---------------------------------------------------------------------------
// Batch norm

TEST(BatchNorm, TrainOutputIsStandardized) {
  Rng rng(12);
  const auto x = random_tensor({4, 2, 3, 3}, rng, -3, 5);
  BatchNormStats<double> stats(2);
  Tape<double> tape(false);
  Var g = tape.constant(Tensor<double>({2}, 1.0)), b = tape.constant(Tensor<double>({2}));
  const auto y = tape.value(batchnorm2d(tape, tape.constant(x), g, b, stats, Mode::Train));
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0, sq = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 9; ++i) mean += y[(n * 2 + c) * 9 + i];
    mean /= 36;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 9; ++i) sq += std::pow(y[(n * 2 + c) * 9 + i] - mean, 2);
    EXPECT_NEAR(mean, 0, 1e-12);
    EXPECT_NEAR(sq / 36, 1, 1e-3);
  }
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  const auto x = values({2, 1, 1, 2}, {1, 2, 3, 6});  // mean 3, unbiased var 14/3
  BatchNormStats<double> stats(1);
  Tape<double> tape(false);
  Var g = tape.constant(Tensor<double>({1}, 1.0)), b = tape.constant(Tensor<double>({1}));
  batchnorm2d(tape, tape.constant(x), g, b, stats, Mode::Train);
  EXPECT_NEAR(stats.running_mean[0], 0.1 * 3, 1e-15);
  EXPECT_NEAR(stats.running_var[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-15);
}

TEST(BatchNorm, InferWithIdentityStats) {
  Rng rng(13);
  const auto x = random_tensor({2, 3, 2, 2}, rng);
  BatchNormStats<double> stats(3);
  Tape<double> tape(false);
  Var g = tape.constant(Tensor<double>({3}, 1.0)), b = tape.constant(Tensor<double>({3}));
  const auto y = tape.value(batchnorm2d(tape, tape.constant(x), g, b, stats, Mode::Infer));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i] / std::sqrt(1 + 1e-5), 1e-15);
  EXPECT_EQ(stats.running_mean[0], 0.0);
}

TEST(BatchNorm, SingleElementTrainBatchIsAnError) {
  BatchNormStats<double> stats(1);
  Tape<double> tape(false);
  Var g = tape.constant(Tensor<double>({1}, 1.0)), b = tape.constant(Tensor<double>({1}));
  EXPECT_THROW(batchnorm2d(tape, tape.constant(Tensor<double>({1, 1, 1, 1})), g, b, stats, Mode::Train),
               ShapeError);
}

TEST(BatchNorm, Gradients) {
  Rng rng(14);
  const auto x = random_tensor({3, 2, 2, 3}, rng), g = random_tensor({2}, rng, 0.5, 1.5), b = random_tensor({2}, rng);
  for (Mode mode : {Mode::Train, Mode::Infer}) {
    const auto r = finite_difference(
        [mode](auto& t, const auto& v) {
          BatchNormStats<double> stats(2);
          stats.running_mean[0] = 0.3;
          stats.running_var[1] = 2.0;
          return batchnorm2d(t, v[0], v[1], v[2], stats, mode);
        },
        {x, g, b});
    EXPECT_LT(r.max_rel, 1e-5);
  }
}

// ---------------------------------------------------------------------------
// Cross-entropy

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  for (std::size_t c : {2u, 5u, 15u}) {
    Tape<double> tape(false);
    Var l = tape.constant(Tensor<double>({3, c}, 0.7));
    const std::vector<std::size_t> labels{0, c - 1, 1};
    EXPECT_NEAR(tape.value(softmax_cross_entropy(tape, l, labels))[0], std::log(double(c)), 1e-15);
  }
}

TEST(CrossEntropy, ConfidentCorrectLogits) {
  Tape<double> tape(false);
  Var l = tape.constant(values({1, 2}, {10, -10}));
  const std::vector<std::size_t> labels{0};
  EXPECT_NEAR(tape.value(softmax_cross_entropy(tape, l, labels))[0], std::log1p(std::exp(-20.0)), 1e-15);
  EXPECT_NEAR(tape.value(softmax_cross_entropy(tape, l, labels))[0], 2.06e-9, 0.01e-9);
}

TEST(CrossEntropy, ShiftInvariance) {
  Rng rng(15);
  const auto l = random_tensor({4, 6}, rng);
  auto shifted = l;
  for (auto& v : shifted.data()) v += 123.0;
  const std::vector<std::size_t> labels{0, 3, 5, 2};
  Tape<double> tape(false);
  const double a = tape.value(softmax_cross_entropy(tape, tape.constant(l), labels))[0];
  const double b = tape.value(softmax_cross_entropy(tape, tape.constant(shifted), labels))[0];
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(CrossEntropy, LabelOutOfRange) {
  Tape<double> tape(false);
  const std::vector<std::size_t> labels{4};
  EXPECT_THROW(softmax_cross_entropy(tape, tape.constant(Tensor<double>({1, 4})), labels), ShapeError);
}

TEST(CrossEntropy, Gradients) {
  Rng rng(16);
  const auto l = random_tensor({5, 4}, rng, -2, 2);
  const std::vector<std::size_t> labels{0, 1, 2, 3, 1};
  const auto r = finite_difference(
      [&labels](auto& t, const auto& v) { return softmax_cross_entropy(t, v[0], labels); }, {l});
  EXPECT_LT(r.max_rel, kFdTol);
}

// ---------------------------------------------------------------------------
// Random composite graphs

TEST(Composite, RandomShapesGradcheck) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng.index(3), c = 1 + rng.index(3), len = 2 + rng.index(6), d = 1 + rng.index(4);
    const std::size_t k = rng.index(2) ? 3 : 1;
    const auto x = random_tensor({n, c, len}, rng), w = random_tensor({d, c, k}, rng), b = random_tensor({d}, rng);
    const auto lw = random_tensor({3, d}, rng), lb = random_tensor({3}, rng), v = random_tensor({d}, rng);
    const auto r = finite_difference(
        [](auto& t, const auto& in) {
          Var h = activation(t, conv1d(t, in[0], in[1], in[2]), Activation::SiLU);
          h = hslinet::tanh(t, add_along(t, h, in[5], 1));
          h = mean_reduce(t, reverse_axis(t, h, 2), 2);
          return linear(t, h, in[3], in[4]);
        },
        {x, w, b, lw, lb, v});
    EXPECT_LT(r.max_rel, 1e-5) << "trial " << trial;
  }
}
