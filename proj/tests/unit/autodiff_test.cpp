// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "tiflab/autodiff.hpp"
#include "tiflab/errors.hpp"

namespace tiflab::ad {
namespace {

using Inputs = std::vector<Var>;
using Op = std::function<Var(Graph&, const Inputs&)>;

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(shape);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

// Reduces op(inputs) to a scalar through fixed random weights and compares
// the tape's gradient with central differences on every input coordinate.
double max_grad_error(const std::vector<Shape>& shapes, const Op& op, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (std::size_t i = 0; i < shapes.size(); ++i) store.add("x" + std::to_string(i), shapes[i]);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : store.values()) v = n(rng);
  Tensor weights;
  bool have_weights = false;

  auto build = [&](Graph& g) {
    Inputs in;
    for (std::size_t i = 0; i < shapes.size(); ++i) in.push_back(g.param(store, i));
    Var out = op(g, in);
    if (out.shape().empty()) return out;
    if (!have_weights) {
      weights = random_tensor(out.shape(), rng);
      have_weights = true;
    }
    return sum(mul(out, g.constant(weights)));
  };

  store.zero_grad();
  {
    Graph g;
    g.backward(build(g));
  }
  std::vector<double> analytic(store.grads().begin(), store.grads().end());
  std::vector<std::size_t> coords(store.num_values());
  std::iota(coords.begin(), coords.end(), 0);
  const auto numeric = oracle::central_difference(
      [&] {
        Graph g(false);
        return build(g).value().item();
      },
      store.values(), coords, 1e-6);
  double worst = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

constexpr double kTol = 1e-7;

TEST(AutodiffGrad, Matmul) {
  EXPECT_LT(max_grad_error({{3, 4}, {4, 2}}, [](Graph&, const Inputs& x) { return matmul(x[0], x[1]); }), kTol);
}

TEST(AutodiffGrad, MatmulNt) {
  EXPECT_LT(max_grad_error({{3, 4}, {5, 4}}, [](Graph&, const Inputs& x) { return matmul_nt(x[0], x[1]); }), kTol);
}

TEST(AutodiffGrad, ElementwiseAndBroadcast) {
  EXPECT_LT(max_grad_error({{3, 4}, {3, 4}}, [](Graph&, const Inputs& x) { return mul(x[0], x[1]); }), kTol);
  EXPECT_LT(max_grad_error({{3, 4}, {3, 4}}, [](Graph&, const Inputs& x) { return sub(x[0], x[1]); }), kTol);
  EXPECT_LT(max_grad_error({{3, 4}, {4}}, [](Graph&, const Inputs& x) { return add(x[0], x[1]); }), kTol);
  EXPECT_LT(max_grad_error({{2, 3}}, [](Graph&, const Inputs& x) { return add_scalar(scale(x[0], -1.5), 0.3); }),
            kTol);
}

TEST(AutodiffGrad, SoftmaxFamily) {
  EXPECT_LT(max_grad_error({{3, 5}}, [](Graph&, const Inputs& x) { return softmax(x[0]); }), kTol);
  EXPECT_LT(max_grad_error({{3, 5}}, [](Graph&, const Inputs& x) { return log_softmax(x[0]); }), kTol);
}

TEST(AutodiffGrad, Nonlinearities) {
  EXPECT_LT(max_grad_error({{2, 4}}, [](Graph&, const Inputs& x) { return sigmoid(x[0]); }), kTol);
  EXPECT_LT(max_grad_error({{2, 4}}, [](Graph&, const Inputs& x) { return log_sigmoid(x[0]); }), kTol);
  EXPECT_LT(max_grad_error({{2, 4}}, [](Graph&, const Inputs& x) { return gelu(x[0]); }), kTol);
  EXPECT_LT(max_grad_error({{2, 4}}, [](Graph&, const Inputs& x) { return log(sigmoid(x[0])); }), kTol);
  EXPECT_LT(max_grad_error({{3, 6}}, [](Graph&, const Inputs& x) { return layer_norm(x[0]); }), kTol);
}

TEST(AutodiffGrad, Reductions) {
  EXPECT_LT(max_grad_error({{3, 4}}, [](Graph&, const Inputs& x) { return mean(x[0]); }), kTol);
  EXPECT_LT(max_grad_error({{3, 4}}, [](Graph&, const Inputs& x) { return sum(x[0]); }), kTol);
  EXPECT_LT(max_grad_error({{3, 4}}, [](Graph& g, const Inputs& x) {
              const Var parts[] = {sum(x[0]), mean(x[0])};
              return add_n(g, parts);
            }),
            kTol);
}

TEST(AutodiffGrad, GatherAndSelect) {
  const std::vector<std::size_t> idx = {2, 0, 2, 1};
  EXPECT_LT(max_grad_error({{3, 4}}, [&](Graph&, const Inputs& x) { return gather_rows(x[0], idx); }), kTol);
  const std::vector<std::size_t> rows = {0, 1, 1}, cols = {3, 0, 0};
  EXPECT_LT(max_grad_error({{2, 4}}, [&](Graph&, const Inputs& x) { return select(x[0], rows, cols); }), kTol);
}

TEST(AutodiffGrad, ReusedNodeAccumulates) {
  EXPECT_LT(max_grad_error({{2, 3}}, [](Graph&, const Inputs& x) { return mul(x[0], add(x[0], x[0])); }), kTol);
}

TEST(Autodiff, ForwardValues) {
  Graph g;
  Var a = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = g.constant(Tensor({2, 2}, {5, 6, 7, 8}));
  EXPECT_EQ(matmul(a, b).value(), Tensor({2, 2}, {19, 22, 43, 50}));
  EXPECT_EQ(matmul_nt(a, b).value(), Tensor({2, 2}, {17, 23, 39, 53}));
  const auto sm = softmax(g.constant(Tensor({1, 3}, {1000, 1000, 1000}))).value();
  for (double v : sm.storage()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const double ls = log_sigmoid(g.constant(Tensor::scalar(-800.0))).value().item();
  EXPECT_NEAR(ls, -800.0, 1e-9);
  const auto lsm = log_softmax(g.constant(Tensor({1, 2}, {0.0, std::log(3.0)}))).value();
  EXPECT_NEAR(lsm[0], std::log(0.25), 1e-15);
  EXPECT_NEAR(lsm[1], std::log(0.75), 1e-15);
}

TEST(Autodiff, ShapeMismatchThrows) {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 3}));
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(add(a, g.constant(Tensor({4}))), ShapeError);
}

TEST(Autodiff, BackwardNeedsScalarAndRecording) {
  Graph g;
  Var a = g.variable(Tensor({2}, {1, 2}));
  EXPECT_THROW(g.backward(a), Error);
  Graph off(false);
  Var b = off.variable(Tensor::scalar(1.0));
  EXPECT_THROW(off.backward(b), ContractViolation);
}

TEST(Autodiff, ParamLeafIsCachedPerGraph) {
  ParamStore store;
  store.add("w", {2});
  Graph g;
  EXPECT_EQ(g.param(store, 0).id(), g.param(store, 0).id());
  EXPECT_EQ(g.param_constant(store, 0).id(), g.param_constant(store, 0).id());
  EXPECT_NE(g.param(store, 0).id(), g.param_constant(store, 0).id());
}

TEST(Autodiff, ParamGradientsAccumulateIntoStore) {
  ParamStore store;
  store.add("w", {3});
  store.values()[0] = 1;
  store.values()[1] = 2;
  store.values()[2] = 3;
  store.zero_grad();
  for (int rep = 0; rep < 2; ++rep) {
    Graph g;
    g.backward(sum(mul(g.param(store, 0), g.param(store, 0))));
  }
  EXPECT_DOUBLE_EQ(store.grads()[0], 4.0);
  EXPECT_DOUBLE_EQ(store.grads()[2], 12.0);
}

TEST(Autodiff, LibraryFiniteDifferenceCheckAgreesWithTape) {
  ParamStore store;
  store.add("a", {3, 3});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : store.values()) v = n(rng);
  const auto report = finite_difference_check(
      [](Graph& g, ParamStore& s) { return mean(log_softmax(matmul(g.param(s, 0), g.param(s, 0)))); }, store, 1e-6);
  EXPECT_EQ(report.coordinates_checked, 9u);
  EXPECT_LT(report.max_relative_error, 1e-7);
  EXPECT_THROW(finite_difference_check([](Graph& g, ParamStore& s) { return sum(g.param(s, 0)); }, store, 1.0),
               ContractViolation);
}

}  // namespace
}  // namespace tiflab::ad
