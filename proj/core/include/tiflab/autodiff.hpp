// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Graph is the tape: every op appends one node whose inputs were created
// earlier, so reverse creation order is a valid topological order for the
// backward sweep. Model parameters live in a ParamStore as one flat vector;
// Graph::param() copies a slice in and backward() accumulates the slice
// gradient back into ParamStore::grads().

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tiflab/tensor.hpp"

namespace tiflab::ad {

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// All trainable parameters of one model, stored contiguously in
// registration order.
class ParamStore {
 public:
  std::size_t add(std::string name, Shape shape);

  std::size_t count() const noexcept { return specs_.size(); }
  std::size_t num_values() const noexcept { return values_.size(); }
  const ParamSpec& spec(std::size_t index) const { return specs_.at(index); }
  const std::vector<ParamSpec>& specs() const noexcept { return specs_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> grads() noexcept { return grads_; }
  std::span<const double> grads() const noexcept { return grads_; }

  std::span<double> view(std::size_t index);
  std::span<const double> view(std::size_t index) const;
  std::span<const double> grad_view(std::size_t index) const;
  Tensor tensor(std::size_t index) const;

  // Replaces every value; sizes must match.
  void assign(std::span<const double> values);
  void zero_grad();

 private:
  std::vector<ParamSpec> specs_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

class Graph;

// Handle to a node on a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // With record == false no backward closures are kept: forward-only
  // evaluation, and backward() is a contract violation.
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value);
  // Leaf whose gradient is kept and readable through grad().
  Var variable(Tensor value);
  // One leaf per (store, index) per graph: repeated calls return the same
  // node, so a batch of sequences shares a single copy of each parameter.
  Var param(ParamStore& store, std::size_t index);
  // Same caching for parameters read as constants.
  Var param_constant(const ParamStore& store, std::size_t index);

  // Seeds d(loss)/d(loss) = 1, sweeps the tape backwards and adds parameter
  // gradients into each store's grads(). Loss must have shape {}.
  void backward(Var loss);

  // Gradient of the last backward() w.r.t. a node; zeros if it was not reached.
  Tensor grad(Var v) const;

  // Op plumbing. `backward_fn` receives the graph and the node id.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward_fn);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  Tensor& grad_buffer(std::size_t id);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    bool has_grad = false;
    bool keep_grad = false;
    BackwardFn backward;
    ParamStore* store = nullptr;
    std::size_t param_index = 0;
  };
  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore*, std::size_t>, std::size_t> param_nodes_;
  std::map<std::pair<const ParamStore*, std::size_t>, std::size_t> constant_nodes_;
  bool record_;
};

// Primitive ops. Shapes are checked and mismatches throw ShapeError.

// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
// [m,k] x [n,k]^T -> [m,n]
Var matmul_nt(Var a, Var b);
// Same shape, or b of shape {n} broadcast over every row of a [..., n].
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
// Rows of `table` [V, d] picked by `indices` -> [indices.size(), d].
// Used for embedding lookup and for row slicing.
Var gather_rows(Var table, std::span<const std::size_t> indices);
// Softmax over the last axis, max-subtracted.
Var softmax(Var logits);
// log(softmax(logits)) over the last axis, computed as x - logsumexp(x).
Var log_softmax(Var logits);
Var log(Var a);
Var sigmoid(Var a);
// log(sigmoid(a)) without underflow for large negative a.
Var log_sigmoid(Var a);
// Row-wise normalization to zero mean / unit variance (no affine part).
Var layer_norm(Var a, double eps = 1e-5);
// tanh approximation of GELU.
Var gelu(Var a);
Var sum(Var a);
Var mean(Var a);
// Picks a[rows[i], cols[i]] of a 2-D tensor -> shape {rows.size()}.
Var select(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
// Sum of scalar nodes; empty list gives a constant 0.
Var add_n(Graph& graph, std::span<const Var> scalars);

// Numerically stable softmax of one row, used outside graphs.
std::vector<double> softmax_values(std::span<const double> logits);

// Builds a scalar loss on `graph` from the parameters in `store`.
using LossBuilder = std::function<Var(Graph&, ParamStore&)>;

struct FiniteDifferenceReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_coordinate = 0;
};

// Compares analytic gradients with central differences. Relative error per
// coordinate is |g_a - g_fd| / max(1, |g_a|, |g_fd|). When the store holds
// more than `max_coordinates` values, a seeded random subsample of that many
// coordinates is checked (max_coordinates == 0 checks everything).
// Throws ContractViolation for eps outside [1e-7, 1e-3] or a loss that is
// not reproducible across two identical evaluations.
FiniteDifferenceReport finite_difference_check(const LossBuilder& loss_fn, ParamStore& store,
                                               double eps, std::size_t max_coordinates = 0,
                                               std::uint64_t seed = 0);

}  // namespace tiflab::ad
