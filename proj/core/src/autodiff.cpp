// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <random>

#include "tiflab/errors.hpp"

namespace tiflab::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_string(t.shape()));
  }
}

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw ContractViolation("operands belong to different graphs");
}

enum class Broadcast { kSame, kRow };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.rank() == 1 && a.rank() >= 1 && b.size() == a.cols()) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": cannot combine " + shape_string(a.shape()) + " with " +
                   shape_string(b.shape()));
}

template <typename Fn>
Var unary(Var a, Tensor out, Fn local_grad) {
  const std::size_t a_id = a.id();
  return a.graph().push(std::move(out), {a}, [a_id, local_grad](Graph& g, std::size_t self) {
    if (!g.needs_grad(a_id)) return;
    const Tensor& up = g.upstream(self);
    const Tensor& x = g.value(a_id);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad_buffer(a_id);
    for (std::size_t i = 0; i < up.size(); ++i) dx[i] += up[i] * local_grad(x[i], y[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

// ---------------------------------------------------------------- ParamStore

std::size_t ParamStore::add(std::string name, Shape shape) {
  ParamSpec spec{std::move(name), std::move(shape), values_.size(), 0};
  spec.size = shape_size(spec.shape);
  values_.resize(values_.size() + spec.size, 0.0);
  grads_.resize(values_.size(), 0.0);
  specs_.push_back(std::move(spec));
  return specs_.size() - 1;
}

std::span<double> ParamStore::view(std::size_t index) {
  const ParamSpec& s = specs_.at(index);
  return std::span<double>(values_).subspan(s.offset, s.size);
}

std::span<const double> ParamStore::view(std::size_t index) const {
  const ParamSpec& s = specs_.at(index);
  return std::span<const double>(values_).subspan(s.offset, s.size);
}

std::span<const double> ParamStore::grad_view(std::size_t index) const {
  const ParamSpec& s = specs_.at(index);
  return std::span<const double>(grads_).subspan(s.offset, s.size);
}

Tensor ParamStore::tensor(std::size_t index) const {
  auto v = view(index);
  return Tensor(specs_.at(index).shape, std::vector<double>(v.begin(), v.end()));
}

void ParamStore::assign(std::span<const double> values) {
  if (values.size() != values_.size()) {
    throw ShapeError("parameter vector has " + std::to_string(values.size()) + " values, expected " +
                     std::to_string(values_.size()));
  }
  std::copy(values.begin(), values.end(), values_.begin());
}

void ParamStore::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

// ---------------------------------------------------------------- Graph

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, false, {}, nullptr, 0});
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, record_, false, true, {}, nullptr, 0});
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(ParamStore& store, std::size_t index) {
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), index);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  param_nodes_.emplace(key, nodes_.size());
  Node node;
  node.value = store.tensor(index);
  node.needs_grad = record_;
  node.store = &store;
  node.param_index = index;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param_constant(const ParamStore& store, std::size_t index) {
  const auto key = std::make_pair(&store, index);
  if (auto it = constant_nodes_.find(key); it != constant_nodes_.end()) return Var(this, it->second);
  constant_nodes_.emplace(key, nodes_.size());
  return constant(store.tensor(index));
}

Var Graph::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward_fn) {
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) {
      if (&in.graph() != this) throw ContractViolation("operand belongs to a different graph");
      needs = needs || nodes_[in.id()].needs_grad;
    }
  }
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs;
  if (needs) node.backward = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

void Graph::backward(Var loss) {
  if (!record_) throw ContractViolation("backward() on a graph built without recording");
  if (&loss.graph() != this) throw ContractViolation("loss belongs to a different graph");
  if (loss.value().rank() != 0) {
    throw ContractViolation("backward() needs a scalar loss, got shape " +
                            shape_string(loss.value().shape()));
  }
  for (Node& node : nodes_) node.has_grad = false;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.needs_grad) continue;
    if (node.backward) node.backward(*this, id);
    if (node.store != nullptr) {
      const ParamSpec& spec = node.store->spec(node.param_index);
      auto grads = node.store->grads().subspan(spec.offset, spec.size);
      for (std::size_t i = 0; i < spec.size; ++i) grads[i] += node.grad[i];
    }
  }
}

Tensor Graph::grad(Var v) const {
  const Node& node = nodes_.at(v.id());
  if (!node.has_grad) return Tensor(node.value.shape());
  return node.grad;
}

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.shape()[1] != bv.shape()[0]) {
    throw ShapeError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Tensor out({av.shape()[0], bv.shape()[1]});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  const std::size_t a_id = a.id();
  const std::size_t b_id = b.id();
  return a.graph().push(std::move(out), {a, b}, [a_id, b_id](Graph& g, std::size_t self) {
    auto up = as_matrix(g.upstream(self));
    if (g.needs_grad(a_id)) {
      as_matrix(g.grad_buffer(a_id)).noalias() += up * as_matrix(g.value(b_id)).transpose();
    }
    if (g.needs_grad(b_id)) {
      as_matrix(g.grad_buffer(b_id)).noalias() += as_matrix(g.value(a_id)).transpose() * up;
    }
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul_nt");
  require_rank2(bv, "matmul_nt");
  if (av.shape()[1] != bv.shape()[1]) {
    throw ShapeError("matmul_nt: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()) +
                     "^T");
  }
  Tensor out({av.shape()[0], bv.shape()[0]});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  const std::size_t a_id = a.id();
  const std::size_t b_id = b.id();
  return a.graph().push(std::move(out), {a, b}, [a_id, b_id](Graph& g, std::size_t self) {
    auto up = as_matrix(g.upstream(self));
    if (g.needs_grad(a_id)) {
      as_matrix(g.grad_buffer(a_id)).noalias() += up * as_matrix(g.value(b_id));
    }
    if (g.needs_grad(b_id)) {
      as_matrix(g.grad_buffer(b_id)).noalias() += up.transpose() * as_matrix(g.value(a_id));
    }
  });
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, "add");
  Tensor out = av;
  const std::size_t cols = bv.size();
  for (std::size_t base = 0; base < out.size(); base += cols) {
    const std::size_t off = kind == Broadcast::kSame ? base : 0;
    for (std::size_t j = 0; j < cols; ++j) out[base + j] += bv[off + j];
  }
  const std::size_t a_id = a.id();
  const std::size_t b_id = b.id();
  return a.graph().push(std::move(out), {a, b}, [a_id, b_id, kind, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    if (g.needs_grad(a_id)) {
      Tensor& da = g.grad_buffer(a_id);
      for (std::size_t i = 0; i < up.size(); ++i) da[i] += up[i];
    }
    if (g.needs_grad(b_id)) {
      Tensor& db = g.grad_buffer(b_id);
      for (std::size_t base = 0; base < up.size(); base += cols) {
        const std::size_t off = kind == Broadcast::kSame ? base : 0;
        for (std::size_t j = 0; j < cols; ++j) db[off + j] += up[base + j];
      }
    }
  });
}

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(av, bv, "mul");
  Tensor out = av;
  const std::size_t cols = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= kind == Broadcast::kSame ? bv[i] : bv[i % cols];
  const std::size_t a_id = a.id();
  const std::size_t b_id = b.id();
  return a.graph().push(std::move(out), {a, b}, [a_id, b_id, kind, cols](Graph& g, std::size_t self) {
    const Tensor& up = g.upstream(self);
    const Tensor& x = g.value(a_id);
    const Tensor& y = g.value(b_id);
    if (g.needs_grad(a_id)) {
      Tensor& da = g.grad_buffer(a_id);
      for (std::size_t i = 0; i < up.size(); ++i) {
        da[i] += up[i] * (kind == Broadcast::kSame ? y[i] : y[i % cols]);
      }
    }
    if (g.needs_grad(b_id)) {
      Tensor& db = g.grad_buffer(b_id);
      for (std::size_t i = 0; i < up.size(); ++i) db[kind == Broadcast::kSame ? i : i % cols] += up[i] * x[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return unary(a, std::move(out), [factor](double, double) { return factor; });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var add_scalar(Var a, double offset) {
  Tensor out = a.value();
  for (double& v : out.data()) v += offset;
  return unary(a, std::move(out), [](double, double) { return 1.0; });
}

Var gather_rows(Var table, std::span<const std::size_t> indices) {
  const Tensor& tv = table.value();
  require_rank2(tv, "gather_rows");
  const std::size_t n = tv.shape()[0];
  const std::size_t d = tv.shape()[1];
  Tensor out({indices.size(), d});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range " +
                       std::to_string(n));
    }
    std::copy_n(tv.data().begin() + static_cast<std::ptrdiff_t>(indices[i] * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const std::size_t t_id = table.id();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.graph().push(std::move(out), {table}, [t_id, idx = std::move(idx), d](Graph& g, std::size_t self) {
    if (!g.needs_grad(t_id)) return;
    const Tensor& up = g.upstream(self);
    Tensor& dt = g.grad_buffer(t_id);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) dt[idx[i] * d + j] += up[i * d + j];
    }
  });
}

std::vector<double> softmax_values(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax over an empty axis");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - mx);
    total += out[j];
  }
  for (double& v : out) v /= total;
  return out;
}

Var softmax(Var logits) {
  const Tensor& x = logits.value();
  if (x.rank() == 0 || x.cols() == 0) throw ShapeError("softmax over an empty axis");
  Tensor out(x.shape());
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = softmax_values(x.row(r));
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const std::size_t x_id = logits.id();
  return logits.graph().push(std::move(out), {logits}, [x_id, cols](Graph& g, std::size_t self) {
    if (!g.needs_grad(x_id)) return;
    const Tensor& up = g.upstream(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad_buffer(x_id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const std::size_t base = r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += up[base + j] * y[base + j];
      for (std::size_t j = 0; j < cols; ++j) dx[base + j] += y[base + j] * (up[base + j] - dot);
    }
  });
}

Var log_softmax(Var logits) {
  const Tensor& x = logits.value();
  if (x.rank() == 0 || x.cols() == 0) throw ShapeError("log_softmax over an empty axis");
  Tensor out(x.shape());
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double lse = m + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = row[j] - lse;
  }
  const std::size_t x_id = logits.id();
  return logits.graph().push(std::move(out), {logits}, [x_id, cols](Graph& g, std::size_t self) {
    if (!g.needs_grad(x_id)) return;
    const Tensor& up = g.upstream(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad_buffer(x_id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const std::size_t base = r * cols;
      double total = 0.0;
      for (std::size_t j = 0; j < cols; ++j) total += up[base + j];
      for (std::size_t j = 0; j < cols; ++j) dx[base + j] += up[base + j] - std::exp(y[base + j]) * total;
    }
  });
}

Var log(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::log(v);
  return unary(a, std::move(out), [](double x, double) { return 1.0 / x; });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = stable_sigmoid(v);
  return unary(a, std::move(out), [](double, double y) { return y * (1.0 - y); });
}

Var log_sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v)));
  return unary(a, std::move(out), [](double x, double) { return stable_sigmoid(-x); });
}

Var gelu(Var a) {
  Tensor out = a.value();
  // tanh of every element, reused by the backward pass.
  auto tanh_u = std::make_shared<std::vector<double>>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    // tanh(u) = 1 - 2 / (exp(2u) + 1); exp is much cheaper than tanh in libm.
    const double t = 1.0 - 2.0 / (std::exp(2.0 * kGeluC * (v + kGeluA * v * v * v)) + 1.0);
    (*tanh_u)[i] = t;
    out[i] = 0.5 * v * (1.0 + t);
  }
  const std::size_t a_id = a.id();
  return a.graph().push(std::move(out), {a}, [a_id, tanh_u](Graph& g, std::size_t self) {
    if (!g.needs_grad(a_id)) return;
    const Tensor& up = g.upstream(self);
    const Tensor& x = g.value(a_id);
    Tensor& dx = g.grad_buffer(a_id);
    for (std::size_t i = 0; i < up.size(); ++i) {
      const double t = (*tanh_u)[i];
      const double v = x[i];
      dx[i] += up[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v));
    }
  });
}

Var layer_norm(Var a, double eps) {
  const Tensor& x = a.value();
  if (x.rank() == 0 || x.cols() == 0) throw ShapeError("layer_norm over an empty axis");
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  Tensor out(x.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = x.row(r);
    const double mu = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(cols);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = (row[j] - mu) * inv_std[r];
  }
  const std::size_t x_id = a.id();
  return a.graph().push(std::move(out), {a}, [x_id, cols, inv_std = std::move(inv_std)](Graph& g, std::size_t self) {
    if (!g.needs_grad(x_id)) return;
    const Tensor& up = g.upstream(self);
    const Tensor& xhat = g.value(self);
    Tensor& dx = g.grad_buffer(x_id);
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < inv_std.size(); ++r) {
      const std::size_t base = r * cols;
      double mean_g = 0.0;
      double mean_gx = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        mean_g += up[base + j];
        mean_gx += up[base + j] * xhat[base + j];
      }
      mean_g /= n;
      mean_gx /= n;
      for (std::size_t j = 0; j < cols; ++j) {
        dx[base + j] += inv_std[r] * (up[base + j] - mean_g - xhat[base + j] * mean_gx);
      }
    }
  });
}

Var sum(Var a) {
  const auto data = a.value().data();
  Tensor out = Tensor::scalar(std::accumulate(data.begin(), data.end(), 0.0));
  const std::size_t a_id = a.id();
  return a.graph().push(std::move(out), {a}, [a_id](Graph& g, std::size_t self) {
    if (!g.needs_grad(a_id)) return;
    const double up = g.upstream(self)[0];
    for (double& v : g.grad_buffer(a_id).data()) v += up;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var select(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  const Tensor& x = a.value();
  require_rank2(x, "select");
  if (rows.size() != cols.size()) throw ShapeError("select: row and column index counts differ");
  const std::size_t width = x.shape()[1];
  std::vector<std::size_t> flat(rows.size());
  Tensor out({rows.size()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.shape()[0] || cols[i] >= width) throw ShapeError("select: index out of range");
    flat[i] = rows[i] * width + cols[i];
    out[i] = x[flat[i]];
  }
  const std::size_t a_id = a.id();
  return a.graph().push(std::move(out), {a}, [a_id, flat = std::move(flat)](Graph& g, std::size_t self) {
    if (!g.needs_grad(a_id)) return;
    const Tensor& up = g.upstream(self);
    Tensor& da = g.grad_buffer(a_id);
    for (std::size_t i = 0; i < flat.size(); ++i) da[flat[i]] += up[i];
  });
}

Var add_n(Graph& graph, std::span<const Var> scalars) {
  if (scalars.empty()) return graph.constant(Tensor::scalar(0.0));
  Var total = scalars[0];
  if (total.value().rank() != 0) throw ShapeError("add_n expects scalar nodes");
  for (std::size_t i = 1; i < scalars.size(); ++i) {
    if (scalars[i].value().rank() != 0) throw ShapeError("add_n expects scalar nodes");
    total = add(total, scalars[i]);
  }
  return total;
}

// ---------------------------------------------------------------- finite differences

FiniteDifferenceReport finite_difference_check(const LossBuilder& loss_fn, ParamStore& store,
                                               double eps, std::size_t max_coordinates,
                                               std::uint64_t seed) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ContractViolation("finite_difference_check: eps must lie in [1e-7, 1e-3]");
  }
  auto evaluate = [&] {
    Graph g(false);
    return loss_fn(g, store).value().item();
  };
  const double first = evaluate();
  const double second = evaluate();
  if (std::memcmp(&first, &second, sizeof(double)) != 0) {
    throw ContractViolation("finite_difference_check: loss function is not deterministic");
  }

  store.zero_grad();
  std::vector<double> analytic;
  {
    Graph g(true);
    Var loss = loss_fn(g, store);
    g.backward(loss);
    analytic.assign(store.grads().begin(), store.grads().end());
  }

  std::vector<std::size_t> coords(store.num_values());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coordinates != 0 && coords.size() > max_coordinates) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < max_coordinates; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, coords.size() - 1);
      std::swap(coords[i], coords[pick(rng)]);
    }
    coords.resize(max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  FiniteDifferenceReport report;
  auto values = store.values();
  for (std::size_t c : coords) {
    const double saved = values[c];
    values[c] = saved + eps;
    const double plus = evaluate();
    values[c] = saved - eps;
    const double minus = evaluate();
    values[c] = saved;
    const double fd = (plus - minus) / (2.0 * eps);
    const double ga = analytic[c];
    const double err = std::abs(ga - fd) / std::max({1.0, std::abs(ga), std::abs(fd)});
    if (err > report.max_relative_error || report.coordinates_checked == 0) {
      report.max_relative_error = std::max(report.max_relative_error, err);
      report.worst_coordinate = c;
    }
    ++report.coordinates_checked;
  }
  return report;
}

}  // namespace tiflab::ad
