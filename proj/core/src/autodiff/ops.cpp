#include "onepass/autodiff/ops.hpp"

#include <optional>

#include <fmt/format.h>

namespace onepass::ad {
namespace {

Graph& same_graph(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph) throw GraphError("operands belong to different graphs");
  return *a.graph;
}

Var unary(Op op, Var a, double param = 0.0, Shape aux = {}) {
  Node n{.op = op, .arity = 1, .parents = {a.id, 0}, .param = param, .aux_shape = std::move(aux)};
  return a.graph->append(std::move(n));
}

Var binary(Op op, Var a, Var b) {
  Node n{.op = op, .arity = 2, .parents = {a.id, b.id}};
  return same_graph(a, b).append(std::move(n));
}

// Brings b to a's shape when it is a scalar or a bias row; returns nullopt when
// no rule applies (the caller then reports the mismatch).
std::optional<Var> broadcast_to(Var b, const Shape& target) {
  const Shape& s = b.shape();
  if (s == target) return b;
  if (numel(s) == 1) return broadcast_scalar(s.empty() ? b : reshape(b, {}), target);
  if (s.size() == 1 && target.size() == 2 && s[0] == target[1]) return broadcast_rows(b, target[0]);
  return std::nullopt;
}

Var elementwise(Op op, Var a, Var b) {
  same_graph(a, b);
  if (a.shape() == b.shape()) return binary(op, a, b);
  // Broadcast towards the larger operand; for equal counts ([] vs [1]) the
  // higher rank wins.
  const std::size_t na = numel(a.shape());
  const std::size_t nb = numel(b.shape());
  if (na > nb || (na == nb && a.shape().size() >= b.shape().size())) {
    if (auto bb = broadcast_to(b, a.shape())) return binary(op, a, *bb);
  } else if (auto aa = broadcast_to(a, b.shape())) {
    return binary(op, *aa, b);
  }
  throw ShapeError(std::string(op_name(op)),
                   fmt::format("cannot broadcast {} with {}", to_string(a.shape()), to_string(b.shape())),
                   static_cast<long>(a.graph->size()));
}

// ---------------------------------------------------------------------------
// Backward pass. The adjoint rules are written once against a builder B whose
// value type is either Tensor (plain first-order pass) or Var (recorded pass,
// producing nodes that can be differentiated again).

struct RawBuilder {
  using V = Tensor;
  const Graph& g;
  const Tensor& val(NodeId id) const { return g.node(id).value; }
  Tensor constant(Tensor t) const { return t; }
};

struct RecordingBuilder {
  using V = Var;
  Graph& g;
  Var val(NodeId id) const { return Var{&g, id}; }
  Var constant(Tensor t) const { return g.constant(std::move(t)); }
};

// Calls emit(parent_slot, contribution) for each parent adjoint of node `id`.
template <class B, class Emit>
void adjoint(B& b, NodeId id, const typename B::V& g, Emit&& emit) {
  // Copy what we need up front: recording may append nodes.
  const Node& n = b.g.node(id);
  const Op op = n.op;
  const NodeId pa = n.parents[0];
  const NodeId pb = n.parents[1];
  const double param = n.param;
  const Shape in_shape = n.arity > 0 ? b.g.node(pa).value.shape() : Shape{};

  auto x = [&]() -> decltype(auto) { return b.val(pa); };
  auto y = [&]() -> decltype(auto) { return b.val(pb); };
  auto out = [&]() -> decltype(auto) { return b.val(id); };

  switch (op) {
    case Op::Add:
      emit(0, g);
      emit(1, g);
      return;
    case Op::Sub:
      emit(0, g);
      emit(1, neg(g));
      return;
    case Op::Mul:
      emit(0, mul(g, y()));
      emit(1, mul(g, x()));
      return;
    case Op::Div:
      emit(0, div(g, y()));
      emit(1, neg(div(mul(g, out()), y())));
      return;
    case Op::Neg: emit(0, neg(g)); return;
    case Op::Scale: emit(0, scale(g, param)); return;
    case Op::Matmul: {
      const Shape sa = b.g.node(pa).value.shape();
      const Shape sb = b.g.node(pb).value.shape();
      if (sa.size() == 2 && sb.size() == 2) {
        emit(0, matmul(g, transpose(y())));
        emit(1, matmul(transpose(x()), g));
      } else if (sa.size() == 2 && sb.size() == 1) {
        emit(0, matmul(reshape(g, {sa[0], 1}), reshape(y(), {1, sa[1]})));
        emit(1, matmul(transpose(x()), g));
      } else if (sa.size() == 1 && sb.size() == 2) {
        emit(0, matmul(y(), g));
        emit(1, matmul(reshape(x(), {sa[0], 1}), reshape(g, {1, sb[1]})));
      } else {
        emit(0, mul(broadcast_scalar(g, sa), y()));
        emit(1, mul(broadcast_scalar(g, sb), x()));
      }
      return;
    }
    case Op::Transpose: emit(0, transpose(g)); return;
    case Op::Reshape: emit(0, reshape(g, in_shape)); return;
    case Op::Relu: emit(0, mul(g, step(x()))); return;
    case Op::Step: return;  // zero derivative almost everywhere
    case Op::Exp: emit(0, mul(g, out())); return;
    case Op::Log: emit(0, div(g, x())); return;
    case Op::Tanh: {
      auto go = mul(g, out());
      emit(0, sub(g, mul(go, out())));
      return;
    }
    case Op::Sigmoid: {
      auto go = mul(g, out());
      emit(0, sub(go, mul(go, out())));
      return;
    }
    case Op::Power:
      if (param == 0.0) return;
      if (param == 1.0) {
        emit(0, g);
        return;
      }
      emit(0, mul(g, scale(power(x(), param - 1.0), param)));
      return;
    case Op::SumAll: emit(0, broadcast_scalar(g, in_shape)); return;
    case Op::MeanAll:
      emit(0, broadcast_scalar(scale(g, 1.0 / static_cast<double>(numel(in_shape))), in_shape));
      return;
    case Op::MaxAll:
      emit(0, mul(broadcast_scalar(g, in_shape), b.constant(argmax_mask(b.g.node(pa).value))));
      return;
    case Op::BroadcastScalar: emit(0, reshape(sum_all(g), in_shape)); return;
    case Op::SumRows: emit(0, broadcast_rows(g, in_shape[0])); return;
    case Op::BroadcastRows: emit(0, sum_rows(g)); return;
    case Op::SumCols: emit(0, broadcast_cols(g, in_shape[1])); return;
    case Op::BroadcastCols: emit(0, sum_cols(g)); return;
    case Op::SoftmaxRows: {
      auto s = out();
      const std::size_t cols = in_shape[1];
      emit(0, mul(s, sub(g, broadcast_cols(sum_cols(mul(g, s)), cols))));
      return;
    }
    case Op::SoftmaxXent: {
      const auto labels = b.g.node(id).labels;
      auto onehot = b.constant(one_hot(in_shape, *labels));
      auto probs = softmax_rows(x());
      auto gs = broadcast_scalar(scale(g, 1.0 / static_cast<double>(in_shape[0])), in_shape);
      emit(0, mul(gs, sub(probs, onehot)));
      return;
    }
    case Op::Custom: {
      const auto fn = b.g.node(id).custom;
      if (!fn->derivative) {
        throw GraphError(fmt::format("primitive '{}' (node {}) has no registered adjoint", fn->name, id));
      }
      if constexpr (std::is_same_v<typename B::V, Tensor>) {
        const Tensor& xv = x();
        Tensor d(xv.shape());
        for (std::size_t i = 0; i < xv.size(); ++i) d[i] = fn->derivative(xv[i]);
        emit(0, mul(g, d));
      } else {
        throw GraphError(
            fmt::format("primitive '{}' (node {}) has no differentiable adjoint for recorded passes", fn->name, id));
      }
      return;
    }
    case Op::Parameter:
    case Op::Constant:
    case Op::Placeholder: return;
  }
}

void check_wrt(const Graph& g, std::span<const Var> wrt) {
  for (const Var& w : wrt) {
    if (w.graph != &g) throw GraphError("wrt node belongs to a different graph");
    const Op op = g.node(w.id).op;
    if (op == Op::Constant) {
      throw GraphError(fmt::format("node {} ({}) is not differentiable", w.id, op_name(op)));
    }
  }
}

// Marks nodes in [0, top] whose value depends on some wrt node.
std::vector<bool> depends_on(const Graph& g, NodeId top, std::span<const Var> wrt) {
  std::vector<bool> dep(top + 1, false);
  for (const Var& w : wrt)
    if (w.id <= top) dep[w.id] = true;
  for (NodeId k = 0; k <= top; ++k) {
    const Node& n = g.node(k);
    for (int p = 0; p < n.arity; ++p)
      if (dep[n.parents[p]]) dep[k] = true;
  }
  return dep;
}

template <class B>
std::vector<typename B::V> backward(B& b, std::span<const Var> outputs, std::span<const typename B::V> seeds,
                                    std::span<const Var> wrt) {
  using V = typename B::V;
  const Graph& g = b.g;
  if (outputs.size() != seeds.size()) throw GraphError("vjp: one seed per output is required");
  check_wrt(g, wrt);
  if (outputs.empty()) throw GraphError("vjp: no outputs");

  NodeId top = 0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (outputs[k].graph != &g) throw GraphError("vjp: outputs belong to different graphs");
    if (seeds[k].shape() != outputs[k].shape()) {
      throw ShapeError("vjp", fmt::format("seed {} for output {} of shape {}", to_string(seeds[k].shape()),
                                          outputs[k].id, to_string(outputs[k].shape())),
                       static_cast<long>(outputs[k].id));
    }
    top = std::max(top, outputs[k].id);
  }

  const std::vector<bool> dep = depends_on(g, top, wrt);
  // Interior wrt nodes act as inputs: their adjoint is kept, not propagated.
  std::vector<bool> terminal(top + 1, false);
  for (const Var& w : wrt)
    if (w.id <= top) terminal[w.id] = true;
  std::vector<std::optional<V>> adj(top + 1);
  auto accumulate = [&](NodeId id, V contribution) {
    if (adj[id]) {
      if constexpr (std::is_same_v<V, Tensor>) {
        axpy(*adj[id], 1.0, contribution);
      } else {
        adj[id] = add(*adj[id], contribution);
      }
    } else {
      adj[id] = std::move(contribution);
    }
  };
  for (std::size_t k = 0; k < outputs.size(); ++k)
    if (dep[outputs[k].id]) accumulate(outputs[k].id, seeds[k]);

  for (NodeId k = top + 1; k-- > 0;) {
    if (!adj[k] || !dep[k] || terminal[k] || is_leaf(g.node(k).op)) continue;
    const V gk = std::move(*adj[k]);
    adj[k].reset();
    const NodeId parents[2] = {g.node(k).parents[0], g.node(k).parents[1]};
    adjoint(b, k, gk, [&](int slot, V contribution) {
      const NodeId p = parents[slot];
      if (dep[p]) accumulate(p, std::move(contribution));
    });
  }

  std::vector<V> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id <= top && adj[w.id]) {
      result.push_back(*adj[w.id]);
    } else {
      result.push_back(b.constant(Tensor(w.shape())));
    }
  }
  return result;
}

}  // namespace

Var add(Var a, Var b) { return elementwise(Op::Add, a, b); }
Var sub(Var a, Var b) { return elementwise(Op::Sub, a, b); }
Var mul(Var a, Var b) { return elementwise(Op::Mul, a, b); }
Var div(Var a, Var b) { return elementwise(Op::Div, a, b); }
Var neg(Var a) { return unary(Op::Neg, a); }
Var scale(Var a, double c) { return unary(Op::Scale, a, c); }
Var matmul(Var a, Var b) { return binary(Op::Matmul, a, b); }
Var transpose(Var a) { return unary(Op::Transpose, a); }
Var reshape(Var a, const Shape& shape) { return unary(Op::Reshape, a, 0.0, shape); }
Var relu(Var a) { return unary(Op::Relu, a); }
Var step(Var a) { return unary(Op::Step, a); }
Var exp(Var a) { return unary(Op::Exp, a); }
Var log(Var a) { return unary(Op::Log, a); }
Var tanh(Var a) { return unary(Op::Tanh, a); }
Var sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Var power(Var a, double p) { return unary(Op::Power, a, p); }
Var sum_all(Var a) { return unary(Op::SumAll, a); }
Var mean_all(Var a) { return unary(Op::MeanAll, a); }
Var max_all(Var a) { return unary(Op::MaxAll, a); }
Var broadcast_scalar(Var a, const Shape& shape) { return unary(Op::BroadcastScalar, a, 0.0, shape); }
Var sum_rows(Var a) { return unary(Op::SumRows, a); }
Var broadcast_rows(Var a, std::size_t rows) { return unary(Op::BroadcastRows, a, 0.0, Shape{rows}); }
Var sum_cols(Var a) { return unary(Op::SumCols, a); }
Var broadcast_cols(Var a, std::size_t cols) { return unary(Op::BroadcastCols, a, 0.0, Shape{cols}); }
Var softmax_rows(Var a) { return unary(Op::SoftmaxRows, a); }

Var softmax_xent(Var logits, std::shared_ptr<const std::vector<int>> labels) {
  Node n{.op = Op::SoftmaxXent, .arity = 1, .parents = {logits.id, 0}, .labels = std::move(labels)};
  return logits.graph->append(std::move(n));
}

Var custom(Var a, std::shared_ptr<const CustomUnary> fn) {
  Node n{.op = Op::Custom, .arity = 1, .parents = {a.id, 0}, .custom = std::move(fn)};
  return a.graph->append(std::move(n));
}

TensorList vjp(std::span<const Var> outputs, std::span<const Tensor> seeds, std::span<const Var> wrt) {
  if (outputs.empty()) throw GraphError("vjp: no outputs");
  RawBuilder b{*outputs.front().graph};
  return backward(b, outputs, seeds, wrt);
}

Tensor vjp(Var output, const Tensor& seed, Var wrt) {
  return vjp(std::span<const Var>(&output, 1), std::span<const Tensor>(&seed, 1), std::span<const Var>(&wrt, 1))
      .front();
}

std::vector<Var> vjp_recorded(std::span<const Var> outputs, std::span<const Var> seeds, std::span<const Var> wrt) {
  if (outputs.empty()) throw GraphError("vjp: no outputs");
  RecordingBuilder b{*outputs.front().graph};
  return backward(b, outputs, seeds, wrt);
}

TensorList grad(Var output, std::span<const Var> wrt) {
  if (numel(output.shape()) != 1) {
    throw ShapeError("grad", fmt::format("output {} is not scalar", to_string(output.shape())),
                     static_cast<long>(output.id));
  }
  const Tensor seed(output.shape(), 1.0);
  return vjp(std::span<const Var>(&output, 1), std::span<const Tensor>(&seed, 1), wrt);
}

std::vector<Var> grad_recorded(Var output, std::span<const Var> wrt) {
  if (numel(output.shape()) != 1) {
    throw ShapeError("grad", fmt::format("output {} is not scalar", to_string(output.shape())),
                     static_cast<long>(output.id));
  }
  const Var seed = output.graph->constant(Tensor(output.shape(), 1.0));
  return vjp_recorded(std::span<const Var>(&output, 1), std::span<const Var>(&seed, 1), wrt);
}

}  // namespace onepass::ad
