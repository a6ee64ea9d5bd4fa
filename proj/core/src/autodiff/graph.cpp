#include "onepass/autodiff/graph.hpp"

#include <fmt/format.h>

#include "onepass/autodiff/ops.hpp"
#include "primitive_eval.hpp"

namespace onepass::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Parameter: return "parameter";
    case Op::Constant: return "constant";
    case Op::Placeholder: return "placeholder";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::Matmul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Reshape: return "reshape";
    case Op::Relu: return "relu";
    case Op::Step: return "step";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Power: return "power";
    case Op::SumAll: return "sum";
    case Op::MeanAll: return "mean";
    case Op::MaxAll: return "max";
    case Op::BroadcastScalar: return "broadcast_scalar";
    case Op::SumRows: return "sum_rows";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::SumCols: return "sum_cols";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::SoftmaxXent: return "softmax_xent";
    case Op::Custom: return "custom";
  }
  return "unknown";
}

bool is_leaf(Op op) { return op == Op::Parameter || op == Op::Constant || op == Op::Placeholder; }

const Tensor& Var::value() const { return graph->value(*this); }
const Shape& Var::shape() const { return graph->value(*this).shape(); }

Var Graph::parameter(Tensor value, std::string name) {
  Node n{.op = Op::Parameter, .value = std::move(value), .name = std::move(name)};
  return append(std::move(n));
}

Var Graph::constant(Tensor value) {
  Node n{.op = Op::Constant, .value = std::move(value)};
  return append(std::move(n));
}

Var Graph::placeholder(Shape shape, std::string name) {
  Node n{.op = Op::Placeholder, .value = Tensor(std::move(shape)), .bound = false, .name = std::move(name)};
  return append(std::move(n));
}

Var Graph::append(Node node) {
  const auto id = static_cast<NodeId>(nodes_.size());
  if (!is_leaf(node.op)) {
    const Tensor* a = node.arity > 0 ? &nodes_[node.parents[0]].value : nullptr;
    const Tensor* b = node.arity > 1 ? &nodes_[node.parents[1]].value : nullptr;
    node.value = detail::evaluate(node, a, b, static_cast<long>(id));
  }
  nodes_.push_back(std::move(node));
  return Var{this, id};
}

Tensor Graph::forward(const std::unordered_map<NodeId, Tensor>& inputs, Var output) const {
  if (output.graph != this || output.id >= nodes_.size()) throw GraphError("forward: output node not in this graph");
  std::vector<bool> needed(output.id + 1, false);
  needed[output.id] = true;
  for (NodeId k = output.id + 1; k-- > 0;) {
    if (!needed[k]) continue;
    const Node& n = nodes_[k];
    for (int p = 0; p < n.arity; ++p) needed[n.parents[p]] = true;
  }
  std::vector<Tensor> values(output.id + 1);
  for (NodeId k = 0; k <= output.id; ++k) {
    if (!needed[k]) continue;
    const Node& n = nodes_[k];
    if (is_leaf(n.op)) {
      if (auto it = inputs.find(k); it != inputs.end()) {
        if (it->second.shape() != n.value.shape()) {
          throw ShapeError(std::string(op_name(n.op)),
                           fmt::format("bound {} to leaf of shape {}", to_string(it->second.shape()),
                                       to_string(n.value.shape())),
                           static_cast<long>(k));
        }
        values[k] = it->second;
      } else if (!n.bound) {
        throw GraphError(fmt::format("forward: placeholder node {} ('{}') is unbound", k, n.name));
      } else {
        values[k] = n.value;
      }
      continue;
    }
    const Tensor* a = n.arity > 0 ? &values[n.parents[0]] : nullptr;
    const Tensor* b = n.arity > 1 ? &values[n.parents[1]] : nullptr;
    values[k] = detail::evaluate(n, a, b, static_cast<long>(k));
  }
  return std::move(values[output.id]);
}

}  // namespace onepass::ad
