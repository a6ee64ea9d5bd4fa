#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "onepass/autodiff/tensor.hpp"

namespace onepass::ad {

// The closed primitive set. Every non-leaf op has a first-order adjoint and a
// recordable adjoint built from these same ops, except Custom (see below).
enum class Op : std::uint8_t {
  Parameter,
  Constant,
  Placeholder,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,
  Matmul,
  Transpose,
  Reshape,
  Relu,
  Step,
  Exp,
  Log,
  Tanh,
  Sigmoid,
  Power,
  SumAll,
  MeanAll,
  MaxAll,
  BroadcastScalar,
  SumRows,
  BroadcastRows,
  SumCols,
  BroadcastCols,
  SoftmaxRows,
  SoftmaxXent,
  Custom,
};

std::string_view op_name(Op op);
bool is_leaf(Op op);

/// Elementwise function supplied by the caller. `derivative` may be empty, in
/// which case any gradient through the node fails. Custom nodes never support
/// recorded (second-order) differentiation.
struct CustomUnary {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

using NodeId = std::uint32_t;

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  NodeId id = 0;

  const Tensor& value() const;
  const Shape& shape() const;
};

struct Node {
  Op op;
  std::uint8_t arity = 0;
  NodeId parents[2] = {0, 0};
  Tensor value;
  double param = 0.0;
  Shape aux_shape;
  std::shared_ptr<const std::vector<int>> labels;
  std::shared_ptr<const CustomUnary> custom;
  bool bound = true;
  std::string name;
};

/// Append-only record of eagerly evaluated primitive operations. Nodes are
/// stored in creation order, so parents always precede children. Gradient
/// passes may append to the same graph (see vjp_recorded), which is how
/// second derivatives are obtained.
///
/// A graph is confined to one thread while it is being built or differentiated.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Differentiable leaf.
  Var parameter(Tensor value, std::string name = {});
  /// Non-differentiable leaf.
  Var constant(Tensor value);
  /// Differentiable leaf without a value; must be bound in forward().
  Var placeholder(Shape shape, std::string name = {});

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_[id]; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }

  /// Re-evaluates every node up to `output` with the given leaf bindings and
  /// returns the output value. Leaves not in `inputs` keep their recorded
  /// values; unbound placeholders raise GraphError. The graph is not modified.
  Tensor forward(const std::unordered_map<NodeId, Tensor>& inputs, Var output) const;

  // Node construction, used by the free functions in ops.hpp.
  Var append(Node node);

 private:
  std::deque<Node> nodes_;
};

}  // namespace onepass::ad
