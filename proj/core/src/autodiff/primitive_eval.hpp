#pragma once

#include <fmt/format.h>

#include "onepass/autodiff/graph.hpp"

namespace onepass::ad::detail {

// Forward rule for a single non-leaf node given its parent values. Shared by
// eager construction and Graph::forward so both paths compute identical bits.
inline Tensor evaluate_unchecked(const Node& n, const Tensor* a, const Tensor* b) {
  switch (n.op) {
    case Op::Add: return add(*a, *b);
    case Op::Sub: return sub(*a, *b);
    case Op::Mul: return mul(*a, *b);
    case Op::Div: return div(*a, *b);
    case Op::Neg: return neg(*a);
    case Op::Scale: return scale(*a, n.param);
    case Op::Matmul: return matmul(*a, *b);
    case Op::Transpose: return transpose(*a);
    case Op::Reshape: return reshape(*a, n.aux_shape);
    case Op::Relu: return relu(*a);
    case Op::Step: return step(*a);
    case Op::Exp: return exp(*a);
    case Op::Log: return log(*a);
    case Op::Tanh: return tanh(*a);
    case Op::Sigmoid: return sigmoid(*a);
    case Op::Power: return power(*a, n.param);
    case Op::SumAll: return sum_all(*a);
    case Op::MeanAll: return mean_all(*a);
    case Op::MaxAll: return max_all(*a);
    case Op::BroadcastScalar: return broadcast_scalar(*a, n.aux_shape);
    case Op::SumRows: return sum_rows(*a);
    case Op::BroadcastRows: return broadcast_rows(*a, n.aux_shape.at(0));
    case Op::SumCols: return sum_cols(*a);
    case Op::BroadcastCols: return broadcast_cols(*a, n.aux_shape.at(0));
    case Op::SoftmaxRows: return softmax_rows(*a);
    case Op::SoftmaxXent: return softmax_xent(*a, *n.labels);
    case Op::Custom: {
      Tensor out(a->shape());
      for (std::size_t i = 0; i < a->size(); ++i) out[i] = n.custom->value((*a)[i]);
      return out;
    }
    case Op::Parameter:
    case Op::Constant:
    case Op::Placeholder: break;
  }
  throw GraphError("evaluate: leaf has no forward rule");
}

inline Tensor evaluate(const Node& n, const Tensor* a, const Tensor* b, long id) {
  try {
    return evaluate_unchecked(n, a, b);
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(op_name(n.op)), e.detail(), id);
  }
}

}  // namespace onepass::ad::detail
