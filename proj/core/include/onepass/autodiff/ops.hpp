#pragma once

#include <span>
#include <vector>

#include "onepass/autodiff/graph.hpp"

namespace onepass::ad {

// Recording operations. Each evaluates eagerly and appends one node (more when
// broadcasting is inserted). The arithmetic operators broadcast a scalar
// operand, or a length-c vector against an (r, c) matrix (bias pattern).

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, const Shape& shape);
Var relu(Var a);
/// Heaviside step (0 at the origin). Treated as locally constant.
Var step(Var a);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var power(Var a, double p);
Var sum_all(Var a);
Var mean_all(Var a);
Var max_all(Var a);
Var broadcast_scalar(Var a, const Shape& shape);
Var sum_rows(Var a);
Var broadcast_rows(Var a, std::size_t rows);
Var sum_cols(Var a);
Var broadcast_cols(Var a, std::size_t cols);
Var softmax_rows(Var a);
/// Mean over rows of -log softmax(logits)[label]; fused for stability.
Var softmax_xent(Var logits, std::shared_ptr<const std::vector<int>> labels);
Var custom(Var a, std::shared_ptr<const CustomUnary> fn);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }

// Differentiation. All routines leave the recorded part of the graph intact,
// so they can be called repeatedly on the same graph.

/// seed^T d(outputs)/d(x) for every node x in `wrt`, as plain tensors.
/// Nodes the outputs do not depend on get zero tensors. A wrt node may be an
/// interior node; it is then treated as an input, and paths from its own
/// ancestors are not followed through it. Constants are rejected.
TensorList vjp(std::span<const Var> outputs, std::span<const Tensor> seeds, std::span<const Var> wrt);
Tensor vjp(Var output, const Tensor& seed, Var wrt);

/// As vjp, but the backward pass is recorded into the graph and the results
/// are nodes, differentiable with respect to the original leaves.
std::vector<Var> vjp_recorded(std::span<const Var> outputs, std::span<const Var> seeds, std::span<const Var> wrt);

/// Gradient of a scalar output (vjp with unit seed).
TensorList grad(Var output, std::span<const Var> wrt);
std::vector<Var> grad_recorded(Var output, std::span<const Var> wrt);

}  // namespace onepass::ad
