#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "onepass/autodiff/ops.hpp"

namespace onepass::ad {

/// One primitive under test: builds its output from freshly created parameter
/// leaves. Inputs are sampled away from non-smooth points.
struct PrimitiveCase {
  std::string name;
  std::vector<Tensor> inputs;
  std::function<Var(Graph&, const std::vector<Var>&)> build;
  /// Skip the second-order check (primitives without a recorded adjoint).
  bool first_order_only = false;
};

struct PrimitiveReport {
  std::string name;
  double first_order_error = 0.0;   ///< max-norm relative error vs central differences
  double second_order_error = 0.0;  ///< Hessian-vector product vs differenced gradients
  bool passed = false;
  std::string failure;
};

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  std::uint64_t seed = 20240601;
};

/// One case per registered primitive, with deterministic random inputs.
std::vector<PrimitiveCase> builtin_cases(std::uint64_t seed);

/// Case for a caller-supplied elementwise primitive.
PrimitiveCase custom_case(std::shared_ptr<const CustomUnary> fn, std::uint64_t seed);

/// Compares graph gradients with central differences of Graph::forward, and
/// recorded-gradient Hessian-vector products with differenced gradients.
PrimitiveReport check_case(const PrimitiveCase& c, const GradcheckOptions& opts);

std::vector<PrimitiveReport> run_gradcheck(const std::vector<PrimitiveCase>& cases, const GradcheckOptions& opts);

/// ||a - b||_inf / max(||b||_inf, tiny).
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace onepass::ad
