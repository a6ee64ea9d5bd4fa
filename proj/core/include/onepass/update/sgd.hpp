#pragma once

#include <span>
#include <vector>

#include "onepass/update/hyper.hpp"

namespace onepass::update {

/// Momentum buffers, one per weight tensor. Treated as constants inside
/// hypergradient graphs.
struct SgdState {
  ad::TensorList velocity;
};

SgdState zero_state(const ad::TensorList& weights);

struct SgdStep {
  ad::TensorList u;
  SgdState state;
  bool diverged = false;
};

/// buf' = m buf + g + wd w, u = lr * buf'. lr may hold one value or one per
/// parameter. Missing wd or momentum entries count as zero. The caller applies
/// w <- w - u.
SgdStep sgd_update(const HyperVector& lambda, const ad::TensorList& w, const SgdState& state,
                   const ad::TensorList& grad);

struct RecordedStep {
  std::vector<ad::Var> u;
  std::vector<ad::Var> velocity;
};

/// Same rule recorded into a graph, differentiable in the bound
/// hyperparameters, the weights and (when they are nodes) the buffers.
RecordedStep record_sgd_update(const BoundHypers& lambda, std::span<const ad::Var> w,
                               std::span<const ad::Var> velocity, std::span<const ad::Var> grad);

}  // namespace onepass::update
