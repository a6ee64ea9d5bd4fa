#include "onepass/update/sgd.hpp"

#include <optional>
#include <stdexcept>

namespace onepass::update {

SgdState zero_state(const ad::TensorList& weights) { return {ad::zeros_like(weights)}; }

SgdStep sgd_update(const HyperVector& lambda, const ad::TensorList& w, const SgdState& state,
                   const ad::TensorList& grad) {
  if (w.size() != grad.size() || w.size() != state.velocity.size()) {
    throw std::invalid_argument("sgd_update: weights, gradients and buffers differ in count");
  }
  const HyperEntry& lr = lambda.at(kLr);
  const bool per_parameter = lr.internal.size() > 1;
  if (per_parameter && lr.internal.size() != ad::total_size(w)) {
    throw std::invalid_argument("sgd_update: per-parameter learning rates do not match the weights");
  }
  const double wd = lambda.contains(kWd) ? lambda.natural(kWd) : 0.0;
  const double m = lambda.contains(kMomentum) ? lambda.natural(kMomentum) : 0.0;
  const double eta0 = lr.natural();

  SgdStep step;
  step.diverged = !ad::all_finite(grad);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (grad[k].shape() != w[k].shape()) throw ad::ShapeError("sgd_update", "gradient shape differs from weights");
    ad::Tensor buf(w[k].shape());
    ad::Tensor u(w[k].shape());
    for (std::size_t j = 0; j < w[k].size(); ++j) {
      buf[j] = (m * state.velocity[k][j] + grad[k][j]) + wd * w[k][j];
      const double eta = per_parameter ? lr.natural(offset + j) : eta0;
      u[j] = eta * buf[j];
    }
    offset += w[k].size();
    step.u.push_back(std::move(u));
    step.state.velocity.push_back(std::move(buf));
  }
  return step;
}

RecordedStep record_sgd_update(const BoundHypers& lambda, std::span<const ad::Var> w,
                               std::span<const ad::Var> velocity, std::span<const ad::Var> grad) {
  if (w.size() != grad.size() || w.size() != velocity.size()) {
    throw std::invalid_argument("record_sgd_update: weights, gradients and buffers differ in count");
  }
  const std::vector<ad::Var> lr = lambda.natural(kLr);
  if (lr.size() != 1 && lr.size() != w.size()) {
    throw std::invalid_argument("record_sgd_update: per-parameter learning rates do not match the weights");
  }
  std::optional<ad::Var> wd;
  std::optional<ad::Var> m;
  if (lambda.contains(kWd)) wd = lambda.natural(kWd).front();
  if (lambda.contains(kMomentum)) m = lambda.natural(kMomentum).front();

  RecordedStep step;
  for (std::size_t k = 0; k < w.size(); ++k) {
    ad::Var buf = m ? ad::add(ad::mul(*m, velocity[k]), grad[k]) : grad[k];
    if (wd) buf = ad::add(buf, ad::mul(*wd, w[k]));
    step.u.push_back(ad::mul(lr.size() == 1 ? lr.front() : lr[k], buf));
    step.velocity.push_back(buf);
  }
  return step;
}

}  // namespace onepass::update
