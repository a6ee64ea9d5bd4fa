#include "onepass/update/meta.hpp"

#include <cmath>
#include <stdexcept>

namespace onepass::update {

MetaOptimiser::MetaOptimiser(std::size_t n, AdamConfig config) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

void MetaOptimiser::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("MetaOptimiser::step: size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * grad[k];
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * grad[k] * grad[k];
    params[k] -= config_.kappa * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + config_.eps);
  }
}

bool meta_step(MetaOptimiser& opt, HyperVector& lambda, std::span<const double> hypergrad, bool clip) {
  if (hypergrad.size() != lambda.optimisable_size()) {
    throw std::invalid_argument("meta_step: hypergradient length differs from the optimisable count");
  }
  for (double g : hypergrad)
    if (!std::isfinite(g)) return false;

  std::vector<double> flat = lambda.flat_internal();
  const std::vector<bool> mask = lambda.flat_mask();
  std::vector<double> params;
  params.reserve(hypergrad.size());
  for (std::size_t k = 0; k < flat.size(); ++k)
    if (mask[k]) params.push_back(flat[k]);
  opt.step(params, hypergrad);
  std::size_t j = 0;
  for (std::size_t k = 0; k < flat.size(); ++k)
    if (mask[k]) flat[k] = params[j++];
  lambda.set_flat_internal(flat);
  if (clip) lambda = clip_lr(std::move(lambda));
  return true;
}

}  // namespace onepass::update
