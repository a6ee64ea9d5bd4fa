#pragma once

#include <span>
#include <vector>

#include "onepass/update/hyper.hpp"

namespace onepass::update {

struct AdamConfig {
  double kappa = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed number of hyperparameter components.
class MetaOptimiser {
 public:
  explicit MetaOptimiser(std::size_t n, AdamConfig config = {});

  /// One bias-corrected Adam step on `params` in place.
  void step(std::span<double> params, std::span<const double> grad);

  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

/// Applies Adam to the optimisable entries (hypergrad holds one value per
/// optimisable component), then clips the learning rate unless `clip` is
/// off. Returns false and leaves lambda untouched when the hypergradient is
/// not finite.
bool meta_step(MetaOptimiser& opt, HyperVector& lambda, std::span<const double> hypergrad, bool clip = true);

}  // namespace onepass::update
