#pragma once

#include <cmath>
#include <random>

#include "onepass/hypergrad/hypergrad.hpp"
#include "onepass/model/mlp.hpp"
#include "oracles.hpp"

namespace onepass::testing {

// Tiny regression MLP with every SGD hyperparameter live.
struct TinyMlp {
  model::MlpSpec spec;
  model::Batch train;
  model::Batch val;
  ad::TensorList w;
  update::SgdState state;
  update::HyperVector lambda;

  hypergrad::LossFn loss_on(const model::Batch& b) const {
    return [spec = spec, b](ad::Graph&, std::span<const ad::Var> w, const update::BoundHypers&) {
      return model::loss(spec, w, b, model::LossKind::mse);
    };
  }
};

inline TinyMlp tiny_mlp(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TinyMlp t;
  t.spec = model::MlpSpec{.input_dim = 3, .hidden_dims = {3}, .output_dim = 1, .init_seed = seed};
  t.train = {random_tensor(rng, {12, 3}), random_tensor(rng, {12, 1}), nullptr};
  t.val = {random_tensor(rng, {6, 3}), random_tensor(rng, {6, 1}), nullptr};
  t.w = model::init_weights(t.spec);
  // Random biases so no hidden unit sits exactly at a ReLU kink.
  for (auto& v : t.w[1].values()) v = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  t.state.velocity = ad::zeros_like(t.w);
  for (auto& b : t.state.velocity)
    for (auto& v : b.values()) v = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
  std::uniform_real_distribution<double> u(0, 1);
  t.lambda.add(std::string(update::kLr), update::Transform::log10, std::pow(10.0, -2 + u(rng)));
  t.lambda.add(std::string(update::kWd), update::Transform::log10, std::pow(10.0, -4 + 2 * u(rng)));
  t.lambda.add(std::string(update::kMomentum), update::Transform::inverse_sigmoid, 0.1 + 0.8 * u(rng));
  return t;
}

}  // namespace onepass::testing
