#include "onepass/model/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace onepass::model {

std::vector<std::size_t> MlpSpec::layer_sizes() const {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), hidden_dims.begin(), hidden_dims.end());
  sizes.push_back(output_dim);
  return sizes;
}

std::size_t MlpSpec::parameter_count() const {
  const auto sizes = layer_sizes();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += (sizes[l] + 1) * sizes[l + 1];
  return n;
}

void MlpSpec::validate() const {
  for (std::size_t d : layer_sizes())
    if (d == 0) throw std::invalid_argument("mlp: every layer dimension must be >= 1");
}

ad::TensorList init_weights(const MlpSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.init_seed);
  const auto sizes = spec.layer_sizes();
  ad::TensorList weights;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    ad::Tensor W(ad::Shape{sizes[l], sizes[l + 1]});
    for (auto& v : W.values()) v = u(rng);
    weights.push_back(std::move(W));
    weights.emplace_back(ad::Shape{sizes[l + 1]});
  }
  return weights;
}

ad::Var forward(const MlpSpec& spec, std::span<const ad::Var> weights, ad::Var X) {
  const std::size_t layers = spec.hidden_dims.size() + 1;
  if (weights.size() != 2 * layers) {
    throw std::invalid_argument(fmt::format("mlp: expected {} weight tensors, got {}", 2 * layers, weights.size()));
  }
  if (X.shape().size() != 2 || X.shape()[1] != spec.input_dim) {
    throw ad::ShapeError("mlp", fmt::format("input {} does not have {} columns", ad::to_string(X.shape()),
                                            spec.input_dim));
  }
  ad::Var h = X;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::matmul(h, weights[2 * l]) + weights[2 * l + 1];
    if (l + 1 < layers) h = ad::relu(h);
  }
  return h;
}

ad::Var loss(const MlpSpec& spec, std::span<const ad::Var> weights, const Batch& batch, LossKind kind) {
  ad::Graph& g = *weights.front().graph;
  const ad::Var out = forward(spec, weights, g.constant(batch.X));
  switch (kind) {
    case LossKind::mse: {
      if (batch.y.shape() != out.shape()) {
        throw ad::ShapeError("mse", fmt::format("targets {} vs predictions {}", ad::to_string(batch.y.shape()),
                                                ad::to_string(out.shape())));
      }
      const ad::Var r = out - g.constant(batch.y);
      return ad::mean_all(r * r);
    }
    case LossKind::cross_entropy: {
      if (spec.output_dim < 2) throw std::invalid_argument("cross_entropy needs at least 2 classes");
      if (!batch.labels || batch.labels->size() != batch.rows()) {
        throw ad::ShapeError("cross_entropy", "one label per row is required");
      }
      return ad::softmax_xent(out, batch.labels);
    }
  }
  throw std::invalid_argument("unknown loss kind");
}

RecordedLoss record_loss(const MlpSpec& spec, const ad::TensorList& weights, const Batch& batch, LossKind kind) {
  RecordedLoss r{std::make_unique<ad::Graph>()};
  for (const auto& w : weights) r.weights.push_back(r.graph->parameter(w));
  r.value = loss(spec, r.weights, batch, kind);
  return r;
}

double evaluate_loss(const MlpSpec& spec, const ad::TensorList& weights, const Batch& batch, LossKind kind) {
  return record_loss(spec, weights, batch, kind).value.value().item();
}

LossAndGrad loss_and_grad(const MlpSpec& spec, const ad::TensorList& weights, const Batch& batch, LossKind kind) {
  RecordedLoss r = record_loss(spec, weights, batch, kind);
  return {r.value.value().item(), ad::grad(r.value, r.weights)};
}

ad::Tensor predict(const MlpSpec& spec, const ad::TensorList& weights, const ad::Tensor& X) {
  ad::Graph g;
  std::vector<ad::Var> w;
  for (const auto& t : weights) w.push_back(g.constant(t));
  return forward(spec, w, g.constant(X)).value();
}

}  // namespace onepass::model
