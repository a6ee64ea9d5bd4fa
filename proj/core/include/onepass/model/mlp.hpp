#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "onepass/autodiff/ops.hpp"

namespace onepass::model {

enum class Activation { relu };
enum class LossKind { mse, cross_entropy };

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  Activation activation = Activation::relu;
  std::uint64_t init_seed = 0;

  /// Sum of (fan_in + 1) * fan_out over layers.
  std::size_t parameter_count() const;
  /// Throws std::invalid_argument on a zero dimension.
  void validate() const;
  /// Layer sizes including input and output.
  std::vector<std::size_t> layer_sizes() const;
};

/// Inputs plus targets. Regression targets are an (N, output_dim) matrix;
/// classification targets are class indices.
struct Batch {
  ad::Tensor X;
  ad::Tensor y;
  std::shared_ptr<const std::vector<int>> labels;

  std::size_t rows() const { return X.rows(); }
};

/// [W1, b1, W2, b2, ...]; W is (fan_in, fan_out) drawn uniform in
/// +-1/sqrt(fan_in), b is zero.
ad::TensorList init_weights(const MlpSpec& spec);

/// Network output (predictions or logits) for X, recorded in X's graph.
ad::Var forward(const MlpSpec& spec, std::span<const ad::Var> weights, ad::Var X);

/// Scalar loss recorded into the weights' graph.
ad::Var loss(const MlpSpec& spec, std::span<const ad::Var> weights, const Batch& batch, LossKind kind);

/// Loss recorded into a fresh graph with the weights as parameters.
struct RecordedLoss {
  std::unique_ptr<ad::Graph> graph;
  std::vector<ad::Var> weights;
  ad::Var value;
};
RecordedLoss record_loss(const MlpSpec& spec, const ad::TensorList& weights, const Batch& batch, LossKind kind);

/// Loss value without keeping a graph around.
double evaluate_loss(const MlpSpec& spec, const ad::TensorList& weights, const Batch& batch, LossKind kind);

/// Loss value and gradient with respect to the weights.
struct LossAndGrad {
  double loss = 0.0;
  ad::TensorList grad;
};
LossAndGrad loss_and_grad(const MlpSpec& spec, const ad::TensorList& weights, const Batch& batch, LossKind kind);

/// Plain-tensor predictions.
ad::Tensor predict(const MlpSpec& spec, const ad::TensorList& weights, const ad::Tensor& X);

}  // namespace onepass::model
