#include <cmath>

#include <gtest/gtest.h>

#include "onepass/autodiff/gradcheck.hpp"
#include "onepass/model/mlp.hpp"
#include "oracles.hpp"

namespace onepass::model {
namespace {

Batch regression_batch(ad::Tensor X, ad::Tensor y) { return Batch{std::move(X), std::move(y), nullptr}; }

TEST(Mlp, ParameterCount) {
  const MlpSpec spec{.input_dim = 1, .hidden_dims = {50}, .output_dim = 1};
  EXPECT_EQ(spec.parameter_count(), 151u);
  EXPECT_EQ(ad::total_size(init_weights(spec)), 151u);
}

TEST(Mlp, InitIsDeterministic) {
  const MlpSpec spec{.input_dim = 8, .hidden_dims = {50}, .output_dim = 1, .init_seed = 42};
  EXPECT_EQ(init_weights(spec), init_weights(spec));
  MlpSpec other = spec;
  other.init_seed = 43;
  EXPECT_NE(init_weights(spec), init_weights(other));
}

TEST(Mlp, InitBounds) {
  const MlpSpec spec{.input_dim = 8, .hidden_dims = {50}, .output_dim = 1, .init_seed = 3};
  const ad::TensorList w = init_weights(spec);
  const double bound = 1.0 / std::sqrt(8.0);
  for (double v : w[0].values()) EXPECT_LE(std::abs(v), bound);
  for (double v : w[1].values()) EXPECT_EQ(v, 0.0);
  for (double v : w[2].values()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(50.0));
}

TEST(Mlp, ZeroDimensionRejected) {
  const MlpSpec spec{.input_dim = 0, .hidden_dims = {4}, .output_dim = 1};
  EXPECT_THROW(init_weights(spec), std::invalid_argument);
}

TEST(Loss, ZeroNetworkZeroTargets) {
  const MlpSpec spec{.input_dim = 3, .hidden_dims = {4}, .output_dim = 1};
  ad::TensorList w = ad::zeros_like(init_weights(spec));
  const Batch b = regression_batch(ad::Tensor::matrix({{1, 2, 3}, {4, 5, 6}}), ad::Tensor(ad::Shape{2, 1}));
  EXPECT_EQ(evaluate_loss(spec, w, b, LossKind::mse), 0.0);
}

TEST(Loss, UniformLogitsCrossEntropy) {
  const MlpSpec spec{.input_dim = 2, .hidden_dims = {3}, .output_dim = 10};
  ad::TensorList w = ad::zeros_like(init_weights(spec));
  Batch b{ad::Tensor::matrix({{1, 2}, {3, 4}}), {}, std::make_shared<const std::vector<int>>(std::vector<int>{3, 7})};
  EXPECT_NEAR(evaluate_loss(spec, w, b, LossKind::cross_entropy), std::log(10.0), 1e-12);
}

TEST(Loss, HandComputedTinyNetwork) {
  // h = relu(2x - 1), out = 3h + 0.5; x = [1, 0.25] -> out = [3.5, 0.5];
  // targets [3, 1] -> residuals [0.5, -0.5] -> MSE 0.25.
  const MlpSpec spec{.input_dim = 1, .hidden_dims = {1}, .output_dim = 1};
  const ad::TensorList w{ad::Tensor::matrix({{2}}), ad::Tensor::vector({-1}), ad::Tensor::matrix({{3}}),
                         ad::Tensor::vector({0.5})};
  const Batch b = regression_batch(ad::Tensor::matrix({{1}, {0.25}}), ad::Tensor::matrix({{3}, {1}}));
  EXPECT_DOUBLE_EQ(evaluate_loss(spec, w, b, LossKind::mse), 0.25);
}

TEST(Loss, MseZeroIffExact) {
  const MlpSpec spec{.input_dim = 2, .hidden_dims = {3}, .output_dim = 1, .init_seed = 5};
  const ad::TensorList w = init_weights(spec);
  const ad::Tensor X = ad::Tensor::matrix({{0.3, -1}, {2, 0.5}, {-0.7, 0.1}});
  ad::Tensor y = predict(spec, w, X);
  EXPECT_EQ(evaluate_loss(spec, w, regression_batch(X, y), LossKind::mse), 0.0);
  y[1] += 1e-6;
  EXPECT_GT(evaluate_loss(spec, w, regression_batch(X, y), LossKind::mse), 0.0);
}

TEST(Loss, CrossEntropyShiftInvariant) {
  // Shifting the output bias by a constant shifts every logit equally.
  const MlpSpec spec{.input_dim = 2, .hidden_dims = {3}, .output_dim = 4, .init_seed = 8};
  ad::TensorList w = init_weights(spec);
  Batch b{ad::Tensor::matrix({{1, 2}, {-3, 0.5}, {0.2, 0.2}}), {},
          std::make_shared<const std::vector<int>>(std::vector<int>{0, 3, 1})};
  const double before = evaluate_loss(spec, w, b, LossKind::cross_entropy);
  EXPECT_GT(before, 0.0);
  for (auto& v : w[3].values()) v += 17.25;
  EXPECT_NEAR(evaluate_loss(spec, w, b, LossKind::cross_entropy), before, 1e-10);
}

TEST(Loss, DimensionMismatch) {
  const MlpSpec spec{.input_dim = 3, .hidden_dims = {2}, .output_dim = 1};
  const ad::TensorList w = init_weights(spec);
  EXPECT_THROW(evaluate_loss(spec, w, regression_batch(ad::Tensor::matrix({{1, 2}}), ad::Tensor::matrix({{1}})),
                             LossKind::mse),
               ad::ShapeError);
  EXPECT_THROW(evaluate_loss(spec, w, regression_batch(ad::Tensor::matrix({{1, 2, 3}}), ad::Tensor::matrix({{1, 2}})),
                             LossKind::mse),
               ad::ShapeError);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  const MlpSpec spec{.input_dim = 3, .hidden_dims = {4}, .output_dim = 2, .init_seed = 13};
  std::mt19937_64 rng(1);
  const Batch b = regression_batch(testing::random_tensor(rng, {5, 3}), testing::random_tensor(rng, {5, 2}));
  RecordedLoss r = record_loss(spec, init_weights(spec), b, LossKind::mse);
  const ad::TensorList g = ad::grad(r.value, r.weights);
  for (std::size_t k = 0; k < g.size(); ++k) {
    Eigen::MatrixXd J = testing::fd_jacobian(*r.graph, r.value, r.weights[k], 1e-5);
    EXPECT_LT(ad::relative_error(g[k].values(), std::vector<double>(J.data(), J.data() + J.size())), 1e-6);
  }
}

}  // namespace
}  // namespace onepass::model
