#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "onepass/autodiff/gradcheck.hpp"
#include "onepass/autodiff/ops.hpp"
#include "oracles.hpp"

namespace onepass::ad {
namespace {

using testing::fd_jacobian;
using testing::random_tensor;

TEST(Forward, Polynomial) {
  Graph g;
  Var w = g.parameter(Tensor::scalar(3.0));
  EXPECT_DOUBLE_EQ(mul(w, w).value().item(), 9.0);
}

TEST(Forward, ReluClampsNegative) {
  Graph g;
  Var w = g.parameter(Tensor::scalar(-2.0));
  EXPECT_DOUBLE_EQ(relu(w).value().item(), 0.0);
}

TEST(Forward, MatrixVector) {
  Graph g;
  Var W = g.parameter(Tensor::matrix({{1, 2}, {3, 4}}));
  Var x = g.parameter(Tensor::vector({1, 1}));
  Var y = matmul(W, x);
  EXPECT_EQ(y.value(), Tensor::vector({3, 7}));
}

TEST(Forward, ReplayWithNewBindings) {
  Graph g;
  Var w = g.parameter(Tensor::scalar(3.0));
  Var y = mul(w, w);
  EXPECT_DOUBLE_EQ(g.forward({{w.id, Tensor::scalar(5.0)}}, y).item(), 25.0);
  // Recorded values are untouched by replay.
  EXPECT_DOUBLE_EQ(y.value().item(), 9.0);
}

TEST(Forward, UnboundPlaceholderIsAnError) {
  Graph g;
  Var x = g.placeholder({2}, "x");
  Var y = sum_all(x);
  EXPECT_THROW(g.forward({}, y), GraphError);
  EXPECT_DOUBLE_EQ(g.forward({{x.id, Tensor::vector({1, 2})}}, y).item(), 3.0);
}

TEST(Forward, ShapeMismatchNamesNode) {
  Graph g;
  Var a = g.parameter(Tensor::matrix({{1, 2}, {3, 4}}));
  Var b = g.parameter(Tensor::vector({1, 2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.op(), "matmul");
    EXPECT_EQ(e.node(), 2);
  }
  Var x = g.placeholder({2});
  Var y = matmul(a, x);
  EXPECT_THROW(g.forward({{x.id, Tensor::vector({1, 2, 3})}}, y), ShapeError);
}

TEST(Vjp, LinearMap) {
  Graph g;
  Var A = g.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  Var w = g.parameter(Tensor::vector({0.5, -1.0}));
  Var u = matmul(A, w);
  EXPECT_EQ(vjp(u, Tensor::vector({1, 1}), w), Tensor::vector({4, 6}));
}

TEST(Vjp, HessianDiagonalThroughRecordedGradient) {
  // L(w) = (w1^2 + 2 w2^2) / 2 has Hessian diag(1, 2).
  Graph g;
  Var w = g.parameter(Tensor::vector({0.7, -0.3}));
  Var coeff = g.constant(Tensor::vector({0.5, 1.0}));
  Var L = sum_all(mul(coeff, mul(w, w)));
  std::vector<Var> wrt{w};
  auto gw = grad_recorded(L, wrt);
  Tensor hv = vjp(gw[0], Tensor::vector({1, 1}), w);
  EXPECT_NEAR(hv[0], 1.0, 1e-15);
  EXPECT_NEAR(hv[1], 2.0, 1e-15);
}

TEST(Vjp, SeedShapeMustMatchOutput) {
  Graph g;
  Var w = g.parameter(Tensor::vector({1, 2}));
  Var y = scale(w, 2.0);
  EXPECT_THROW(vjp(y, Tensor::vector({1, 1, 1}), w), ShapeError);
}

TEST(Vjp, ConstantsAreNotDifferentiable) {
  Graph g;
  Var c = g.constant(Tensor::scalar(1.0));
  Var y = mul(c, c);
  EXPECT_THROW(vjp(y, Tensor::scalar(1.0), c), GraphError);
}

TEST(Vjp, UnreachableLeafGetsZeros) {
  Graph g;
  Var a = g.parameter(Tensor::vector({1, 2}));
  Var b = g.parameter(Tensor::vector({3, 4, 5}));
  Var y = sum_all(a);
  std::vector<Var> wrt{a, b};
  TensorList gr = grad(y, wrt);
  EXPECT_EQ(gr[1], Tensor(Shape{3}));
}

TEST(Vjp, InteriorNodeIsTreatedAsInput) {
  // y = 3 * z with z = x * x: dy/dz = 3 regardless of how z was formed, and
  // nothing flows on to x when only z is requested.
  Graph g;
  Var x = g.parameter(Tensor::vector({2.0, -1.0}));
  Var z = mul(x, x);
  Var y = sum_all(scale(z, 3.0));
  std::vector<Var> wrt{z, x};
  const TensorList both = grad(y, wrt);
  EXPECT_EQ(both[0], Tensor::vector({3.0, 3.0}));
  // x is reached only through z, which is terminal.
  EXPECT_EQ(both[1], Tensor::vector({0.0, 0.0}));
  std::vector<Var> only_x{x};
  EXPECT_EQ(grad(y, only_x)[0], Tensor::vector({12.0, -6.0}));
}

TEST(Vjp, MissingAdjointIsAnError) {
  auto opaque = std::make_shared<const CustomUnary>(CustomUnary{"opaque", [](double x) { return x * x; }, nullptr});
  Graph g;
  Var w = g.parameter(Tensor::vector({1.0, 2.0}));
  Var y = sum_all(custom(w, opaque));
  std::vector<Var> wrt{w};
  EXPECT_THROW(grad(y, wrt), GraphError);
}

TEST(Vjp, SecondOrderThroughFirstOrderOnlyPrimitiveIsAnError) {
  auto square = std::make_shared<const CustomUnary>(
      CustomUnary{"square", [](double x) { return x * x; }, [](double x) { return 2 * x; }});
  Graph g;
  Var w = g.parameter(Tensor::vector({1.0, 2.0}));
  Var y = sum_all(custom(w, square));
  std::vector<Var> wrt{w};
  EXPECT_EQ(grad(y, wrt)[0], Tensor::vector({2.0, 4.0}));
  EXPECT_THROW(grad_recorded(y, wrt), GraphError);
}

TEST(Grad, Scalar) {
  Graph g;
  Var w = g.parameter(Tensor::scalar(3.0));
  std::vector<Var> wrt{w};
  EXPECT_DOUBLE_EQ(grad(mul(w, w), wrt)[0].item(), 6.0);
}

TEST(Grad, HalfSquaredNorm) {
  Graph g;
  Var w = g.parameter(Tensor::vector({1, -2}));
  std::vector<Var> wrt{w};
  EXPECT_EQ(grad(scale(sum_all(mul(w, w)), 0.5), wrt)[0], Tensor::vector({1, -2}));
}

TEST(Grad, NonScalarOutputIsAnError) {
  Graph g;
  Var w = g.parameter(Tensor::vector({1, -2}));
  std::vector<Var> wrt{w};
  EXPECT_THROW(grad(w + w, wrt), ShapeError);
}

TEST(Grad, MlpMseMatchesCentralDifferences) {
  // 2 hidden units, 3 samples, tanh hidden layer.
  std::mt19937_64 rng(7);
  Graph g;
  Var X = g.constant(random_tensor(rng, {3, 2}));
  Var y = g.constant(random_tensor(rng, {3, 1}));
  Var W1 = g.parameter(random_tensor(rng, {2, 2}));
  Var b1 = g.parameter(random_tensor(rng, {2}));
  Var W2 = g.parameter(random_tensor(rng, {2, 1}));
  Var b2 = g.parameter(random_tensor(rng, {1}));
  Var h = tanh(matmul(X, W1) + b1);
  Var r = matmul(h, W2) + b2 - y;
  Var L = mean_all(mul(r, r));
  std::vector<Var> wrt{W1, b1, W2, b2};
  TensorList gr = grad(L, wrt);
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    Eigen::MatrixXd J = fd_jacobian(g, L, wrt[k], 1e-5);
    std::vector<double> fd(J.data(), J.data() + J.size());
    EXPECT_LT(relative_error(gr[k].values(), fd), 1e-6) << "leaf " << k;
  }
}

TEST(Vjp, ThreeLayerMlpAgreesWithDenseJacobian) {
  // 2-2-2-2 network without biases: 12 weights.
  std::mt19937_64 rng(11);
  Graph g;
  Var x = g.constant(random_tensor(rng, {2}));
  std::vector<double> flat(12);
  for (auto& v : flat) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  Var theta = g.parameter(Tensor::vector(flat));
  auto layer = [&](std::size_t offset) {
    Tensor sel(Shape{12, 4});
    for (std::size_t i = 0; i < 4; ++i) sel.at(offset + i, i) = 1.0;
    return reshape(matmul(theta, g.constant(sel)), {2, 2});
  };
  Var h1 = tanh(matmul(layer(0), x));
  Var h2 = tanh(matmul(layer(4), h1));
  Var out = matmul(layer(8), h2);

  const Eigen::MatrixXd J = fd_jacobian(g, out, theta, 1e-6);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor seed = random_tensor(rng, {2});
    Tensor v = vjp(out, seed, theta);
    Eigen::VectorXd expected = J.transpose() * testing::to_eigen(seed.values());
    for (int i = 0; i < 12; ++i) EXPECT_NEAR(v[i], expected(i), 1e-9);
  }
}

TEST(Properties, VjpIsLinearInSeed) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    Var X = g.constant(random_tensor(rng, {4, 3}));
    Var W = g.parameter(random_tensor(rng, {3, 2}));
    Var b = g.parameter(random_tensor(rng, {2}));
    Var out = sigmoid(matmul(X, W) + b);
    Tensor v1 = random_tensor(rng, {4, 2});
    Tensor v2 = random_tensor(rng, {4, 2});
    const double alpha = 1.7;
    const double beta = -0.4;
    Tensor combo = add(scale(v1, alpha), scale(v2, beta));
    std::vector<Var> wrt{W, b};
    std::vector<Var> outs{out};
    TensorList g1 = vjp(outs, std::vector<Tensor>{v1}, wrt);
    TensorList g2 = vjp(outs, std::vector<Tensor>{v2}, wrt);
    TensorList gc = vjp(outs, std::vector<Tensor>{combo}, wrt);
    for (std::size_t k = 0; k < wrt.size(); ++k)
      for (std::size_t i = 0; i < gc[k].size(); ++i)
        EXPECT_NEAR(gc[k][i], alpha * g1[k][i] + beta * g2[k][i], 1e-12);
  }
}

TEST(Properties, SecondOrderQuadraticFormGivesExactHvp) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6;
    Eigen::MatrixXd M = Eigen::MatrixXd::Random(n, n);
    Eigen::MatrixXd A = M + M.transpose();
    Graph g;
    Var Av = g.constant(testing::to_tensor(A));
    Var w = g.parameter(random_tensor(rng, {static_cast<std::size_t>(n)}));
    Var L = scale(matmul(w, matmul(Av, w)), 0.5);
    std::vector<Var> wrt{w};
    auto gw = grad_recorded(L, wrt);
    Tensor v = random_tensor(rng, {static_cast<std::size_t>(n)});
    Tensor hv = vjp(gw[0], v, w);
    Eigen::VectorXd expected = A * testing::to_eigen(v.values());
    for (int i = 0; i < n; ++i) EXPECT_NEAR(hv[i], expected(i), 1e-10);
  }
}

TEST(Properties, DeterministicBitwise) {
  auto run = [] {
    std::mt19937_64 rng(9);
    Graph g;
    Var X = g.constant(random_tensor(rng, {8, 3}));
    Var W = g.parameter(random_tensor(rng, {3, 4}));
    Var L = mean_all(relu(matmul(X, W)));
    std::vector<Var> wrt{W};
    return flatten(grad(L, wrt));
  };
  EXPECT_EQ(run(), run());
}

TEST(Gradcheck, EveryBuiltinPrimitivePasses) {
  const GradcheckOptions opts;
  for (const auto& r : run_gradcheck(builtin_cases(opts.seed), opts)) {
    EXPECT_TRUE(r.passed) << r.name << ": " << r.failure;
    EXPECT_LT(r.first_order_error, 1e-6) << r.name;
    EXPECT_LT(r.second_order_error, 1e-6) << r.name;
  }
}

TEST(Gradcheck, CorruptedAdjointIsCaught) {
  auto bad = std::make_shared<const CustomUnary>(
      CustomUnary{"corrupt_square", [](double x) { return x * x; }, [](double x) { return 2.1 * x; }});
  const GradcheckOptions opts;
  const PrimitiveReport r = check_case(custom_case(bad, opts.seed), opts);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.first_order_error, 1e-3);
}

TEST(Gradcheck, ReluSubgradientAtZeroIsZero) {
  Graph g;
  Var w = g.parameter(Tensor::vector({0.0, 1.0, -1.0}));
  std::vector<Var> wrt{w};
  EXPECT_EQ(grad(sum_all(relu(w)), wrt)[0], Tensor::vector({0.0, 1.0, 0.0}));
}

}  // namespace
}  // namespace onepass::ad
