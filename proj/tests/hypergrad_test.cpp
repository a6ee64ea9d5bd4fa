#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "onepass/hypergrad/dense.hpp"
#include "onepass/model/mlp.hpp"
#include "quadratic.hpp"
#include "tiny_mlp.hpp"

namespace onepass::hypergrad {
namespace {

using testing::lr_wd;
using testing::Quadratic;
using update::HyperVector;
using update::kLr;
using update::kMomentum;
using update::kWd;

constexpr double kLn10 = std::numbers::ln10;

ad::TensorList single(std::vector<double> v) { return {ad::Tensor::vector(std::move(v))}; }

// L_T = 1/2 (w - 1)^2 with decoupled decay, L_V = 1/2 w^2.
struct ScalarQuadratic {
  LossFn train = [](ad::Graph& g, std::span<const ad::Var> w, const update::BoundHypers&) {
    const ad::Var r = w[0] - g.constant(ad::Tensor::vector({1.0}));
    return ad::scale(ad::sum_all(r * r), 0.5);
  };
  LossFn val = [](ad::Graph&, std::span<const ad::Var> w, const update::BoundHypers&) {
    return ad::scale(ad::sum_all(w[0] * w[0]), 0.5);
  };
};

TEST(Neumann, ScalarQuadraticMatchesImplicitFunctionTheorem) {
  // lr = 0.5, wd = 1 at w* = 1/(1 + wd) = 0.5: du/dw = 1, so every Neumann
  // term past the first vanishes and the answer is -0.125 for any i.
  ScalarQuadratic q;
  HyperVector h = lr_wd(0.5, 1.0);
  h.set_optimisable(kLr, false);
  const ad::TensorList w = single({0.5});
  for (std::size_t i : {0u, 1u, 5u, 30u}) {
    const Hypergradient hg = neumann_hypergradient(q.train, q.val, sgd_rule(), h, w, update::zero_state(w), i);
    EXPECT_NEAR(hg.total[1] / (kLn10 * 1.0), -0.125, 1e-15) << "i=" << i;
    EXPECT_EQ(hg.total[0], 0.0);
    EXPECT_EQ(hg.direct[1], 0.0);
  }
}

TEST(Neumann, ZeroLookBackIsSeedTermOnly) {
  std::mt19937_64 rng(1);
  const Quadratic q = testing::random_quadratic(rng, 4, 1.0, 3.0);
  const HyperVector h = lr_wd(0.3, 0.02);
  const ad::TensorList w{testing::random_tensor(rng, {4})};
  NeumannStats stats;
  const Hypergradient hg = neumann_hypergradient(q.train_loss(), q.val_loss(), sgd_rule(), h, w,
                                                 update::zero_state(w), 0, &stats);
  EXPECT_EQ(stats.vjp_w_calls, 0u);
  // -g^T du/dlambda by hand: du/dlr_nat = A w - b + wd w, du/dwd_nat = lr w.
  const Eigen::VectorXd wv = testing::to_eigen(w[0].values());
  const Eigen::VectorXd g = q.val_grad(wv);
  const double dlr = -g.dot(q.A * wv - q.b + 0.02 * wv) * kLn10 * 0.3;
  const double dwd = -g.dot(0.3 * wv) * kLn10 * 0.02;
  EXPECT_NEAR(hg.total[0], dlr, 1e-12);
  EXPECT_NEAR(hg.total[1], dwd, 1e-12);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(hg.total[k], hg.direct[k] + hg.indirect[k]);
}

double wd_solve_oracle(const Quadratic& q, const Eigen::VectorXd& w, double wd) {
  const Eigen::MatrixXd M = q.A + wd * Eigen::MatrixXd::Identity(q.A.rows(), q.A.cols());
  return -q.val_grad(w).dot(M.ldlt().solve(w)) * kLn10 * wd;
}

TEST(Neumann, ContractiveQuadraticConvergesToDenseSolve) {
  // Eigenvalues of A + wd I in [1, 3] + wd and lr = 2 / (4 + 2 wd) put the
  // spectrum of I - du/dw in [-0.5, 0.5].
  std::mt19937_64 rng(2);
  const double wd = 1e-3;
  const Quadratic q = testing::random_quadratic(rng, 10, 1.0, 3.0);
  const HyperVector h = lr_wd(2.0 / (4.0 + 2.0 * wd), wd);
  const ad::TensorList w{testing::random_tensor(rng, {10})};
  const double oracle = wd_solve_oracle(q, testing::to_eigen(w[0].values()), wd);
  auto error_at = [&](std::size_t i) {
    const Hypergradient hg = neumann_hypergradient(q.train_loss(), q.val_loss(), sgd_rule(), h, w,
                                                   update::zero_state(w), i);
    return std::abs(hg.indirect[1] - oracle) / std::abs(oracle);
  };
  EXPECT_LT(error_at(25), 1e-3);
  EXPECT_LT(error_at(50), error_at(10));
  EXPECT_LT(error_at(200), 1e-6);
}

TEST(Neumann, PlainSgdRecoversImplicitFunctionTheoremForLossHyperparameter) {
  // L2 penalty inside the training loss, plain SGD: the limit is
  // -g^T H^{-1} d2L_T/dw dlambda = -g^T (A + l2 I)^{-1} w, whatever lr is.
  std::mt19937_64 rng(3);
  const Quadratic q = testing::random_quadratic(rng, 6, 1.0, 2.0);
  const double l2 = 0.05;
  const LossFn base = q.train_loss();
  const LossFn penalised = [base](ad::Graph& g, std::span<const ad::Var> w, const update::BoundHypers& lambda) {
    const ad::Var coeff = lambda.natural("l2").front();
    return base(g, w, lambda) + ad::scale(coeff * ad::matmul(w[0], w[0]), 0.5);
  };
  const ad::TensorList w{testing::random_tensor(rng, {6})};
  const Eigen::VectorXd wv = testing::to_eigen(w[0].values());
  const Eigen::MatrixXd H = q.A + l2 * Eigen::MatrixXd::Identity(6, 6);
  const double oracle = -q.val_grad(wv).dot(H.ldlt().solve(wv)) * kLn10 * l2;
  for (double lr : {0.3, 0.5}) {
    HyperVector h;
    h.add(std::string(kLr), update::Transform::log10, lr, false);
    h.add("l2", update::Transform::log10, l2);
    const Hypergradient hg = neumann_hypergradient(penalised, q.val_loss(), sgd_rule(), h, w,
                                                   update::zero_state(w), 400);
    EXPECT_NEAR(hg.total[1], oracle, 1e-6 * std::abs(oracle)) << "lr=" << lr;
  }
}

TEST(Neumann, GraphSizeIndependentOfLookBack) {
  std::mt19937_64 rng(4);
  const Quadratic q = testing::random_quadratic(rng, 5, 1.0, 2.0);
  const HyperVector h = lr_wd(0.4, 0.01);
  const ad::TensorList w{testing::random_tensor(rng, {5})};
  NeumannStats a;
  NeumannStats b;
  neumann_hypergradient(q.train_loss(), q.val_loss(), sgd_rule(), h, w, update::zero_state(w), 1, &a);
  neumann_hypergradient(q.train_loss(), q.val_loss(), sgd_rule(), h, w, update::zero_state(w), 60, &b);
  EXPECT_EQ(a.graph_nodes, b.graph_nodes);
  EXPECT_EQ(a.vjp_w_calls, 1u);
  EXPECT_EQ(b.vjp_w_calls, 60u);
}

TEST(Neumann, ExpansiveUpdateDivergesCleanly) {
  std::mt19937_64 rng(5);
  const Quadratic q = testing::random_quadratic(rng, 3, 1.0, 2.0);
  const HyperVector h = lr_wd(1e3, 0.01);
  const ad::TensorList w{testing::random_tensor(rng, {3})};
  const Hypergradient hg = neumann_hypergradient(q.train_loss(), q.val_loss(), sgd_rule(), h, w,
                                                 update::zero_state(w), 400);
  EXPECT_TRUE(hg.diverged);
}

using testing::tiny_mlp;
using testing::TinyMlp;

TEST(BruteForce, NeumannMatchesAssembledSeries) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TinyMlp t = tiny_mlp(seed);
    ASSERT_LE(t.spec.parameter_count(), 20u);
    const LinearisedUpdate lin(t.loss_on(t.train), sgd_rule(), t.lambda, t.w, t.state);
    const ValidationGrad vg = validation_gradient(t.loss_on(t.val), t.lambda, t.w);
    const DenseJacobians d = dense_jacobians(lin, vg);
    for (std::size_t i : {0u, 1u, 5u, 20u}) {
      const Hypergradient a = neumann_from_seed(lin, vg, i, t.lambda);
      const Hypergradient b = dense_series_hypergradient(d, i, t.lambda);
      for (std::size_t k = 0; k < a.total.size(); ++k) EXPECT_NEAR(a.total[k], b.total[k], 1e-8);
    }
  }
}

TEST(BruteForce, DenseJacobianMatchesFiniteDifferences) {
  // Column k of du/dw by differencing the eager update with eager gradients.
  const TinyMlp t = tiny_mlp(9);
  const LinearisedUpdate lin(t.loss_on(t.train), sgd_rule(), t.lambda, t.w, t.state);
  const ValidationGrad vg = validation_gradient(t.loss_on(t.val), t.lambda, t.w);
  const DenseJacobians d = dense_jacobians(lin, vg);
  const std::vector<double> w0 = ad::flatten(t.w);
  auto u_at = [&](const std::vector<double>& flat) {
    const ad::TensorList w = ad::unflatten(flat, t.w);
    const auto lg = model::loss_and_grad(t.spec, w, t.train, model::LossKind::mse);
    return ad::flatten(update::sgd_update(t.lambda, w, t.state, lg.grad).u);
  };
  const double h = 1e-6;
  for (std::size_t k = 0; k < w0.size(); ++k) {
    std::vector<double> wp = w0;
    std::vector<double> wm = w0;
    wp[k] += h;
    wm[k] -= h;
    const auto up = u_at(wp);
    const auto um = u_at(wm);
    for (std::size_t r = 0; r < w0.size(); ++r) EXPECT_NEAR(d.du_dw(r, k), (up[r] - um[r]) / (2 * h), 1e-7);
  }
}

TEST(Exact, SingleStepWindowEqualsSeedTerm) {
  // One unrolled step from w0 is the i = 0 Neumann term linearised at w0 with
  // the validation gradient taken at w1.
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const TinyMlp t = tiny_mlp(seed);
    const std::vector<LossFn> window{t.loss_on(t.train)};
    const Hypergradient exact =
        exact_unrolled_hypergradient(window, t.loss_on(t.val), sgd_rule(), t.lambda, t.w, t.state);

    const auto lg = model::loss_and_grad(t.spec, t.w, t.train, model::LossKind::mse);
    const update::SgdStep step = update::sgd_update(t.lambda, t.w, t.state, lg.grad);
    ad::TensorList w1 = t.w;
    ad::axpy(w1, -1.0, step.u);
    const LinearisedUpdate lin(t.loss_on(t.train), sgd_rule(), t.lambda, t.w, t.state);
    const Hypergradient approx = neumann_from_seed(lin, validation_gradient(t.loss_on(t.val), t.lambda, w1), 0,
                                                   t.lambda);
    for (std::size_t k = 0; k < exact.total.size(); ++k) EXPECT_NEAR(exact.total[k], approx.total[k], 1e-10);
  }
}

TEST(Exact, TwoStepLinearModelByHand) {
  // L_T = (w - 1)^2, u = lr 2 (w - 1), w0 = 0, lr = 0.25: w2 = 0.75 and
  // dw2/dlr = 2 (1 - 2 lr) 2 = 2, so d(w2^2/2)/dlr = 1.5.
  const LossFn train = [](ad::Graph& g, std::span<const ad::Var> w, const update::BoundHypers&) {
    const ad::Var r = w[0] - g.constant(ad::Tensor::vector({1.0}));
    return ad::sum_all(r * r);
  };
  const LossFn val = [](ad::Graph&, std::span<const ad::Var> w, const update::BoundHypers&) {
    return ad::scale(ad::sum_all(w[0] * w[0]), 0.5);
  };
  HyperVector h;
  h.add(std::string(kLr), update::Transform::log10, 0.25);
  const ad::TensorList w0 = single({0.0});
  const std::vector<LossFn> window{train, train};
  const Hypergradient hg = exact_unrolled_hypergradient(window, val, sgd_rule(), h, w0, update::zero_state(w0));
  EXPECT_NEAR(hg.total[0] / (kLn10 * 0.25), 1.5, 1e-14);
  EXPECT_EQ(hg.direct[0], 0.0);
}

TEST(Exact, MaskedEntriesAreZero) {
  TinyMlp t = tiny_mlp(30);
  t.lambda.set_optimisable(kMomentum, false);
  const std::vector<LossFn> window(3, t.loss_on(t.train));
  const Hypergradient hg = exact_unrolled_hypergradient(window, t.loss_on(t.val), sgd_rule(), t.lambda, t.w, t.state);
  EXPECT_EQ(hg.total[2], 0.0);
  EXPECT_NE(hg.total[0], 0.0);
  EXPECT_NE(hg.total[1], 0.0);
}

TEST(Exact, WindowMatchesFiniteDifferenceOfUnrolledTraining) {
  const TinyMlp t = tiny_mlp(31);
  const std::size_t window = 4;
  const std::vector<LossFn> losses(window, t.loss_on(t.train));
  const Hypergradient hg = exact_unrolled_hypergradient(losses, t.loss_on(t.val), sgd_rule(), t.lambda, t.w, t.state);
  auto final_val = [&](const HyperVector& lambda) {
    ad::TensorList w = t.w;
    update::SgdState s = t.state;
    for (std::size_t k = 0; k < window; ++k) {
      const auto lg = model::loss_and_grad(t.spec, w, t.train, model::LossKind::mse);
      update::SgdStep step = update::sgd_update(lambda, w, s, lg.grad);
      ad::axpy(w, -1.0, step.u);
      s = std::move(step.state);
    }
    return model::evaluate_loss(t.spec, w, t.val, model::LossKind::mse);
  };
  const std::vector<double> x0 = t.lambda.flat_internal();
  for (std::size_t k = 0; k < x0.size(); ++k) {
    HyperVector p = t.lambda;
    HyperVector m = t.lambda;
    std::vector<double> xp = x0;
    std::vector<double> xm = x0;
    xp[k] += 1e-5;
    xm[k] -= 1e-5;
    p.set_flat_internal(xp);
    m.set_flat_internal(xm);
    const double fd = (final_val(p) - final_val(m)) / 2e-5;
    EXPECT_NEAR(hg.total[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "entry " << k;
  }
}

TEST(Baydin, Examples) {
  EXPECT_EQ(baydin_hypergradient(single({1, 2}), single({3, 4})), -11.0);
  EXPECT_EQ(baydin_hypergradient(single({1, 2}), single({0, 0})), 0.0);
  EXPECT_EQ(baydin_hypergradient(single({1, 2}), {}), 0.0);
}

TEST(Baydin, AgreesWithSingleStepUnroll) {
  // L = w^2/2 from w0 = 1: grad_prev = w0, grad_now = w1 = (1 - lr) w0.
  const LossFn loss = [](ad::Graph&, std::span<const ad::Var> w, const update::BoundHypers&) {
    return ad::scale(ad::sum_all(w[0] * w[0]), 0.5);
  };
  for (double lr : {0.01, 0.2, 0.7}) {
    HyperVector h;
    h.add(std::string(kLr), update::Transform::log10, lr);
    const ad::TensorList w0 = single({1.0});
    const std::vector<LossFn> window{loss};
    const Hypergradient exact = exact_unrolled_hypergradient(window, loss, sgd_rule(), h, w0, update::zero_state(w0));
    const double b = baydin_hypergradient_log10(single({1.0 - lr}), w0, lr);
    EXPECT_NEAR(b, exact.total[0], 1e-14);
  }
}

TEST(Lorraine, RestrictsToWeightDecay) {
  const TinyMlp t = tiny_mlp(40);
  const Hypergradient full =
      neumann_hypergradient(t.loss_on(t.train), t.loss_on(t.val), sgd_rule(), t.lambda, t.w, t.state, 5);
  const Hypergradient lor =
      lorraine_hypergradient(t.loss_on(t.train), t.loss_on(t.val), sgd_rule(), t.lambda, t.w, t.state, 5);
  EXPECT_EQ(lor.total[0], 0.0);
  EXPECT_EQ(lor.total[2], 0.0);
  EXPECT_EQ(lor.total[1], full.total[1]);
}

TEST(Lorraine, ScalarQuadratic) {
  ScalarQuadratic q;
  const HyperVector h = lr_wd(0.5, 1.0);
  const ad::TensorList w = single({0.5});
  const Hypergradient hg = lorraine_hypergradient(q.train, q.val, sgd_rule(), h, w, update::zero_state(w), 5);
  EXPECT_NEAR(hg.total[1] / kLn10, -0.125, 1e-15);
}

TEST(Error, Examples) {
  EXPECT_EQ(hypergradient_error(std::vector<double>{2.0, 3.0}, std::vector<double>{2.0, 3.0}),
            (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(hypergradient_error(std::vector<double>{2.0}, std::vector<double>{1.0}), std::vector<double>{1.0});
  EXPECT_TRUE(std::isnan(hypergradient_error(std::vector<double>{std::nan("")}, std::vector<double>{1.0})[0]));
}

TEST(DenseSolve, MatchesClosedForm) {
  std::mt19937_64 rng(50);
  const double wd = 0.01;
  const Quadratic q = testing::random_quadratic(rng, 6, 1.0, 3.0);
  HyperVector h = lr_wd(0.4, wd);
  const ad::TensorList w{testing::random_tensor(rng, {6})};
  const LinearisedUpdate lin(q.train_loss(), sgd_rule(), h, w, update::zero_state(w));
  const DenseJacobians d = dense_jacobians(lin, validation_gradient(q.val_loss(), h, w));
  const Hypergradient hg = dense_solve_hypergradient(d, h);
  const double oracle = wd_solve_oracle(q, testing::to_eigen(w[0].values()), wd);
  EXPECT_NEAR(hg.total[1], oracle, 1e-10 * std::abs(oracle));
}

}  // namespace
}  // namespace onepass::hypergrad
