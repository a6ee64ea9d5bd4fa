#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "onepass/update/meta.hpp"
#include "onepass/update/sgd.hpp"

namespace onepass::update {
namespace {

HyperVector sgd_hypers(double lr, double wd, double momentum) {
  HyperVector h;
  h.add(std::string(kLr), Transform::log10, lr);
  h.add(std::string(kWd), Transform::log10, wd);
  h.add(std::string(kMomentum), Transform::inverse_sigmoid, momentum);
  return h;
}

HyperVector lr_only(double lr) {
  HyperVector h;
  h.add(std::string(kLr), Transform::log10, lr);
  return h;
}

TEST(Transforms, Examples) {
  EXPECT_DOUBLE_EQ(to_natural(Transform::log10, -2.0), 0.01);
  EXPECT_DOUBLE_EQ(to_natural(Transform::inverse_sigmoid, 0.0), 0.5);
  EXPECT_NEAR(to_natural(Transform::inverse_sigmoid, to_internal(Transform::inverse_sigmoid, 0.937)), 0.937, 1e-12);
  EXPECT_NEAR(to_natural(Transform::log10, to_internal(Transform::log10, 3.7e-4)), 3.7e-4, 1e-18);
}

TEST(Transforms, DomainErrors) {
  EXPECT_THROW(to_internal(Transform::log10, 0.0), std::domain_error);
  EXPECT_THROW(to_internal(Transform::log10, -1.0), std::domain_error);
  EXPECT_THROW(to_internal(Transform::inverse_sigmoid, 1.0), std::domain_error);
  EXPECT_THROW(to_internal(Transform::inverse_sigmoid, 0.0), std::domain_error);
}

TEST(Transforms, NaturalValuesStayInRange) {
  for (double x : {-300.0, -20.0, 0.0, 20.0, 300.0}) {
    EXPECT_GE(to_natural(Transform::log10, x), 0.0);
    const double s = to_natural(Transform::inverse_sigmoid, x);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(HyperVectorTest, DuplicateNameRejected) {
  HyperVector h = lr_only(0.1);
  EXPECT_THROW(h.add(std::string(kLr), Transform::log10, 0.2), std::invalid_argument);
}

TEST(Sgd, PlainStep) {
  const HyperVector h = lr_only(0.1);
  const ad::TensorList w{ad::Tensor::vector({5})};
  const SgdStep s = sgd_update(h, w, zero_state(w), {ad::Tensor::vector({2})});
  EXPECT_DOUBLE_EQ(s.u[0][0], 0.2);
}

TEST(Sgd, MomentumRecursion) {
  HyperVector h = lr_only(1.0);
  h.add(std::string(kMomentum), Transform::inverse_sigmoid, 0.5);
  const ad::TensorList w{ad::Tensor::vector({3})};
  const SgdStep s = sgd_update(h, w, SgdState{{ad::Tensor::vector({1})}}, {ad::Tensor::vector({1})});
  EXPECT_DOUBLE_EQ(s.state.velocity[0][0], 1.5);
  EXPECT_DOUBLE_EQ(s.u[0][0], 1.5);
}

TEST(Sgd, DecayOnly) {
  HyperVector h = lr_only(0.1);
  h.add(std::string(kWd), Transform::log10, 0.01);
  const ad::TensorList w{ad::Tensor::vector({10})};
  const SgdStep s = sgd_update(h, w, zero_state(w), {ad::Tensor::vector({0})});
  EXPECT_NEAR(s.u[0][0], 0.01, 1e-17);
}

TEST(Sgd, NanGradientFlagsDivergence) {
  const ad::TensorList w{ad::Tensor::vector({1, 2})};
  const SgdStep s = sgd_update(lr_only(0.1), w, zero_state(w), {ad::Tensor::vector({std::nan(""), 0})});
  EXPECT_TRUE(s.diverged);
}

TEST(Sgd, PerParameterLearningRateMatchesScalar) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  ad::TensorList w{ad::Tensor(ad::Shape{3, 2}), ad::Tensor(ad::Shape{2})};
  ad::TensorList g = ad::zeros_like(w);
  SgdState state = zero_state(w);
  for (auto* list : {&w, &g, &state.velocity})
    for (auto& t : *list)
      for (auto& v : t.values()) v = u(rng);
  const HyperVector scalar = sgd_hypers(0.037, 3e-4, 0.8);
  HyperVector per = scalar;
  per.expand(kLr, ad::total_size(w));
  const SgdStep a = sgd_update(scalar, w, state, g);
  const SgdStep b = sgd_update(per, w, state, g);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.state.velocity, b.state.velocity);

  // The recorded rule agrees bitwise with the eager one.
  ad::Graph graph;
  std::vector<ad::Var> wv, gv, bv;
  for (std::size_t k = 0; k < w.size(); ++k) {
    wv.push_back(graph.parameter(w[k]));
    gv.push_back(graph.constant(g[k]));
    bv.push_back(graph.constant(state.velocity[k]));
  }
  for (const HyperVector* h : {&scalar, static_cast<const HyperVector*>(&per)}) {
    const RecordedStep r = record_sgd_update(bind_hypers(graph, *h, w), wv, bv, gv);
    for (std::size_t k = 0; k < w.size(); ++k) EXPECT_EQ(r.u[k].value(), a.u[k]);
  }
}

TEST(Sgd, ReducesToPlainGradientStep) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  ad::TensorList w{ad::Tensor(ad::Shape{4})};
  ad::TensorList g{ad::Tensor(ad::Shape{4})};
  for (auto& v : w[0].values()) v = u(rng);
  for (auto& v : g[0].values()) v = u(rng);
  const HyperVector h = lr_only(0.3);
  const SgdStep s = sgd_update(h, w, zero_state(w), g);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(s.u[0][j], h.natural(kLr) * g[0][j]);
}

TEST(Sgd, LearningRateChainRule) {
  // du/d(log10 lr) = ln(10) lr buf'.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    ad::TensorList w{ad::Tensor(ad::Shape{2, 3})};
    ad::TensorList g = ad::zeros_like(w);
    SgdState state = zero_state(w);
    for (auto* list : {&w, &g, &state.velocity})
      for (auto& v : list->front().values()) v = u(rng);
    const double lr = std::pow(10.0, -3 * (u(rng) + 1));
    const HyperVector h = sgd_hypers(lr, 1e-3, 0.6);

    ad::Graph graph;
    const BoundHypers bound = bind_hypers(graph, h, w);
    std::vector<ad::Var> wv{graph.parameter(w[0])};
    std::vector<ad::Var> gv{graph.constant(g[0])};
    std::vector<ad::Var> bv{graph.constant(state.velocity[0])};
    const RecordedStep r = record_sgd_update(bound, wv, bv, gv);
    const SgdStep eager = sgd_update(h, w, state, g);
    ad::Tensor seed(w[0].shape());
    for (std::size_t j = 0; j < seed.size(); ++j) {
      seed[j] = 1.0;
      const double d = ad::vjp(r.u[0], seed, bound.leaves[0]).item();
      EXPECT_NEAR(d, std::numbers::ln10 * lr * eager.state.velocity[0][j], 1e-9);
      seed[j] = 0.0;
    }
  }
}

TEST(ClipLr, Examples) {
  HyperVector h = lr_only(0.01);
  h.at(kLr).internal[0] = std::log10(5.0);
  EXPECT_DOUBLE_EQ(clip_lr(h).natural(kLr), 1.0);
  EXPECT_NEAR(clip_lr(lr_only(0.01)).natural(kLr), 0.01, 1e-17);
  h.at(kLr).internal[0] = -12;
  EXPECT_NEAR(clip_lr(h).natural(kLr), 1e-10, 1e-24);
}

TEST(ClipLr, IdempotentProjectionLeavingOthersAlone) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-15, 5);
  for (int trial = 0; trial < 100; ++trial) {
    HyperVector h = sgd_hypers(0.1, 0.01, 0.5);
    h.at(kLr).internal[0] = u(rng);
    h.at(kWd).internal[0] = u(rng);
    const HyperVector once = clip_lr(h);
    EXPECT_EQ(clip_lr(once), once);
    EXPECT_GE(once.natural(kLr), 1e-10 * (1 - 1e-12));
    EXPECT_LE(once.natural(kLr), 1.0);
    EXPECT_EQ(once.at(kWd), h.at(kWd));
    EXPECT_EQ(once.at(kMomentum), h.at(kMomentum));
  }
}

TEST(MetaStep, FirstAdamStep) {
  HyperVector h = lr_only(0.01);
  MetaOptimiser opt(1);
  ASSERT_TRUE(meta_step(opt, h, std::vector<double>{1.0}));
  // m_hat = v_hat = 1, so the step is kappa / (1 + eps).
  EXPECT_NEAR(h.at(kLr).internal[0], -2.0 - 0.05 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(MetaStep, ZeroGradientLeavesLambda) {
  HyperVector h = sgd_hypers(0.01, 1e-4, 0.9);
  const HyperVector before = h;
  MetaOptimiser opt(3);
  ASSERT_TRUE(meta_step(opt, h, std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(h, before);
}

TEST(MetaStep, MaskedEntryNeverMoves) {
  HyperVector h = sgd_hypers(0.01, 1e-4, 0.9);
  h.set_optimisable(kMomentum, false);
  const double m0 = h.at(kMomentum).internal[0];
  MetaOptimiser opt(h.optimisable_size());
  for (int k = 0; k < 20; ++k) ASSERT_TRUE(meta_step(opt, h, std::vector<double>{0.3, -2.0}));
  EXPECT_EQ(h.at(kMomentum).internal[0], m0);
  EXPECT_NE(h.at(kWd).internal[0], std::log10(1e-4));
  EXPECT_THROW(meta_step(opt, h, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(MetaStep, NonFiniteHypergradientReportsDivergence) {
  HyperVector h = lr_only(0.01);
  const HyperVector before = h;
  MetaOptimiser opt(1);
  EXPECT_FALSE(meta_step(opt, h, std::vector<double>{std::nan("")}));
  EXPECT_EQ(h, before);
}

TEST(MetaStep, ClipsAfterTheStep) {
  HyperVector h = lr_only(1.0);
  MetaOptimiser opt(1);
  ASSERT_TRUE(meta_step(opt, h, std::vector<double>{-1.0}));
  EXPECT_EQ(h.natural(kLr), 1.0);
}

TEST(MetaStep, Deterministic) {
  auto run = [] {
    HyperVector h = sgd_hypers(0.01, 1e-4, 0.9);
    MetaOptimiser opt(3);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int k = 0; k < 50; ++k) meta_step(opt, h, std::vector<double>{n(rng), n(rng), n(rng)});
    return h.flat_internal();
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace onepass::update
