#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "onepass/update/hyper.hpp"
#include "onepass/update/sgd.hpp"

namespace onepass::hypergrad {

/// Scalar loss of weights and hyperparameters, recorded into `g`.
using LossFn = std::function<ad::Var(ad::Graph& g, std::span<const ad::Var> w, const update::BoundHypers& lambda)>;

/// Differentiable update u(lambda, w) given the training gradient and the
/// optimiser buffers; returns u and the new buffers.
using UpdateFn = std::function<update::RecordedStep(const update::BoundHypers& lambda, std::span<const ad::Var> w,
                                                    std::span<const ad::Var> velocity, std::span<const ad::Var> grad)>;

/// Momentum SGD with decoupled weight decay.
UpdateFn sgd_rule();

struct Hypergradient {
  /// All three are flat over the hyperparameters (internal space), with zeros
  /// for entries that are not optimisable.
  std::vector<double> direct;
  std::vector<double> indirect;
  std::vector<double> total;
  bool diverged = false;

  /// Components of `total` for the optimisable entries only.
  std::vector<double> masked_total(const update::HyperVector& lambda) const { return lambda.masked(total); }
};

/// Validation loss, its gradient in the weights and its partial derivative in
/// the hyperparameters, at fixed weights.
struct ValidationGrad {
  double loss = 0.0;
  ad::TensorList dw;
  std::vector<double> dlambda;
};
ValidationGrad validation_gradient(const LossFn& val_loss, const update::HyperVector& lambda,
                                   const ad::TensorList& w);

/// One update step recorded once at (lambda, w, buffers), with buffers held
/// constant. Products with its Jacobians are plain reverse passes over the
/// same graph, so the graph does not grow with the number of products.
class LinearisedUpdate {
 public:
  LinearisedUpdate(const LossFn& train_loss, const UpdateFn& rule, const update::HyperVector& lambda,
                   const ad::TensorList& w, const update::SgdState& state);

  /// seed^T du/dw.
  ad::TensorList vjp_w(const ad::TensorList& seed) const;
  /// seed^T du/dlambda, flat in hyperparameter order.
  std::vector<double> vjp_lambda(const ad::TensorList& seed) const;

  std::size_t graph_size() const { return graph_->size(); }
  std::size_t weight_count() const { return ad::total_size(w_values_); }
  const ad::TensorList& weights() const { return w_values_; }

 private:
  std::unique_ptr<ad::Graph> graph_;
  update::BoundHypers lambda_;
  std::vector<ad::Var> w_;
  std::vector<ad::Var> u_;
  ad::TensorList w_values_;
};

struct NeumannStats {
  std::size_t graph_nodes = 0;  ///< size of the linearised-update graph
  std::size_t vjp_w_calls = 0;
};

/// Truncated Neumann hypergradient from an explicit validation gradient:
///   p = v = dLv/dw; repeat i times { v -= v du/dw; p += v }
///   indirect = -p du/dlambda
/// Keeps three weight-sized vectors (p, v and the product) live.
Hypergradient neumann_from_seed(const LinearisedUpdate& lin, const ValidationGrad& vg, std::size_t i,
                                const update::HyperVector& lambda, NeumannStats* stats = nullptr);

/// One-pass Neumann hypergradient at the current (post-update) weights and
/// buffers.
Hypergradient neumann_hypergradient(const LossFn& train_loss, const LossFn& val_loss, const UpdateFn& rule,
                                    const update::HyperVector& lambda, const ad::TensorList& w,
                                    const update::SgdState& state, std::size_t i, NeumannStats* stats = nullptr);

/// Weight-decay-only restriction of neumann_hypergradient.
Hypergradient lorraine_hypergradient(const LossFn& train_loss, const LossFn& val_loss, const UpdateFn& rule,
                                     const update::HyperVector& lambda, const ad::TensorList& w,
                                     const update::SgdState& state, std::size_t i);

/// Exact derivative of Lv(lambda, w_n) through n = train_losses.size()
/// recorded updates starting from (w0, state0), which are constants. Buffers
/// are differentiated through inside the window.
Hypergradient exact_unrolled_hypergradient(std::span<const LossFn> train_losses, const LossFn& val_loss,
                                           const UpdateFn& rule, const update::HyperVector& lambda,
                                           const ad::TensorList& w0, const update::SgdState& state0);

/// -<grad_now, grad_prev>: derivative of the loss at the current weights with
/// respect to the learning rate of the previous plain SGD step. Zero when
/// there is no previous gradient.
double baydin_hypergradient(const ad::TensorList& grad_now, const ad::TensorList& grad_prev);

/// baydin_hypergradient converted to internal log10 space.
double baydin_hypergradient_log10(const ad::TensorList& grad_now, const ad::TensorList& grad_prev, double lr);

/// |approx - exact| / max(|exact|, 1e-12) per component; NaN propagates.
std::vector<double> hypergradient_error(std::span<const double> approx, std::span<const double> exact);

}  // namespace onepass::hypergrad
