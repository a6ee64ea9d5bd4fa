#include <cmath>
#include <numbers>
#include <stdexcept>

#include "onepass/hypergrad/hypergrad.hpp"
#include "mask.hpp"

namespace onepass::hypergrad {

UpdateFn sgd_rule() { return update::record_sgd_update; }

ValidationGrad validation_gradient(const LossFn& val_loss, const update::HyperVector& lambda,
                                   const ad::TensorList& w) {
  ad::Graph g;
  std::vector<ad::Var> wv;
  for (const auto& t : w) wv.push_back(g.parameter(t));
  const update::BoundHypers bound = update::bind_hypers(g, lambda, w);
  const ad::Var loss = val_loss(g, wv, bound);

  std::vector<ad::Var> wrt = wv;
  wrt.insert(wrt.end(), bound.leaves.begin(), bound.leaves.end());
  ad::TensorList grads = ad::grad(loss, wrt);

  ValidationGrad vg;
  vg.loss = loss.value().item();
  vg.dw.assign(std::make_move_iterator(grads.begin()), std::make_move_iterator(grads.begin() + wv.size()));
  vg.dlambda = ad::flatten(ad::TensorList(std::make_move_iterator(grads.begin() + wv.size()),
                                          std::make_move_iterator(grads.end())));
  return vg;
}

LinearisedUpdate::LinearisedUpdate(const LossFn& train_loss, const UpdateFn& rule, const update::HyperVector& lambda,
                                   const ad::TensorList& w, const update::SgdState& state)
    : graph_(std::make_unique<ad::Graph>()), w_values_(w) {
  ad::Graph& g = *graph_;
  for (const auto& t : w) w_.push_back(g.parameter(t));
  lambda_ = update::bind_hypers(g, lambda, w);
  std::vector<ad::Var> velocity;
  for (const auto& t : state.velocity) velocity.push_back(g.constant(t));
  const ad::Var loss = train_loss(g, w_, lambda_);
  const std::vector<ad::Var> grad = ad::grad_recorded(loss, w_);
  u_ = rule(lambda_, w_, velocity, grad).u;
}

ad::TensorList LinearisedUpdate::vjp_w(const ad::TensorList& seed) const { return ad::vjp(u_, seed, w_); }

std::vector<double> LinearisedUpdate::vjp_lambda(const ad::TensorList& seed) const {
  return ad::flatten(ad::vjp(u_, seed, lambda_.leaves));
}

Hypergradient neumann_from_seed(const LinearisedUpdate& lin, const ValidationGrad& vg, std::size_t i,
                                const update::HyperVector& lambda, NeumannStats* stats) {
  ad::TensorList p = vg.dw;
  ad::TensorList v = vg.dw;
  bool finite = ad::all_finite(v);
  std::size_t calls = 0;
  for (std::size_t j = 0; j < i && finite; ++j) {
    const ad::TensorList jv = lin.vjp_w(v);
    ++calls;
    ad::axpy(v, -1.0, jv);
    ad::axpy(p, 1.0, v);
    finite = ad::all_finite(p);
  }

  Hypergradient h;
  h.direct = vg.dlambda;
  if (finite) {
    h.indirect = lin.vjp_lambda(p);
    for (double& x : h.indirect) x = -x;
  } else {
    h.indirect.assign(h.direct.size(), std::nan(""));
  }
  if (stats) *stats = {lin.graph_size(), calls};
  return detail::finish(std::move(h), lambda);
}

Hypergradient neumann_hypergradient(const LossFn& train_loss, const LossFn& val_loss, const UpdateFn& rule,
                                    const update::HyperVector& lambda, const ad::TensorList& w,
                                    const update::SgdState& state, std::size_t i, NeumannStats* stats) {
  const ValidationGrad vg = validation_gradient(val_loss, lambda, w);
  const LinearisedUpdate lin(train_loss, rule, lambda, w, state);
  return neumann_from_seed(lin, vg, i, lambda, stats);
}

Hypergradient lorraine_hypergradient(const LossFn& train_loss, const LossFn& val_loss, const UpdateFn& rule,
                                     const update::HyperVector& lambda, const ad::TensorList& w,
                                     const update::SgdState& state, std::size_t i) {
  update::HyperVector only_wd = lambda;
  for (const auto& e : lambda.entries()) only_wd.set_optimisable(e.name, e.name == update::kWd);
  return neumann_hypergradient(train_loss, val_loss, rule, only_wd, w, state, i);
}

double baydin_hypergradient(const ad::TensorList& grad_now, const ad::TensorList& grad_prev) {
  if (grad_prev.empty()) return 0.0;
  if (grad_now.size() != grad_prev.size()) throw std::invalid_argument("baydin: gradient lists differ in length");
  return -ad::dot(grad_now, grad_prev);
}

double baydin_hypergradient_log10(const ad::TensorList& grad_now, const ad::TensorList& grad_prev, double lr) {
  return baydin_hypergradient(grad_now, grad_prev) * std::numbers::ln10 * lr;
}

std::vector<double> hypergradient_error(std::span<const double> approx, std::span<const double> exact) {
  if (approx.size() != exact.size()) throw std::invalid_argument("hypergradient_error: size mismatch");
  std::vector<double> err(approx.size());
  for (std::size_t k = 0; k < err.size(); ++k)
    err[k] = std::abs(approx[k] - exact[k]) / std::max(std::abs(exact[k]), 1e-12);
  return err;
}

}  // namespace onepass::hypergrad
