#include <stdexcept>

#include "onepass/hypergrad/hypergrad.hpp"
#include "mask.hpp"

namespace onepass::hypergrad {

Hypergradient exact_unrolled_hypergradient(std::span<const LossFn> train_losses, const LossFn& val_loss,
                                           const UpdateFn& rule, const update::HyperVector& lambda,
                                           const ad::TensorList& w0, const update::SgdState& state0) {
  if (train_losses.empty()) throw std::invalid_argument("exact_unrolled_hypergradient: window must be >= 1");
  ad::Graph g;
  const update::BoundHypers bound = update::bind_hypers(g, lambda, w0);
  std::vector<ad::Var> w;
  std::vector<ad::Var> velocity;
  // Initial weights are leaves with no path to lambda.
  for (const auto& t : w0) w.push_back(g.parameter(t));
  for (const auto& t : state0.velocity) velocity.push_back(g.constant(t));

  for (const LossFn& train_loss : train_losses) {
    const ad::Var loss = train_loss(g, w, bound);
    const std::vector<ad::Var> grad = ad::grad_recorded(loss, w);
    const update::RecordedStep step = rule(bound, w, velocity, grad);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = ad::sub(w[k], step.u[k]);
    velocity = step.velocity;
  }

  const ad::Var lv = val_loss(g, w, bound);
  // Total derivative through the unrolled window.
  const std::vector<double> total = ad::flatten(ad::grad(lv, bound.leaves));
  // Partial at fixed final weights: the final weights are terminal inputs.
  std::vector<ad::Var> wrt = bound.leaves;
  wrt.insert(wrt.end(), w.begin(), w.end());
  ad::TensorList partial = ad::grad(lv, wrt);
  partial.resize(bound.leaves.size());

  Hypergradient h;
  h.direct = ad::flatten(partial);
  h.indirect.resize(total.size());
  for (std::size_t k = 0; k < total.size(); ++k) h.indirect[k] = total[k] - h.direct[k];
  return detail::finish(std::move(h), lambda);
}

}  // namespace onepass::hypergrad
