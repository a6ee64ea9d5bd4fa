#include "onepass/update/hyper.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace onepass::update {

double to_natural(Transform t, double internal) {
  switch (t) {
    // Same formulas as the recorded versions, so eager and in-graph values agree bitwise.
    case Transform::log10: return std::exp(internal * std::numbers::ln10);
    case Transform::inverse_sigmoid: return ad::sigmoid(ad::Tensor::scalar(internal)).item();
    case Transform::identity: return internal;
  }
  return internal;
}

double to_internal(Transform t, double natural) {
  switch (t) {
    case Transform::log10:
      if (!(natural > 0.0)) throw std::domain_error(fmt::format("log10 transform needs a positive value, got {}", natural));
      return std::log10(natural);
    case Transform::inverse_sigmoid:
      if (!(natural > 0.0 && natural < 1.0)) {
        throw std::domain_error(fmt::format("inverse sigmoid transform needs a value in (0, 1), got {}", natural));
      }
      return std::log(natural / (1.0 - natural));
    case Transform::identity: return natural;
  }
  return natural;
}

ad::Var to_natural(Transform t, ad::Var internal) {
  switch (t) {
    case Transform::log10: return ad::exp(ad::scale(internal, std::numbers::ln10));
    case Transform::inverse_sigmoid: return ad::sigmoid(internal);
    case Transform::identity: return internal;
  }
  return internal;
}

std::string_view transform_name(Transform t) {
  switch (t) {
    case Transform::log10: return "log10";
    case Transform::inverse_sigmoid: return "inverse_sigmoid";
    case Transform::identity: return "identity";
  }
  return "?";
}

bool operator==(const HyperEntry& a, const HyperEntry& b) {
  return a.name == b.name && a.transform == b.transform && a.internal == b.internal && a.optimisable == b.optimisable;
}

bool operator==(const HyperVector& a, const HyperVector& b) { return a.entries_ == b.entries_; }

void HyperVector::add(std::string name, Transform transform, double natural, bool optimisable) {
  if (contains(name)) throw std::invalid_argument(fmt::format("duplicate hyperparameter '{}'", name));
  entries_.push_back(HyperEntry{std::move(name), transform, {to_internal(transform, natural)}, optimisable});
}

const HyperEntry* HyperVector::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

HyperEntry* HyperVector::find(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

const HyperEntry& HyperVector::at(std::string_view name) const {
  if (const HyperEntry* e = find(name)) return *e;
  throw std::out_of_range(fmt::format("no hyperparameter '{}'", name));
}

HyperEntry& HyperVector::at(std::string_view name) {
  if (HyperEntry* e = find(name)) return *e;
  throw std::out_of_range(fmt::format("no hyperparameter '{}'", name));
}

void HyperVector::set_natural(std::string_view name, double natural) {
  HyperEntry& e = at(name);
  std::fill(e.internal.begin(), e.internal.end(), to_internal(e.transform, natural));
}

void HyperVector::expand(std::string_view name, std::size_t n) {
  HyperEntry& e = at(name);
  if (e.internal.size() != 1) throw std::logic_error(fmt::format("hyperparameter '{}' is already expanded", name));
  e.internal.assign(n, e.internal.front());
}

std::size_t HyperVector::flat_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.internal.size();
  return n;
}

std::vector<double> HyperVector::flat_internal() const {
  std::vector<double> flat;
  flat.reserve(flat_size());
  for (const auto& e : entries_) flat.insert(flat.end(), e.internal.begin(), e.internal.end());
  return flat;
}

void HyperVector::set_flat_internal(std::span<const double> values) {
  if (values.size() != flat_size()) throw std::invalid_argument("set_flat_internal: size mismatch");
  std::size_t k = 0;
  for (auto& e : entries_)
    for (auto& v : e.internal) v = values[k++];
}

std::vector<bool> HyperVector::flat_mask() const {
  std::vector<bool> mask;
  mask.reserve(flat_size());
  for (const auto& e : entries_) mask.insert(mask.end(), e.internal.size(), e.optimisable);
  return mask;
}

std::size_t HyperVector::optimisable_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.optimisable) n += e.internal.size();
  return n;
}

std::vector<double> HyperVector::masked(std::span<const double> flat) const {
  if (flat.size() != flat_size()) throw std::invalid_argument("masked: size mismatch");
  std::vector<double> out;
  out.reserve(optimisable_size());
  const std::vector<bool> mask = flat_mask();
  for (std::size_t k = 0; k < flat.size(); ++k)
    if (mask[k]) out.push_back(flat[k]);
  return out;
}

HyperVector clip_lr(HyperVector lambda) {
  HyperEntry* lr = lambda.find(kLr);
  if (!lr) return lambda;
  for (auto& x : lr->internal) {
    if (lr->transform == Transform::log10) {
      // Clamp in internal space so the projection is exactly idempotent.
      x = std::clamp(x, std::log10(kLrMin), std::log10(kLrMax));
    } else {
      const double natural = to_natural(lr->transform, x);
      if (natural < kLrMin || natural > kLrMax) x = to_internal(lr->transform, std::clamp(natural, kLrMin, kLrMax));
    }
  }
  return lambda;
}

std::vector<ad::Var> BoundHypers::natural(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] != name) continue;
    std::vector<ad::Var> out;
    for (const ad::Var& leaf : per_entry[k]) out.push_back(to_natural(transforms[k], leaf));
    return out;
  }
  throw std::out_of_range(fmt::format("no bound hyperparameter '{}'", name));
}

bool BoundHypers::contains(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

BoundHypers bind_hypers(ad::Graph& g, const HyperVector& lambda, const ad::TensorList& weights) {
  BoundHypers b;
  const std::size_t n_weights = ad::total_size(weights);
  for (const auto& e : lambda.entries()) {
    std::vector<ad::Var> leaves;
    if (e.internal.size() == 1) {
      leaves.push_back(g.parameter(ad::Tensor::scalar(e.internal.front()), e.name));
    } else if (e.internal.size() == n_weights) {
      const ad::TensorList parts = ad::unflatten(e.internal, weights);
      for (const auto& part : parts) leaves.push_back(g.parameter(part, e.name));
    } else {
      throw std::invalid_argument(fmt::format("hyperparameter '{}' has {} values for {} weights", e.name,
                                              e.internal.size(), n_weights));
    }
    b.leaves.insert(b.leaves.end(), leaves.begin(), leaves.end());
    b.per_entry.push_back(std::move(leaves));
    b.names.push_back(e.name);
    b.transforms.push_back(e.transform);
  }
  return b;
}

}  // namespace onepass::update
