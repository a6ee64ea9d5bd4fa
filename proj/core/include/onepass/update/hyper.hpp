#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "onepass/autodiff/ops.hpp"

namespace onepass::update {

enum class Transform { log10, inverse_sigmoid, identity };

inline constexpr std::string_view kLr = "lr";
inline constexpr std::string_view kWd = "wd";
inline constexpr std::string_view kMomentum = "momentum";
inline constexpr std::string_view kLrMultiplier = "lr_multiplier";

inline constexpr double kLrMin = 1e-10;
inline constexpr double kLrMax = 1.0;

double to_natural(Transform t, double internal);
/// Throws std::domain_error outside the transform's codomain.
double to_internal(Transform t, double natural);
/// In-graph version, so gradients flow through the transform.
ad::Var to_natural(Transform t, ad::Var internal);

std::string_view transform_name(Transform t);

struct HyperEntry {
  std::string name;
  Transform transform = Transform::identity;
  /// One value, or one per model parameter for per-parameter learning rates.
  std::vector<double> internal;
  bool optimisable = true;

  double natural(std::size_t k = 0) const { return to_natural(transform, internal.at(k)); }
};

/// Ordered hyperparameters in internal (transformed) space. The flat layout
/// used for hypergradients concatenates entries in insertion order.
class HyperVector {
 public:
  /// Throws std::invalid_argument on a duplicate name.
  void add(std::string name, Transform transform, double natural, bool optimisable = true);

  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const HyperEntry* find(std::string_view name) const;
  HyperEntry* find(std::string_view name);
  const HyperEntry& at(std::string_view name) const;
  HyperEntry& at(std::string_view name);
  const std::vector<HyperEntry>& entries() const { return entries_; }

  /// Natural value of the first element of an entry.
  double natural(std::string_view name) const { return at(name).natural(); }
  void set_natural(std::string_view name, double natural);
  /// Replicates a scalar entry to n elements.
  void expand(std::string_view name, std::size_t n);
  void set_optimisable(std::string_view name, bool on) { at(name).optimisable = on; }

  std::size_t flat_size() const;
  std::vector<double> flat_internal() const;
  void set_flat_internal(std::span<const double> values);
  std::vector<bool> flat_mask() const;
  std::size_t optimisable_size() const;
  /// Keeps only the optimisable components of a flat vector.
  std::vector<double> masked(std::span<const double> flat) const;

  friend bool operator==(const HyperVector& a, const HyperVector& b);

 private:
  std::vector<HyperEntry> entries_;
};

bool operator==(const HyperEntry& a, const HyperEntry& b);

/// Projects learning-rate entries onto [1e-10, 1] in natural space.
HyperVector clip_lr(HyperVector lambda);

/// Hyperparameters recorded as graph leaves in internal space. Per-parameter
/// entries are split into one leaf per weight tensor.
struct BoundHypers {
  std::vector<ad::Var> leaves;
  std::vector<std::vector<ad::Var>> per_entry;
  std::vector<std::string> names;
  std::vector<Transform> transforms;

  /// Natural-space nodes of an entry (one, or one per weight tensor).
  std::vector<ad::Var> natural(std::string_view name) const;
  bool contains(std::string_view name) const;
};

BoundHypers bind_hypers(ad::Graph& g, const HyperVector& lambda, const ad::TensorList& weights);

}  // namespace onepass::update
