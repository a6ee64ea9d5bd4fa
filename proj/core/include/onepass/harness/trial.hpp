#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "onepass/harness/config.hpp"
#include "onepass/hypergrad/hypergrad.hpp"
#include "onepass/model/mlp.hpp"

namespace onepass::harness {

/// splitmix64 of a (master, stream, index) counter: trial k can be re-run
/// without running trials 0..k-1.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

/// Standardised data, split and batches shared read-only by all trials.
struct Prepared {
  data::Dataset dataset;
  data::Split split;
  model::MlpSpec spec;  ///< init_seed is set per trial
  model::LossKind loss = model::LossKind::mse;
  model::Batch train;
  model::Batch val;
  model::Batch test;
  /// Train plus validation rows, used by the Random settings.
  model::Batch train_val;
  std::vector<std::size_t> train_val_idx;
};

/// Throws data::DataError when the dataset cannot be read.
data::Dataset load_dataset(const ExperimentConfig& c);
Prepared prepare(const ExperimentConfig& c);
Prepared prepare(const ExperimentConfig& c, const data::Dataset& raw);

/// lr, wd, momentum and the xLR multiplier drawn from the ranges. lr and wd
/// are log-uniform; momentum is uniform in natural space.
update::HyperVector sample_init(const InitRanges& ranges, std::uint64_t seed);

/// Sets optimisable flags (and per-parameter learning rates) for a setting.
update::HyperVector configure_hypers(update::HyperVector lambda, Setting s, std::size_t n_params);

enum class Status { ok, diverged_nan };
std::string_view status_name(Status s);

struct Snapshot {
  std::size_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double test_loss = 0.0;
  double lr = 0.0;  ///< mean natural value for per-parameter learning rates
  double wd = 0.0;
  double momentum = 0.0;
};

struct RunRecord {
  std::size_t trial_id = 0;
  std::uint64_t seed = 0;
  Setting setting = Setting::random;
  double init_lr = 0.0;
  double init_wd = 0.0;
  double init_momentum = 0.0;
  double lr_multiplier = 1.0;
  std::vector<Snapshot> snapshots;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  double final_test_loss = 0.0;      ///< standardised targets for regression
  double final_test_loss_raw = 0.0;  ///< de-normalised
  double wall_seconds = 0.0;
  Status status = Status::ok;
  bool outlier = false;
  std::size_t weight_steps = 0;
  std::size_t hyper_steps = 0;
};

struct TrialOptions {
  std::size_t total_steps = 0;  ///< 0 = from the config
  bool snapshots = true;
};

/// One trial from the given seed. Training is never reset; every T weight
/// steps the setting's hypergradient feeds one meta step.
RunRecord run_trial(const ExperimentConfig& c, const Prepared& p, Setting s, std::size_t trial_id, std::uint64_t seed,
                    const TrialOptions& options = {});

/// Seed of trial k of a setting. Settings share initialisations except
/// Random 3-batched, which draws three fresh ones per reported trial.
std::uint64_t trial_seed(const ExperimentConfig& c, Setting s, std::size_t k);

}  // namespace onepass::harness
