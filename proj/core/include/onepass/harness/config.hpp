#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "onepass/data/dataset.hpp"
#include "onepass/update/meta.hpp"

namespace onepass::harness {

enum class Setting {
  random,
  random_xlr,
  random_3batched,
  lorraine,
  baydin,
  ours_wd_lr,
  ours_wd_lr_m,
  ours_wd_hdlr_m,
  diff_through_opt,
};

std::string_view setting_name(Setting s);
/// Display label used in printed tables.
std::string_view setting_label(Setting s);
std::optional<Setting> parse_setting(std::string_view name);
const std::vector<Setting>& all_settings();
/// Settings that never take a meta step.
bool is_random(Setting s);

struct Range {
  double min = 0.0;
  double max = 1.0;
};

struct InitRanges {
  Range log10_lr{-6.0, -1.0};
  Range log10_wd{-7.0, -2.0};
  Range momentum{0.0, 1.0};
  Range lr_multiplier{0.995, 1.001};
};

struct ExperimentConfig {
  // Data.
  std::string dataset = "energy_like";  ///< "energy_like", "idx", or a CSV path
  std::string images;                   ///< IDX image file when dataset = idx
  std::string labels;                   ///< IDX label file when dataset = idx
  std::string target;                   ///< CSV target column; empty = last
  data::Task task = data::Task::regression;
  std::uint64_t data_seed = 2012;       ///< noise seed of the built-in set
  std::vector<double> split;            ///< empty = dataset default
  std::uint64_t split_seed = 0;

  // Model and schedule.
  std::vector<std::size_t> hidden{50};
  std::vector<Setting> settings{Setting::random};
  std::size_t epochs = 4000;
  std::size_t steps = 0;       ///< total weight steps; overrides epochs when > 0
  std::size_t batch_size = 0;  ///< 0 = full batch
  std::size_t T = 10;
  std::size_t i = 5;
  std::size_t window = 0;  ///< exact-unroll window; 0 = i (clamped to [1, T])
  std::size_t n_trials = 20;
  std::uint64_t master_seed = 0;

  // Meta-optimisation.
  update::AdamConfig meta;
  bool clip_lr = true;
  InitRanges ranges;

  // Statistics.
  std::size_t n_boot = 1000;
  double outlier_threshold = 1e3;

  // Sensitivity grid.
  std::vector<std::size_t> grid_T{1, 10, 50};
  std::vector<std::size_t> grid_i{1, 5, 20};
  std::size_t hyper_updates = 400;
  Setting grid_setting = Setting::ours_wd_lr_m;

  // Hypergradient accuracy check.
  std::size_t check_warmup = 0;  ///< weight steps before the check; 0 = T
  std::size_t check_max_params = 200;
  double check_tolerance_dense = 0.0;  ///< 0 = report only
  double check_tolerance_exact = 0.0;
  double check_tolerance_solve = 0.0;

  /// Split fractions after applying the dataset default.
  data::Fractions fractions() const;
  /// Weight steps per trial for the given number of training rows.
  std::size_t total_steps(std::size_t n_train) const;
  /// Exact-unroll window actually used.
  std::size_t unroll_window() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigField {
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

/// Every overridable configuration key.
const std::vector<ConfigField>& config_fields();

/// Throws ConfigError on an unknown key or unparsable value.
void set_field(ExperimentConfig& c, std::string_view key, std::string_view value);
/// Applies "key=value".
void apply_override(ExperimentConfig& c, std::string_view assignment);

/// Flat "key = value" lines; '#' starts a comment; lists are comma separated.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
/// Throws ConfigError for parse problems and std::runtime_error if unreadable.
ExperimentConfig load_config(const std::filesystem::path& path);
/// Checks ranges and cross-field constraints.
void validate(const ExperimentConfig& c);
/// Round-trippable text of every field.
std::string to_text(const ExperimentConfig& c);

}  // namespace onepass::harness
