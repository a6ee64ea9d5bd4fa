#pragma once

#include <functional>
#include <vector>

#include "onepass/harness/stats.hpp"

namespace onepass::harness {

struct SettingResult {
  Setting setting = Setting::random;
  std::vector<RunRecord> runs;      ///< every trial executed
  std::vector<RunRecord> reported;  ///< after best-of-three for Random 3-batched
  SummaryStats stats;
  double mean_runtime_s = 0.0;
  double median_runtime_s = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SettingResult> settings;
};

using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// Raises the glibc trim and mmap thresholds so per-step temporaries reuse
/// heap pages instead of faulting fresh ones. No-op elsewhere. Call once from
/// main before running trials.
void tune_allocator();

/// Worker count from ONEPASS_JOBS, else the hardware concurrency.
std::size_t default_jobs();

/// Calls body(k) for k in [0, n) on up to `jobs` threads. The first exception
/// thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body,
                  const Progress& progress = {});

/// Every configured setting over n_trials seeds. Results do not depend on
/// `jobs`.
ExperimentResult run_experiment(const ExperimentConfig& c, const Prepared& p, std::size_t jobs,
                                const Progress& progress = {});

/// Per-setting statistics from reported records; deterministic in the seed.
SettingResult summarise(Setting s, std::vector<RunRecord> runs, const ExperimentConfig& c);

struct GridCell {
  std::size_t T = 0;
  std::size_t i = 0;
  SummaryStats stats;
  std::vector<RunRecord> runs;
};

struct GridBaseline {
  std::size_t T = 0;
  SummaryStats stats;
  std::vector<RunRecord> runs;
};

struct GridResult {
  std::vector<GridCell> cells;     ///< row-major over grid_T then grid_i
  std::vector<GridBaseline> random;  ///< Random with the same step budget per T
};

/// grid_setting over every (T, i) with hyper_updates * T weight steps per
/// trial, plus a Random baseline per T.
GridResult run_grid(const ExperimentConfig& c, const Prepared& p, std::size_t jobs, const Progress& progress = {});

}  // namespace onepass::harness
