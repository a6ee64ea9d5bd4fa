#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "onepass/harness/trial.hpp"

namespace onepass::harness {

struct SummaryStats {
  double mean = 0.0;
  double mean_se = 0.0;
  double median = 0.0;
  double median_se = 0.0;
  double best = 0.0;
  std::size_t count = 0;      ///< finite values used
  std::size_t nan_count = 0;  ///< values dropped before resampling
};

/// Mean and median with bootstrap standard errors (standard deviation of the
/// resampled statistic). Non-finite values are dropped first; if nothing is
/// left every statistic is NaN.
SummaryStats bootstrap_stats(std::span<const double> values, std::size_t n_boot, std::uint64_t seed);

/// NaN-aware median: NaN when no finite value exists.
double median(std::span<const double> values);

/// Keeps the lowest final validation loss of each consecutive group of k,
/// NaN counting as +inf. A trailing partial group is its own group.
std::vector<RunRecord> batch_best_of_k(const std::vector<RunRecord>& records, std::size_t k = 3);

/// Final test metric per record on the original target scale; diverged and
/// outlier runs become NaN.
std::vector<double> final_metrics(const std::vector<RunRecord>& records);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF over the finite values, normalised by the total count so
/// NaNs keep the curve below 1.
std::vector<CdfPoint> empirical_cdf(std::span<const double> values);

}  // namespace onepass::harness
