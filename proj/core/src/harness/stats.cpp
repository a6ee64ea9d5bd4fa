#include "onepass/harness/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace onepass::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> finite_only(std::span<const double> values) {
  std::vector<double> out;
  for (double v : values)
    if (std::isfinite(v)) out.push_back(v);
  return out;
}

double sorted_median(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

}  // namespace

double median(std::span<const double> values) {
  std::vector<double> v = finite_only(values);
  return v.empty() ? kNaN : sorted_median(v);
}

SummaryStats bootstrap_stats(std::span<const double> values, std::size_t n_boot, std::uint64_t seed) {
  SummaryStats s;
  std::vector<double> v = finite_only(values);
  s.count = v.size();
  s.nan_count = values.size() - v.size();
  if (v.empty()) {
    s.mean = s.mean_se = s.median = s.median_se = s.best = kNaN;
    return s;
  }
  s.mean = mean_of(v);
  s.best = *std::min_element(v.begin(), v.end());
  {
    std::vector<double> tmp = v;
    s.median = sorted_median(tmp);
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
  std::vector<double> means(n_boot);
  std::vector<double> medians(n_boot);
  std::vector<double> sample(v.size());
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (double& x : sample) x = v[pick(rng)];
    means[b] = mean_of(sample);
    medians[b] = sorted_median(sample);
  }
  s.mean_se = stddev(means);
  s.median_se = stddev(medians);
  return s;
}

std::vector<RunRecord> batch_best_of_k(const std::vector<RunRecord>& records, std::size_t k) {
  std::vector<RunRecord> out;
  auto key = [](const RunRecord& r) {
    return std::isnan(r.final_val_loss) ? std::numeric_limits<double>::infinity() : r.final_val_loss;
  };
  for (std::size_t start = 0; start < records.size(); start += k) {
    const std::size_t end = std::min(records.size(), start + k);
    std::size_t best = start;
    for (std::size_t j = start + 1; j < end; ++j)
      if (key(records[j]) < key(records[best])) best = j;
    out.push_back(records[best]);
  }
  return out;
}

std::vector<double> final_metrics(const std::vector<RunRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.status == Status::ok && !r.outlier ? r.final_test_loss_raw : kNaN);
  return out;
}

std::vector<CdfPoint> empirical_cdf(std::span<const double> values) {
  std::vector<double> v = finite_only(values);
  std::sort(v.begin(), v.end());
  std::vector<CdfPoint> out;
  out.reserve(v.size());
  const double n = static_cast<double>(values.size());
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back({v[k], static_cast<double>(k + 1) / n});
  return out;
}

}  // namespace onepass::harness
