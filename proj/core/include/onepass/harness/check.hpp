#pragma once

#include <string>
#include <vector>

#include "onepass/harness/trial.hpp"

namespace onepass::harness {

/// One optimisable hyperparameter component of one trial.
struct CheckRow {
  std::size_t trial = 0;
  std::string hyper;  ///< "lr", "wd", "momentum" or "lr[k]" when per-parameter
  double neumann = 0.0;
  double dense_series = 0.0;
  double exact_unrolled = 0.0;
  double dense_solve = 0.0;
  double err_dense = 0.0;  ///< relative error of neumann vs each reference
  double err_exact = 0.0;
  double err_solve = 0.0;
};

struct CheckReport {
  Setting setting = Setting::ours_wd_lr_m;
  std::size_t params = 0;
  std::size_t window = 0;
  std::vector<CheckRow> rows;
  std::size_t diverged = 0;  ///< trials that diverged during warm-up
  double max_err_dense = 0.0;
  double max_err_exact = 0.0;
  double max_err_solve = 0.0;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

/// Setting whose mask the check uses: the first optimising setting in the
/// config other than Baydin, else ours_wd_lr_m.
Setting check_setting(const ExperimentConfig& c);

/// Trains check_warmup full-batch steps, then compares the Neumann
/// hypergradient with the dense-matrix series, an exact unroll over the last
/// unroll_window() steps and the dense solve. Throws ConfigError when the
/// model has more than check_max_params weights.
CheckReport hypergrad_check(const ExperimentConfig& c, const Prepared& p);

std::string check_csv(const CheckReport& r);
std::string format_check(const CheckReport& r);

}  // namespace onepass::harness
