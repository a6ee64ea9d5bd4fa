#include "onepass/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace onepass::harness {
namespace {

constexpr std::uint64_t kStatsStream = 3;
constexpr std::uint64_t kGridStream = 4;

struct Task {
  Setting setting;
  std::size_t k;
  std::uint64_t seed;
  std::size_t steps;
};

std::vector<double> runtimes(const std::vector<RunRecord>& rs) {
  std::vector<double> out;
  for (const auto& r : rs) out.push_back(r.wall_seconds);
  return out;
}

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

std::size_t default_jobs() {
  if (const char* env = std::getenv("ONEPASS_JOBS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body,
                  const Progress& progress) {
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        body(k);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(mu);
        progress(d, n);
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

SettingResult summarise(Setting s, std::vector<RunRecord> runs, const ExperimentConfig& c) {
  SettingResult out;
  out.setting = s;
  out.runs = std::move(runs);
  if (s == Setting::random_3batched) {
    out.reported = batch_best_of_k(out.runs, 3);
    // A reported trial costs its whole group.
    for (std::size_t g = 0; g < out.reported.size(); ++g) {
      double total = 0.0;
      for (std::size_t j = 3 * g; j < std::min(out.runs.size(), 3 * g + 3); ++j) total += out.runs[j].wall_seconds;
      out.reported[g].wall_seconds = total;
    }
  } else {
    out.reported = out.runs;
  }
  const std::vector<double> metrics = final_metrics(out.reported);
  out.stats = bootstrap_stats(metrics, c.n_boot, derive_seed(c.master_seed, kStatsStream, static_cast<std::size_t>(s)));
  const std::vector<double> times = runtimes(out.reported);
  out.mean_runtime_s = times.empty() ? 0.0 : std::accumulate(times.begin(), times.end(), 0.0) / times.size();
  out.median_runtime_s = median(times);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& c, const Prepared& p, std::size_t jobs,
                                const Progress& progress) {
  std::vector<Task> tasks;
  std::vector<std::size_t> first;
  for (Setting s : c.settings) {
    first.push_back(tasks.size());
    const std::size_t n = s == Setting::random_3batched ? 3 * c.n_trials : c.n_trials;
    for (std::size_t k = 0; k < n; ++k) tasks.push_back({s, k, trial_seed(c, s, k), 0});
  }
  first.push_back(tasks.size());

  std::vector<RunRecord> slots(tasks.size());
  parallel_for(
      tasks.size(), jobs,
      [&](std::size_t t) {
        const Task& task = tasks[t];
        slots[t] = run_trial(c, p, task.setting, task.k, task.seed);
      },
      progress);

  ExperimentResult result;
  result.config = c;
  for (std::size_t j = 0; j < c.settings.size(); ++j) {
    std::vector<RunRecord> runs(std::make_move_iterator(slots.begin() + first[j]),
                                std::make_move_iterator(slots.begin() + first[j + 1]));
    result.settings.push_back(summarise(c.settings[j], std::move(runs), c));
  }
  return result;
}

GridResult run_grid(const ExperimentConfig& c, const Prepared& p, std::size_t jobs, const Progress& progress) {
  struct GridTask {
    std::size_t T;
    std::size_t i;
    bool baseline;
    std::size_t k;
  };
  std::vector<GridTask> tasks;
  for (std::size_t T : c.grid_T) {
    for (std::size_t i : c.grid_i)
      for (std::size_t k = 0; k < c.n_trials; ++k) tasks.push_back({T, i, false, k});
  }
  for (std::size_t T : c.grid_T)
    for (std::size_t k = 0; k < c.n_trials; ++k) tasks.push_back({T, 0, true, k});

  std::vector<RunRecord> slots(tasks.size());
  parallel_for(
      tasks.size(), jobs,
      [&](std::size_t t) {
        const GridTask& task = tasks[t];
        ExperimentConfig cell = c;
        cell.T = task.T;
        cell.i = task.i;
        const Setting s = task.baseline ? Setting::random : c.grid_setting;
        TrialOptions opts{.total_steps = c.hyper_updates * task.T, .snapshots = false};
        slots[t] = run_trial(cell, p, s, task.k, trial_seed(c, Setting::random, task.k), opts);
      },
      progress);

  GridResult out;
  std::size_t t = 0;
  std::size_t cell_index = 0;
  auto take = [&](std::size_t n) {
    std::vector<RunRecord> runs(std::make_move_iterator(slots.begin() + t),
                                std::make_move_iterator(slots.begin() + t + n));
    t += n;
    return runs;
  };
  auto stats_of = [&](const std::vector<RunRecord>& runs) {
    return bootstrap_stats(final_metrics(runs), c.n_boot, derive_seed(c.master_seed, kGridStream, cell_index++));
  };
  for (std::size_t T : c.grid_T) {
    for (std::size_t i : c.grid_i) {
      GridCell cell{.T = T, .i = i, .runs = take(c.n_trials)};
      cell.stats = stats_of(cell.runs);
      out.cells.push_back(std::move(cell));
    }
  }
  for (std::size_t T : c.grid_T) {
    GridBaseline b{.T = T, .runs = take(c.n_trials)};
    b.stats = stats_of(b.runs);
    out.random.push_back(std::move(b));
  }
  return out;
}

}  // namespace onepass::harness
