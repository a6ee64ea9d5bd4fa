// onepass: command-line driver for experiments and diagnostics.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "onepass/autodiff/gradcheck.hpp"
#include "onepass/harness/check.hpp"
#include "onepass/harness/export.hpp"

namespace fs = std::filesystem;
using namespace onepass;
using namespace onepass::harness;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfigError = 2, kIoError = 3 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "results";
  std::size_t jobs = 0;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c, bool with_out = true) {
  sub->add_option("--config", c.config, "config file of key = value lines");
  sub->add_option("--set", c.sets, "override KEY=VALUE (repeatable, several per flag allowed)")->expected(1, -1);
  if (with_out) sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--jobs", c.jobs, "worker threads (default: ONEPASS_JOBS or all cores)");
  c.seed_opt = sub->add_option("--seed", c.seed, "master seed");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    if (!fs::is_regular_file(c.config)) throw IoError(fmt::format("cannot read config '{}'", c.config));
    cfg = load_config(c.config);
  }
  for (const auto& s : c.sets) apply_override(cfg, s);
  if (c.seed_opt != nullptr && c.seed_opt->count() > 0) cfg.master_seed = c.seed;
  validate(cfg);
  return cfg;
}

std::size_t jobs_of(const Common& c) { return c.jobs > 0 ? c.jobs : default_jobs(); }

Progress progress_line(std::string_view what) {
  return [what = std::string(what)](std::size_t done, std::size_t total) {
    std::fprintf(stderr, "\r%s %zu/%zu", what.c_str(), done, total);
    if (done == total) std::fputc('\n', stderr);
  };
}

Prepared prepare_or_io(const ExperimentConfig& cfg) {
  try {
    return prepare(cfg);
  } catch (const data::DataError& e) {
    throw IoError(e.what());
  }
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Prepared p = prepare_or_io(cfg);
  const ExperimentResult r = run_experiment(cfg, p, jobs_of(c), progress_line("trials"));
  export_experiment(r, c.out);
  std::cout << format_table(r);
  std::cout << fmt::format("wrote {}\n", c.out);
  return kOk;
}

int cmd_grid(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Prepared p = prepare_or_io(cfg);
  const GridResult g = run_grid(cfg, p, jobs_of(c), progress_line("grid trials"));
  export_grid(g, cfg, c.out);
  std::cout << format_grid(g);
  std::cout << fmt::format("wrote {}\n", (fs::path(c.out) / "grid.csv").string());
  return kOk;
}

// Deliberately wrong derivative; lets the failure path be exercised end to end.
std::shared_ptr<const ad::CustomUnary> corrupted_square() {
  return std::make_shared<ad::CustomUnary>(ad::CustomUnary{
      "corrupt_square", [](double x) { return x * x; }, [](double x) { return 2.0 * x + 0.1; }});
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
  ad::GradcheckOptions opts;
  if (seed != 0) opts.seed = seed;
  std::vector<ad::PrimitiveCase> cases = ad::builtin_cases(opts.seed);
  if (corrupt) cases.push_back(ad::custom_case(corrupted_square(), opts.seed));

  bool ok = true;
  std::cout << fmt::format("{:<18} {:>14} {:>14}  {}\n", "primitive", "first-order", "second-order", "result");
  for (const auto& rep : ad::run_gradcheck(cases, opts)) {
    ok = ok && rep.passed;
    std::cout << fmt::format("{:<18} {:>14.3e} {:>14.3e}  {}\n", rep.name, rep.first_order_error,
                             rep.second_order_error, rep.passed ? "ok" : "FAIL");
    if (!rep.passed) std::cout << fmt::format("  {}: {}\n", rep.name, rep.failure);
  }

  // Neumann recursion against the explicitly assembled matrix series on a tiny model.
  ExperimentConfig cfg;
  cfg.hidden = {1};
  cfg.n_trials = 3;
  cfg.check_tolerance_dense = 1e-8;
  const Prepared p = prepare(cfg);
  for (std::size_t i : {0, 1, 5, 20}) {
    cfg.i = i;
    const CheckReport r = hypergrad_check(cfg, p);
    ok = ok && r.passed();
    std::cout << fmt::format("{:<18} {:>14.3e} {:>14}  {}\n", fmt::format("dense_series_i{}", i), r.max_err_dense, "-",
                             r.passed() ? "ok" : "FAIL");
  }
  return ok ? kOk : kCheckFailed;
}

int cmd_hypergrad_check(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Prepared p = prepare_or_io(cfg);
  const CheckReport r = hypergrad_check(cfg, p);
  write_text(fs::path(c.out) / "hypergrad_check.csv", check_csv(r));
  std::cout << format_check(r);
  return r.passed() ? kOk : kCheckFailed;
}

int cmd_export_cdf(const Common& c, const std::string& records_path) {
  const ExperimentConfig cfg = resolve(c);
  std::ifstream in(records_path);
  if (!in) throw IoError(fmt::format("cannot read records '{}'", records_path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("{}: {}", records_path, e.what()));
  }
  const std::vector<SettingResult> settings = records_from_json(j, cfg);
  const fs::path out = fs::path(c.out) / "cdf.csv";
  write_text(out, cdf_csv(settings));
  std::cout << fmt::format("wrote {}\n", out.string());
  return kOk;
}

std::string help_text(const std::string& usage) {
  std::string out = usage;
  out += "\nConfiguration keys (set in --config files or with --set KEY=VALUE):\n";
  const ExperimentConfig defaults;
  for (const auto& f : config_fields())
    out += fmt::format("  {:<24} {} [default: {}]\n", f.key, f.help, f.get(defaults));
  out += "\nEnvironment: ONEPASS_JOBS sets the default worker count.\n";
  out += "Exit codes: 0 success, 1 check failure, 2 config error, 3 I/O error.\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"onepass: one-pass gradient-based hyperparameter optimisation"};
  app.require_subcommand(1);

  Common run_opts, grid_opts, check_opts, cdf_opts;
  auto* run = app.add_subcommand("run", "run the configured settings over n_trials seeds");
  add_common(run, run_opts);
  auto* grid = app.add_subcommand("grid", "sensitivity grid over grid_T x grid_i");
  add_common(grid, grid_opts);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference and dense-oracle self checks");
  std::uint64_t gradcheck_seed = 0;
  bool corrupt = false;
  gradcheck->add_option("--seed", gradcheck_seed, "input sampling seed");
  gradcheck->add_flag("--corrupt-fixture", corrupt, "add a primitive with a wrong derivative (expected to fail)")
      ->group("");
  auto* hcheck = app.add_subcommand("hypergrad-check", "compare Neumann, exact unroll and dense hypergradients");
  add_common(hcheck, check_opts);
  auto* cdf = app.add_subcommand("export-cdf", "rebuild cdf.csv from a records.json");
  add_common(cdf, cdf_opts);
  std::string records_path;
  cdf->add_option("--records", records_path, "records.json written by run")->required();
  auto* help = app.add_subcommand("help", "print usage and every configuration key");

  const std::string usage = app.help();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << help_text(usage);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (help->parsed()) {
      std::cout << help_text(usage);
      return kOk;
    }
    if (run->parsed()) return cmd_run(run_opts);
    if (grid->parsed()) return cmd_grid(grid_opts);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_seed, corrupt);
    if (hcheck->parsed()) return cmd_hypergrad_check(check_opts);
    if (cdf->parsed()) return cmd_export_cdf(cdf_opts, records_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kConfigError;
}
