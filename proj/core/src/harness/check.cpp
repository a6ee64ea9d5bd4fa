#include "onepass/harness/check.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "onepass/hypergrad/dense.hpp"

namespace onepass::harness {
namespace {

hypergrad::LossFn loss_on(const model::MlpSpec& spec, const model::Batch& batch, model::LossKind kind) {
  return [&spec, &batch, kind](ad::Graph&, std::span<const ad::Var> w, const update::BoundHypers&) {
    return model::loss(spec, w, batch, kind);
  };
}

std::vector<std::string> component_names(const update::HyperVector& lambda) {
  std::vector<std::string> out;
  for (const auto& e : lambda.entries()) {
    if (!e.optimisable) continue;
    if (e.internal.size() == 1) {
      out.push_back(e.name);
    } else {
      for (std::size_t k = 0; k < e.internal.size(); ++k) out.push_back(fmt::format("{}[{}]", e.name, k));
    }
  }
  return out;
}

double max_finite(double acc, double v) { return std::isnan(v) ? acc : std::max(acc, v); }

std::string num(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : "nan"; }

}  // namespace

Setting check_setting(const ExperimentConfig& c) {
  for (Setting s : c.settings)
    if (!is_random(s) && s != Setting::baydin) return s;
  return Setting::ours_wd_lr_m;
}

CheckReport hypergrad_check(const ExperimentConfig& c, const Prepared& p) {
  CheckReport report;
  report.setting = check_setting(c);
  report.params = p.spec.parameter_count();
  if (report.params > c.check_max_params) {
    throw ConfigError(fmt::format("hypergrad-check needs at most {} weights (check_max_params), model has {}",
                                  c.check_max_params, report.params));
  }
  const std::size_t warmup = c.check_warmup > 0 ? c.check_warmup : c.T;
  report.window = std::min(c.unroll_window(), warmup);
  const hypergrad::UpdateFn rule = hypergrad::sgd_rule();
  const hypergrad::LossFn train_fn = loss_on(p.spec, p.train, p.loss);
  const hypergrad::LossFn val_fn = loss_on(p.spec, p.val, p.loss);

  for (std::size_t k = 0; k < c.n_trials; ++k) {
    const std::uint64_t seed = trial_seed(c, report.setting, k);
    model::MlpSpec spec = p.spec;
    spec.init_seed = derive_seed(seed, 1, 0);
    ad::TensorList w = model::init_weights(spec);
    update::SgdState state = update::zero_state(w);
    const update::HyperVector lambda =
        configure_hypers(sample_init(c.ranges, derive_seed(seed, 0, 0)), report.setting, report.params);

    ad::TensorList window_w;
    update::SgdState window_state;
    bool diverged = false;
    for (std::size_t step = 0; step < warmup; ++step) {
      if (step + report.window == warmup) {
        window_w = w;
        window_state = state;
      }
      const model::LossAndGrad lg = model::loss_and_grad(spec, w, p.train, p.loss);
      update::SgdStep s = update::sgd_update(lambda, w, state, lg.grad);
      ad::axpy(w, -1.0, s.u);
      state = std::move(s.state);
      if (!std::isfinite(lg.loss) || !ad::all_finite(w)) {
        diverged = true;
        break;
      }
    }
    if (diverged) {
      ++report.diverged;
      continue;
    }

    const hypergrad::LinearisedUpdate lin(train_fn, rule, lambda, w, state);
    const hypergrad::ValidationGrad vg = hypergrad::validation_gradient(val_fn, lambda, w);
    const hypergrad::Hypergradient hn = hypergrad::neumann_from_seed(lin, vg, c.i, lambda);
    const hypergrad::DenseJacobians dense = hypergrad::dense_jacobians(lin, vg);
    const hypergrad::Hypergradient hd = hypergrad::dense_series_hypergradient(dense, c.i, lambda);
    const hypergrad::Hypergradient hs = hypergrad::dense_solve_hypergradient(dense, lambda);
    const std::vector<hypergrad::LossFn> window_fns(report.window, train_fn);
    const hypergrad::Hypergradient he =
        hypergrad::exact_unrolled_hypergradient(window_fns, val_fn, rule, lambda, window_w, window_state);
    if (hn.diverged) ++report.diverged;

    const auto n = hn.masked_total(lambda);
    const auto d = hd.masked_total(lambda);
    const auto e = he.masked_total(lambda);
    const auto s = hs.masked_total(lambda);
    const auto ed = hypergrad::hypergradient_error(n, d);
    const auto ee = hypergrad::hypergradient_error(n, e);
    const auto es = hypergrad::hypergradient_error(n, s);
    const auto names = component_names(lambda);
    for (std::size_t j = 0; j < n.size(); ++j) {
      report.rows.push_back({k, names[j], n[j], d[j], e[j], s[j], ed[j], ee[j], es[j]});
      report.max_err_dense = max_finite(report.max_err_dense, ed[j]);
      report.max_err_exact = max_finite(report.max_err_exact, ee[j]);
      report.max_err_solve = max_finite(report.max_err_solve, es[j]);
    }
  }

  auto limit = [&](double err, double tol, std::string_view what) {
    if (tol > 0.0 && !(err <= tol))
      report.failures.push_back(fmt::format("neumann vs {}: max relative error {:.3e} > {:.3e}", what, err, tol));
  };
  limit(report.max_err_dense, c.check_tolerance_dense, "dense series");
  limit(report.max_err_exact, c.check_tolerance_exact, "exact unroll");
  limit(report.max_err_solve, c.check_tolerance_solve, "dense solve");
  return report;
}

std::string check_csv(const CheckReport& r) {
  std::string out = "trial,hyper,neumann,dense_series,exact_unrolled,dense_solve,err_dense,err_exact,err_solve\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", row.trial, row.hyper, num(row.neumann), num(row.dense_series),
                       num(row.exact_unrolled), num(row.dense_solve), num(row.err_dense), num(row.err_exact),
                       num(row.err_solve));
  }
  return out;
}

std::string format_check(const CheckReport& r) {
  std::string out = fmt::format("setting {}, {} weights, exact window {}, {} diverged\n", setting_name(r.setting),
                                r.params, r.window, r.diverged);
  out += fmt::format("{:>5} {:<10} {:>13} {:>11} {:>11} {:>11}\n", "trial", "hyper", "neumann", "err_dense",
                     "err_exact", "err_solve");
  for (const auto& row : r.rows) {
    out += fmt::format("{:>5} {:<10} {:>13.6g} {:>11.3e} {:>11.3e} {:>11.3e}\n", row.trial, row.hyper, row.neumann,
                       row.err_dense, row.err_exact, row.err_solve);
  }
  out += fmt::format("max error: dense {:.3e}, exact {:.3e}, solve {:.3e}\n", r.max_err_dense, r.max_err_exact,
                     r.max_err_solve);
  for (const auto& f : r.failures) out += fmt::format("FAIL {}\n", f);
  return out;
}

}  // namespace onepass::harness
