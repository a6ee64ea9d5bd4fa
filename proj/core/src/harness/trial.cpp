#include "onepass/harness/trial.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "onepass/update/meta.hpp"

namespace onepass::harness {
namespace {

constexpr std::uint64_t kTrialStream = 1;
constexpr std::uint64_t kBatchedStream = 2;

using Clock = std::chrono::steady_clock;

hypergrad::LossFn loss_on(const Prepared& p, const model::MlpSpec& spec, const model::Batch* batch) {
  return [&p, &spec, batch](ad::Graph&, std::span<const ad::Var> w, const update::BoundHypers&) {
    return model::loss(spec, w, *batch, p.loss);
  };
}

double mean_natural(const update::HyperEntry& e) {
  double s = 0.0;
  for (std::size_t k = 0; k < e.internal.size(); ++k) s += e.natural(k);
  return s / static_cast<double>(e.internal.size());
}

// Cycles through a portion in seeded mini-batches, reshuffling per pass.
class BatchStream {
 public:
  BatchStream(const Prepared& p, std::vector<std::size_t> portion, const model::Batch& full, std::size_t batch_size,
              std::uint64_t seed)
      : p_(p), portion_(std::move(portion)), full_(full), seed_(seed) {
    batch_size_ = batch_size == 0 ? portion_.size() : std::min(batch_size, portion_.size());
  }

  bool full_batch() const { return batch_size_ == portion_.size(); }

  const model::Batch& next() {
    if (full_batch()) return full_;
    if (cursor_ == slices_.size()) {
      slices_ = data::batches(portion_, batch_size_, seed_, epoch_++);
      cursor_ = 0;
    }
    current_ = data::make_batch(p_.dataset, slices_[cursor_++]);
    return current_;
  }

 private:
  const Prepared& p_;
  std::vector<std::size_t> portion_;
  const model::Batch& full_;
  std::size_t batch_size_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t epoch_ = 0;
  std::vector<std::vector<std::size_t>> slices_;
  std::size_t cursor_ = 0;
  model::Batch current_;
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ stream) ^ index);
}

data::Dataset load_dataset(const ExperimentConfig& c) {
  if (c.dataset == "energy_like") return data::energy_like(c.data_seed);
  if (c.dataset == "idx") return data::load_idx(c.images, c.labels);
  return data::load_csv(c.dataset, c.target, c.task);
}

Prepared prepare(const ExperimentConfig& c) { return prepare(c, load_dataset(c)); }

Prepared prepare(const ExperimentConfig& c, const data::Dataset& raw) {
  Prepared p;
  p.split = data::split(raw.rows(), c.fractions(), c.split_seed);
  p.dataset = data::standardise(raw, p.split);
  const bool classify = raw.task == data::Task::classification;
  p.loss = classify ? model::LossKind::cross_entropy : model::LossKind::mse;
  p.spec = model::MlpSpec{.input_dim = raw.features(),
                          .hidden_dims = c.hidden,
                          .output_dim = classify ? raw.classes() : 1};
  p.spec.validate();
  p.train = data::make_batch(p.dataset, p.split.train);
  p.val = data::make_batch(p.dataset, p.split.val);
  p.test = data::make_batch(p.dataset, p.split.test);
  p.train_val_idx = p.split.train;
  p.train_val_idx.insert(p.train_val_idx.end(), p.split.val.begin(), p.split.val.end());
  p.train_val = data::make_batch(p.dataset, p.train_val_idx);
  return p;
}

update::HyperVector sample_init(const InitRanges& r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&](const Range& range) { return std::uniform_real_distribution<double>(range.min, range.max)(rng); };
  const double log_lr = draw(r.log10_lr);
  const double log_wd = draw(r.log10_wd);
  // Natural-space draw; the open interval keeps the logit finite.
  const double momentum = std::clamp(draw(r.momentum), 1e-12, 1.0 - 1e-12);
  const double multiplier = draw(r.lr_multiplier);

  update::HyperVector h;
  h.add(std::string(update::kLr), update::Transform::log10, 1.0);
  h.at(update::kLr).internal = {log_lr};
  h.add(std::string(update::kWd), update::Transform::log10, 1.0);
  h.at(update::kWd).internal = {log_wd};
  h.add(std::string(update::kMomentum), update::Transform::inverse_sigmoid, momentum);
  h.add(std::string(update::kLrMultiplier), update::Transform::identity, multiplier, false);
  return h;
}

update::HyperVector configure_hypers(update::HyperVector lambda, Setting s, std::size_t n_params) {
  for (const auto& e : lambda.entries()) lambda.set_optimisable(e.name, false);
  auto on = [&](std::string_view name) { lambda.set_optimisable(name, true); };
  switch (s) {
    case Setting::random:
    case Setting::random_xlr:
    case Setting::random_3batched: break;
    case Setting::lorraine: on(update::kWd); break;
    case Setting::baydin: on(update::kLr); break;
    case Setting::ours_wd_lr:
      on(update::kLr);
      on(update::kWd);
      break;
    case Setting::ours_wd_hdlr_m: lambda.expand(update::kLr, n_params); [[fallthrough]];
    case Setting::ours_wd_lr_m:
    case Setting::diff_through_opt:
      on(update::kLr);
      on(update::kWd);
      on(update::kMomentum);
      break;
  }
  return lambda;
}

std::string_view status_name(Status s) { return s == Status::ok ? "ok" : "diverged_nan"; }

std::uint64_t trial_seed(const ExperimentConfig& c, Setting s, std::size_t k) {
  if (s == Setting::random_3batched) return derive_seed(c.master_seed, kBatchedStream, k);
  return derive_seed(c.master_seed, kTrialStream, k);
}

RunRecord run_trial(const ExperimentConfig& c, const Prepared& p, Setting s, std::size_t trial_id, std::uint64_t seed,
                    const TrialOptions& options) {
  const bool random = is_random(s);
  const std::vector<std::size_t>& portion = random ? p.train_val_idx : p.split.train;
  const model::Batch& full_train = random ? p.train_val : p.train;
  const std::size_t steps = options.total_steps > 0 ? options.total_steps : c.total_steps(portion.size());
  const std::size_t window = c.unroll_window();

  model::MlpSpec spec = p.spec;
  spec.init_seed = derive_seed(seed, 1, 0);
  ad::TensorList w = model::init_weights(spec);
  update::SgdState state = update::zero_state(w);
  update::HyperVector lambda = configure_hypers(sample_init(c.ranges, derive_seed(seed, 0, 0)), s, ad::total_size(w));
  update::MetaOptimiser opt(lambda.optimisable_size(), c.meta);
  const double multiplier = lambda.natural(update::kLrMultiplier);
  const double log_multiplier = std::log10(multiplier);

  BatchStream train_stream(p, portion, full_train, c.batch_size, derive_seed(seed, 2, 0));
  BatchStream val_stream(p, p.split.val, p.val, c.batch_size, derive_seed(seed, 3, 0));
  const hypergrad::UpdateFn rule = hypergrad::sgd_rule();

  RunRecord rec;
  rec.trial_id = trial_id;
  rec.seed = seed;
  rec.setting = s;
  rec.init_lr = lambda.natural(update::kLr);
  rec.init_wd = lambda.natural(update::kWd);
  rec.init_momentum = lambda.natural(update::kMomentum);
  rec.lr_multiplier = multiplier;

  auto snapshot = [&](std::size_t step) {
    if (!options.snapshots) return;
    rec.snapshots.push_back(Snapshot{step, model::evaluate_loss(spec, w, p.train, p.loss),
                                     model::evaluate_loss(spec, w, p.val, p.loss),
                                     model::evaluate_loss(spec, w, p.test, p.loss), mean_natural(lambda.at(update::kLr)),
                                     lambda.natural(update::kWd), lambda.natural(update::kMomentum)});
  };
  snapshot(0);

  ad::TensorList last_grad;
  ad::TensorList window_w;
  update::SgdState window_state;
  std::vector<model::Batch> window_batches;
  bool diverged = false;
  Clock::duration elapsed{};
  auto started = Clock::now();

  for (std::size_t step = 0; step < steps && !diverged; ++step) {
    const model::Batch& batch = train_stream.next();
    const std::size_t in_block = step % c.T;
    if (s == Setting::diff_through_opt && in_block + window >= c.T) {
      if (in_block + window == c.T) {
        window_w = w;
        window_state = state;
        window_batches.clear();
      }
      window_batches.push_back(batch);
    }

    model::LossAndGrad lg = model::loss_and_grad(spec, w, batch, p.loss);
    if (!std::isfinite(lg.loss) || !ad::all_finite(lg.grad)) {
      diverged = true;
      break;
    }
    update::SgdStep sgd = update::sgd_update(lambda, w, state, lg.grad);
    ad::axpy(w, -1.0, sgd.u);
    state = std::move(sgd.state);
    last_grad = std::move(lg.grad);
    ++rec.weight_steps;
    if (!ad::all_finite(w)) {
      diverged = true;
      break;
    }
    if (s == Setting::random_xlr) {
      for (double& x : lambda.at(update::kLr).internal) x += log_multiplier;
      if (c.clip_lr) lambda = update::clip_lr(std::move(lambda));
    }
    if ((step + 1) % c.T != 0) continue;

    if (!random) {
      const model::Batch& val_batch = val_stream.next();
      const hypergrad::LossFn val_fn = loss_on(p, spec, &val_batch);
      const hypergrad::LossFn train_fn = loss_on(p, spec, &batch);
      std::vector<double> g;
      bool bad = false;
      if (s == Setting::baydin) {
        const hypergrad::ValidationGrad vg = hypergrad::validation_gradient(val_fn, lambda, w);
        g = {hypergrad::baydin_hypergradient_log10(vg.dw, last_grad, lambda.natural(update::kLr))};
        bad = !std::isfinite(g.front());
      } else {
        hypergrad::Hypergradient h;
        if (s == Setting::lorraine) {
          h = hypergrad::lorraine_hypergradient(train_fn, val_fn, rule, lambda, w, state, c.i);
        } else if (s == Setting::diff_through_opt) {
          std::vector<hypergrad::LossFn> fns;
          for (const auto& b : window_batches) fns.push_back(loss_on(p, spec, &b));
          h = hypergrad::exact_unrolled_hypergradient(fns, val_fn, rule, lambda, window_w, window_state);
        } else {
          h = hypergrad::neumann_hypergradient(train_fn, val_fn, rule, lambda, w, state, c.i);
        }
        bad = h.diverged;
        g = h.masked_total(lambda);
      }
      if (bad || !update::meta_step(opt, lambda, g, c.clip_lr)) {
        diverged = true;
        break;
      }
      ++rec.hyper_steps;
    }
    elapsed += Clock::now() - started;
    snapshot(step + 1);
    started = Clock::now();
  }
  elapsed += Clock::now() - started;
  rec.wall_seconds = std::chrono::duration<double>(elapsed).count();

  if (diverged) {
    rec.status = Status::diverged_nan;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.final_train_loss = rec.final_val_loss = rec.final_test_loss = rec.final_test_loss_raw = nan;
    return rec;
  }
  rec.final_train_loss = model::evaluate_loss(spec, w, p.train, p.loss);
  rec.final_val_loss = model::evaluate_loss(spec, w, p.val, p.loss);
  rec.final_test_loss = model::evaluate_loss(spec, w, p.test, p.loss);
  rec.final_test_loss_raw =
      p.loss == model::LossKind::mse ? rec.final_test_loss * data::mse_scale(p.dataset.stats) : rec.final_test_loss;
  for (double v : {rec.final_train_loss, rec.final_val_loss, rec.final_test_loss}) {
    if (!std::isfinite(v)) rec.status = Status::diverged_nan;
  }
  rec.outlier = p.loss == model::LossKind::cross_entropy && rec.final_test_loss > c.outlier_threshold;
  return rec;
}

}  // namespace onepass::harness
