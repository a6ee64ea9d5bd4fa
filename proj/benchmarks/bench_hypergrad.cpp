#include <benchmark/benchmark.h>

#include "onepass/harness/experiment.hpp"
#include "onepass/update/meta.hpp"

namespace {

using namespace onepass;

struct Fixture {
  harness::ExperimentConfig config;
  harness::Prepared prepared;
  ad::TensorList w;
  update::SgdState state;
  update::HyperVector lambda;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    f.prepared = harness::prepare(f.config);
    model::MlpSpec spec = f.prepared.spec;
    f.w = model::init_weights(spec);
    f.state = update::zero_state(f.w);
    f.lambda = harness::configure_hypers(harness::sample_init({}, 1), harness::Setting::ours_wd_lr_m,
                                         ad::total_size(f.w));
    return f;
  }();
  return f;
}

hypergrad::LossFn loss_on(const harness::Prepared& p, const model::Batch& b) {
  return [&p, &b](ad::Graph&, std::span<const ad::Var> w, const update::BoundHypers&) {
    return model::loss(p.spec, w, b, p.loss);
  };
}

void BM_WeightStep(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    const model::LossAndGrad lg = model::loss_and_grad(f.prepared.spec, f.w, f.prepared.train, f.prepared.loss);
    benchmark::DoNotOptimize(update::sgd_update(f.lambda, f.w, f.state, lg.grad));
  }
}
BENCHMARK(BM_WeightStep);

void BM_Neumann(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto i = static_cast<std::size_t>(state.range(0));
  const auto train = loss_on(f.prepared, f.prepared.train);
  const auto val = loss_on(f.prepared, f.prepared.val);
  const auto rule = hypergrad::sgd_rule();
  for (auto _ : state)
    benchmark::DoNotOptimize(hypergrad::neumann_hypergradient(train, val, rule, f.lambda, f.w, f.state, i));
}
BENCHMARK(BM_Neumann)->Arg(0)->Arg(1)->Arg(5)->Arg(20);

void BM_ExactUnroll(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto window = static_cast<std::size_t>(state.range(0));
  const std::vector<hypergrad::LossFn> train(window, loss_on(f.prepared, f.prepared.train));
  const auto val = loss_on(f.prepared, f.prepared.val);
  const auto rule = hypergrad::sgd_rule();
  for (auto _ : state)
    benchmark::DoNotOptimize(hypergrad::exact_unrolled_hypergradient(train, val, rule, f.lambda, f.w, f.state));
}
BENCHMARK(BM_ExactUnroll)->Arg(1)->Arg(5)->Arg(10);

void BM_MetaStep(benchmark::State& state) {
  const Fixture& f = fixture();
  update::MetaOptimiser opt(f.lambda.optimisable_size(), {});
  const std::vector<double> g(f.lambda.optimisable_size(), 1e-3);
  update::HyperVector lambda = f.lambda;
  for (auto _ : state) benchmark::DoNotOptimize(update::meta_step(opt, lambda, g));
}
BENCHMARK(BM_MetaStep);

// One block of T = 10 weight steps plus one Neumann hypergradient (i = 5).
void BM_TrialBlock(benchmark::State& state) {
  const Fixture& f = fixture();
  harness::ExperimentConfig c = f.config;
  c.steps = 10;
  c.settings = {harness::Setting::ours_wd_lr_m};
  const harness::TrialOptions opts{.total_steps = 10, .snapshots = false};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        harness::run_trial(c, f.prepared, static_cast<harness::Setting>(state.range(0)), 0, 1, opts));
}
BENCHMARK(BM_TrialBlock)
    ->Arg(static_cast<int>(harness::Setting::random))
    ->Arg(static_cast<int>(harness::Setting::ours_wd_lr_m))
    ->Arg(static_cast<int>(harness::Setting::ours_wd_hdlr_m))
    ->Arg(static_cast<int>(harness::Setting::diff_through_opt));

}  // namespace

int main(int argc, char** argv) {
  onepass::harness::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
