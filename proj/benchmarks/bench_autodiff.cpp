#include <random>

#include <benchmark/benchmark.h>

#include "onepass/harness/experiment.hpp"

namespace {

using namespace onepass;

const harness::Prepared& energy() {
  static const harness::Prepared p = [] {
    harness::ExperimentConfig c;
    return harness::prepare(c);
  }();
  return p;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ad::Tensor a({n, n}, 0.5);
  ad::Tensor b({n, n}, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_LossAndGrad(benchmark::State& state) {
  const auto& p = energy();
  model::MlpSpec spec = p.spec;
  spec.hidden_dims = {static_cast<std::size_t>(state.range(0))};
  const ad::TensorList w = model::init_weights(spec);
  for (auto _ : state) benchmark::DoNotOptimize(model::loss_and_grad(spec, w, p.train, p.loss));
  state.SetLabel("full batch, energy-like");
}
BENCHMARK(BM_LossAndGrad)->Arg(10)->Arg(50)->Arg(200);

void BM_EvaluateLoss(benchmark::State& state) {
  const auto& p = energy();
  const ad::TensorList w = model::init_weights(p.spec);
  for (auto _ : state) benchmark::DoNotOptimize(model::evaluate_loss(p.spec, w, p.train, p.loss));
}
BENCHMARK(BM_EvaluateLoss);

// Hessian-vector product of the training loss through a recorded gradient.
void BM_HessianVector(benchmark::State& state) {
  const auto& p = energy();
  const ad::TensorList w0 = model::init_weights(p.spec);
  ad::TensorList v = w0;
  for (auto& t : v) t = ad::Tensor(t.shape(), 1e-2);
  for (auto _ : state) {
    ad::Graph g;
    std::vector<ad::Var> w;
    for (const auto& t : w0) w.push_back(g.parameter(t));
    const ad::Var loss = model::loss(p.spec, w, p.train, p.loss);
    const std::vector<ad::Var> gw = ad::grad_recorded(loss, w);
    benchmark::DoNotOptimize(ad::vjp(gw, v, w));
  }
}
BENCHMARK(BM_HessianVector);

}  // namespace

int main(int argc, char** argv) {
  onepass::harness::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
