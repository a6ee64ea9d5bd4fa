#include "onepass/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace onepass::ad {
namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = u(rng_);
    return t;
  }

  // |x| in [lo, hi] with random sign; keeps kinks and poles out of reach of h.
  Tensor away_from_zero(Shape shape, double lo, double hi) {
    Tensor t = uniform(std::move(shape), lo, hi);
    std::bernoulli_distribution coin(0.5);
    for (auto& v : t.values())
      if (coin(rng_)) v = -v;
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

PrimitiveCase unary_case(std::string name, Tensor x, std::function<Var(Var)> f) {
  return PrimitiveCase{std::move(name), {std::move(x)},
                       [f = std::move(f)](Graph&, const std::vector<Var>& in) { return f(in[0]); }};
}

PrimitiveCase binary_case(std::string name, Tensor a, Tensor b, std::function<Var(Var, Var)> f) {
  return PrimitiveCase{std::move(name), {std::move(a), std::move(b)},
                       [f = std::move(f)](Graph&, const std::vector<Var>& in) { return f(in[0], in[1]); }};
}

// Scalar objective sum(out * r) with a fixed random r, so every output
// coordinate contributes to the checked gradient.
Var objective(Graph& g, Var out, std::uint64_t seed) {
  Sampler s(seed ^ 0x9e3779b97f4a7c15ULL);
  Var r = g.constant(s.uniform(out.shape(), 0.5, 1.5));
  return sum_all(mul(out, r));
}

struct Built {
  Graph graph;
  std::vector<Var> leaves;
  Var loss;
};

std::unique_ptr<Built> build(const PrimitiveCase& c, const std::vector<Tensor>& inputs, std::uint64_t seed) {
  auto b = std::make_unique<Built>();
  for (const auto& x : inputs) b->leaves.push_back(b->graph.parameter(x));
  b->loss = objective(b->graph, c.build(b->graph, b->leaves), seed);
  return b;
}

std::vector<double> gradient_at(const PrimitiveCase& c, const std::vector<Tensor>& inputs, std::uint64_t seed) {
  auto b = build(c, inputs, seed);
  return flatten(grad(b->loss, b->leaves));
}

}  // namespace

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  if (std::isnan(diff)) return diff;
  // Floor keeps identically-zero references (e.g. relu curvature) meaningful.
  return diff / std::max(scale, 1e-3);
}

std::vector<PrimitiveCase> builtin_cases(std::uint64_t seed) {
  Sampler s(seed);
  std::vector<PrimitiveCase> cases;
  cases.push_back(binary_case("add", s.uniform({3, 4}, -1, 1), s.uniform({3, 4}, -1, 1), [](Var a, Var b) { return add(a, b); }));
  cases.push_back(binary_case("sub", s.uniform({3, 4}, -1, 1), s.uniform({3, 4}, -1, 1), [](Var a, Var b) { return sub(a, b); }));
  cases.push_back(binary_case("mul", s.uniform({3, 4}, -1, 1), s.uniform({3, 4}, -1, 1), [](Var a, Var b) { return mul(a, b); }));
  cases.push_back(binary_case("div", s.uniform({3, 4}, -1, 1), s.away_from_zero({3, 4}, 0.5, 2.0),
                              [](Var a, Var b) { return div(a, b); }));
  cases.push_back(unary_case("neg", s.uniform({5}, -1, 1), [](Var a) { return neg(a); }));
  cases.push_back(unary_case("scale", s.uniform({5}, -1, 1), [](Var a) { return scale(a, -2.5); }));
  cases.push_back(PrimitiveCase{
      "matmul",
      {s.uniform({3, 4}, -1, 1), s.uniform({4, 2}, -1, 1), s.uniform({4}, -1, 1), s.uniform({3}, -1, 1)},
      [](Graph&, const std::vector<Var>& in) {
        // matrix-matrix, matrix-vector, vector-matrix and vector-vector forms.
        Var mm = sum_all(matmul(in[0], in[1]));
        Var mv = sum_all(matmul(in[0], in[2]));
        Var vm = sum_all(matmul(in[3], in[0]));
        Var vv = matmul(in[2], in[2]);
        return add(add(mm, mv), add(vm, vv));
      }});
  cases.push_back(unary_case("transpose", s.uniform({3, 2}, -1, 1), [](Var a) { return transpose(a); }));
  cases.push_back(unary_case("reshape", s.uniform({3, 2}, -1, 1), [](Var a) { return reshape(a, {2, 3}); }));
  cases.push_back(unary_case("relu", s.away_from_zero({6}, 0.1, 1.0), [](Var a) { return relu(a); }));
  cases.push_back(unary_case("step", s.away_from_zero({6}, 0.1, 1.0), [](Var a) { return step(a); }));
  cases.push_back(unary_case("exp", s.uniform({5}, -1, 1), [](Var a) { return exp(a); }));
  cases.push_back(unary_case("log", s.uniform({5}, 0.5, 2.0), [](Var a) { return log(a); }));
  cases.push_back(unary_case("tanh", s.uniform({5}, -1.5, 1.5), [](Var a) { return tanh(a); }));
  cases.push_back(unary_case("sigmoid", s.uniform({5}, -3, 3), [](Var a) { return sigmoid(a); }));
  cases.push_back(unary_case("power", s.uniform({5}, 0.5, 2.0), [](Var a) { return power(a, 2.5); }));
  cases.push_back(unary_case("sum", s.uniform({3, 2}, -1, 1), [](Var a) { return sum_all(a); }));
  cases.push_back(unary_case("mean", s.uniform({3, 2}, -1, 1), [](Var a) { return mean_all(a); }));
  {
    // Distinct values, unique maximum well separated from the runner-up.
    Tensor x = Tensor::vector({0.3, -0.7, 1.4, 0.1, 0.9});
    cases.push_back(unary_case("max", x, [](Var a) { return max_all(a); }));
  }
  cases.push_back(unary_case("broadcast_scalar", s.uniform({}, -1, 1), [](Var a) { return broadcast_scalar(a, {3, 2}); }));
  cases.push_back(unary_case("sum_rows", s.uniform({3, 4}, -1, 1), [](Var a) { return sum_rows(a); }));
  cases.push_back(unary_case("broadcast_rows", s.uniform({4}, -1, 1), [](Var a) { return broadcast_rows(a, 3); }));
  cases.push_back(unary_case("sum_cols", s.uniform({3, 4}, -1, 1), [](Var a) { return sum_cols(a); }));
  cases.push_back(unary_case("broadcast_cols", s.uniform({3}, -1, 1), [](Var a) { return broadcast_cols(a, 4); }));
  cases.push_back(unary_case("softmax_rows", s.uniform({4, 3}, -2, 2), [](Var a) { return softmax_rows(a); }));
  {
    auto labels = std::make_shared<const std::vector<int>>(std::vector<int>{0, 2, 1, 2});
    cases.push_back(unary_case("softmax_xent", s.uniform({4, 3}, -2, 2),
                               [labels](Var a) { return softmax_xent(a, labels); }));
  }
  return cases;
}

PrimitiveCase custom_case(std::shared_ptr<const CustomUnary> fn, std::uint64_t seed) {
  Sampler s(seed);
  PrimitiveCase c = unary_case(fn->name, s.uniform({5}, 0.2, 1.2), [fn](Var a) { return custom(a, fn); });
  c.first_order_only = true;
  return c;
}

PrimitiveReport check_case(const PrimitiveCase& c, const GradcheckOptions& opts) {
  PrimitiveReport report{.name = c.name};
  try {
    auto b = build(c, c.inputs, opts.seed);
    const std::vector<double> analytic = flatten(grad(b->loss, b->leaves));

    std::vector<double> numeric;
    numeric.reserve(analytic.size());
    for (std::size_t k = 0; k < b->leaves.size(); ++k) {
      for (std::size_t i = 0; i < c.inputs[k].size(); ++i) {
        Tensor plus = c.inputs[k];
        Tensor minus = c.inputs[k];
        plus[i] += opts.step;
        minus[i] -= opts.step;
        const double fp = b->graph.forward({{b->leaves[k].id, plus}}, b->loss).item();
        const double fm = b->graph.forward({{b->leaves[k].id, minus}}, b->loss).item();
        numeric.push_back((fp - fm) / (2.0 * opts.step));
      }
    }
    report.first_order_error = relative_error(analytic, numeric);

    if (!c.first_order_only) {
      std::vector<Var> g = grad_recorded(b->loss, b->leaves);
      // Recorded and plain passes must agree before curvature is compared.
      std::vector<double> recorded;
      for (const Var& v : g) recorded.insert(recorded.end(), v.value().values().begin(), v.value().values().end());
      const double agreement = relative_error(recorded, analytic);

      Sampler s(opts.seed + 17);
      TensorList direction;
      for (const auto& x : c.inputs) direction.push_back(s.uniform(x.shape(), -1, 1));
      const std::vector<double> hvp = flatten(vjp(g, direction, b->leaves));

      std::vector<Tensor> xp = c.inputs;
      std::vector<Tensor> xm = c.inputs;
      for (std::size_t k = 0; k < xp.size(); ++k) {
        axpy(xp[k], opts.step, direction[k]);
        axpy(xm[k], -opts.step, direction[k]);
      }
      const std::vector<double> gp = gradient_at(c, xp, opts.seed);
      const std::vector<double> gm = gradient_at(c, xm, opts.seed);
      std::vector<double> fd(gp.size());
      for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (gp[i] - gm[i]) / (2.0 * opts.step);
      report.second_order_error = std::max(relative_error(hvp, fd), agreement);
    }
    report.passed = report.first_order_error < opts.tolerance && report.second_order_error < opts.tolerance;
    if (!report.passed) {
      report.failure = fmt::format("inputs {}: first-order error {:.3e}, second-order error {:.3e}",
                                   fmt::join(flatten(c.inputs), ","), report.first_order_error,
                                   report.second_order_error);
    }
  } catch (const std::exception& e) {
    report.passed = false;
    report.failure = e.what();
  }
  return report;
}

std::vector<PrimitiveReport> run_gradcheck(const std::vector<PrimitiveCase>& cases, const GradcheckOptions& opts) {
  std::vector<PrimitiveReport> reports;
  reports.reserve(cases.size());
  for (const auto& c : cases) reports.push_back(check_case(c, opts));
  return reports;
}

}  // namespace onepass::ad
