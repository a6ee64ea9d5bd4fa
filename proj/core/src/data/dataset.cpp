#include "onepass/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace onepass::data {

std::size_t Dataset::classes() const {
  if (labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

Split split(std::size_t n, const Fractions& f, std::uint64_t seed) {
  if (f.train <= 0 || f.val <= 0 || f.test <= 0) throw std::invalid_argument("split: fractions must be positive");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");
  // The epsilon keeps exact products such as 0.2 * 10 from flooring to 1.
  const auto n_val = static_cast<std::size_t>(std::floor(f.val * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(f.test * static_cast<double>(n) + 1e-9));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw std::invalid_argument(fmt::format("split: {} rows leave an empty portion", n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  Split s;
  s.seed = seed;
  s.val.assign(perm.begin(), perm.begin() + n_val);
  s.test.assign(perm.begin() + n_val, perm.begin() + n_val + n_test);
  s.train.assign(perm.begin() + n_val + n_test, perm.end());
  return s;
}

Dataset standardise(const Dataset& d, const Split& s) {
  if (s.train.empty()) throw std::invalid_argument("standardise: empty training portion");
  Dataset out = d;
  const std::size_t cols = d.features();
  const auto n = static_cast<double>(s.train.size());
  Normalisation& st = out.stats;
  st.feature_mean.assign(cols, 0.0);
  st.feature_std.assign(cols, 1.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (std::size_t r : s.train) mean += d.X.at(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r : s.train) var += (d.X.at(r, c) - mean) * (d.X.at(r, c) - mean);
    const double sd = std::sqrt(var / n);
    st.feature_mean[c] = mean;
    st.feature_std[c] = sd < 1e-12 ? 1.0 : sd;
    for (std::size_t r = 0; r < d.rows(); ++r) out.X.at(r, c) = (d.X.at(r, c) - mean) / st.feature_std[c];
  }
  if (d.task == Task::regression) {
    double mean = 0.0;
    for (std::size_t r : s.train) mean += d.y[r];
    mean /= n;
    double var = 0.0;
    for (std::size_t r : s.train) var += (d.y[r] - mean) * (d.y[r] - mean);
    const double sd = std::sqrt(var / n);
    st.target_mean = mean;
    st.target_std = sd < 1e-12 ? 1.0 : sd;
    for (auto& v : out.y) v = (v - mean) / st.target_std;
  }
  st.fitted = true;
  return out;
}

double denormalise_target(const Normalisation& n, double value) { return value * n.target_std + n.target_mean; }

std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& portion, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be >= 1");
  std::vector<std::size_t> order = portion;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

model::Batch make_batch(const Dataset& d, const std::vector<std::size_t>& rows) {
  const std::size_t cols = d.features();
  model::Batch b;
  b.X = ad::Tensor(ad::Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(d.X.data() + rows[i] * cols, cols, b.X.data() + i * cols);
  if (d.task == Task::regression) {
    b.y = ad::Tensor(ad::Shape{rows.size(), 1});
    for (std::size_t i = 0; i < rows.size(); ++i) b.y[i] = d.y[rows[i]];
  } else {
    auto labels = std::make_shared<std::vector<int>>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) (*labels)[i] = d.labels[rows[i]];
    b.labels = std::move(labels);
  }
  return b;
}

}  // namespace onepass::data
