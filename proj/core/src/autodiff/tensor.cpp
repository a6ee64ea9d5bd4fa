#include "onepass/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace onepass::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(op, fmt::format("{} vs {}", to_string(a.shape()), to_string(b.shape())));
  }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw ShapeError(op, fmt::format("expected rank {}, got {}", rank, to_string(a.shape())));
  }
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class F>
Tensor map_binary(const char* op, const Tensor& a, const Tensor& b, F f) {
  require_same(op, a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ",")); }

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {
  if (shape_.size() > 2) throw ShapeError("tensor", "rank above 2 is not supported");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 2) throw ShapeError("tensor", "rank above 2 is not supported");
  if (data_.size() != numel(shape_)) {
    throw ShapeError("tensor", fmt::format("{} elements for shape {}", data_.size(), to_string(shape_)));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("tensor", "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return matrix(r, c, std::move(data));
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape_[0] : 1; }
std::size_t Tensor::cols() const { return rank() == 0 ? 1 : shape_.back(); }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item", fmt::format("tensor of shape {} is not a scalar", to_string(shape_)));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ShapeError::ShapeError(std::string op, std::string detail, long node)
    : std::runtime_error(node >= 0 ? fmt::format("shape error in {} (node {}): {}", op, node, detail)
                                   : fmt::format("shape error in {}: {}", op, detail)),
      op_(std::move(op)),
      detail_(std::move(detail)),
      node_(node) {}

Tensor add(const Tensor& a, const Tensor& b) { return map_binary("add", a, b, std::plus<>()); }
Tensor sub(const Tensor& a, const Tensor& b) { return map_binary("sub", a, b, std::minus<>()); }
Tensor mul(const Tensor& a, const Tensor& b) { return map_binary("mul", a, b, std::multiplies<>()); }
Tensor div(const Tensor& a, const Tensor& b) { return map_binary("div", a, b, std::divides<>()); }
Tensor neg(const Tensor& a) { return map_unary(a, [](double x) { return -x; }); }
Tensor scale(const Tensor& a, double c) { return map_unary(a, [c](double x) { return c * x; }); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() == 2 && b.rank() == 2) {
    if (a.shape()[1] != b.shape()[0]) {
      throw ShapeError("matmul", fmt::format("{} x {}", to_string(a.shape()), to_string(b.shape())));
    }
    Tensor out(Shape{a.shape()[0], b.shape()[1]});
    MutMap(out.data(), a.shape()[0], b.shape()[1]).noalias() =
        ConstMap(a.data(), a.shape()[0], a.shape()[1]) * ConstMap(b.data(), b.shape()[0], b.shape()[1]);
    return out;
  }
  if (a.rank() == 2 && b.rank() == 1) {
    if (a.shape()[1] != b.shape()[0]) {
      throw ShapeError("matmul", fmt::format("{} x {}", to_string(a.shape()), to_string(b.shape())));
    }
    Tensor out(Shape{a.shape()[0]});
    MutMap(out.data(), a.shape()[0], 1).noalias() =
        ConstMap(a.data(), a.shape()[0], a.shape()[1]) * ConstMap(b.data(), b.shape()[0], 1);
    return out;
  }
  if (a.rank() == 1 && b.rank() == 2) {
    if (a.shape()[0] != b.shape()[0]) {
      throw ShapeError("matmul", fmt::format("{} x {}", to_string(a.shape()), to_string(b.shape())));
    }
    Tensor out(Shape{b.shape()[1]});
    MutMap(out.data(), 1, b.shape()[1]).noalias() =
        ConstMap(a.data(), 1, a.shape()[0]) * ConstMap(b.data(), b.shape()[0], b.shape()[1]);
    return out;
  }
  if (a.rank() == 1 && b.rank() == 1) {
    require_same("matmul", a, b);
    return Tensor::scalar(dot(a, b));
  }
  throw ShapeError("matmul", fmt::format("{} x {}", to_string(a.shape()), to_string(b.shape())));
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  Tensor out(Shape{a.shape()[1], a.shape()[0]});
  MutMap(out.data(), a.shape()[1], a.shape()[0]) = ConstMap(a.data(), a.shape()[0], a.shape()[1]).transpose();
  return out;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape", fmt::format("{} to {}", to_string(a.shape()), to_string(shape)));
  }
  return Tensor(shape, std::vector<double>(a.values().begin(), a.values().end()));
}

Tensor relu(const Tensor& a) { return map_unary(a, [](double x) { return x > 0.0 ? x : 0.0; }); }
Tensor step(const Tensor& a) { return map_unary(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; }); }
Tensor exp(const Tensor& a) { return map_unary(a, [](double x) { return std::exp(x); }); }
Tensor log(const Tensor& a) { return map_unary(a, [](double x) { return std::log(x); }); }
Tensor tanh(const Tensor& a) { return map_unary(a, [](double x) { return std::tanh(x); }); }
Tensor sigmoid(const Tensor& a) {
  return map_unary(a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}
Tensor power(const Tensor& a, double p) { return map_unary(a, [p](double x) { return std::pow(x, p); }); }

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Tensor::scalar(s);
}

Tensor mean_all(const Tensor& a) { return Tensor::scalar(sum_all(a).item() / static_cast<double>(a.size())); }

Tensor max_all(const Tensor& a) {
  return Tensor::scalar(*std::max_element(a.values().begin(), a.values().end()));
}

Tensor argmax_mask(const Tensor& a) {
  Tensor mask(a.shape());
  const auto it = std::max_element(a.values().begin(), a.values().end());
  mask[static_cast<std::size_t>(it - a.values().begin())] = 1.0;
  return mask;
}

Tensor broadcast_scalar(const Tensor& a, const Shape& shape) {
  if (a.size() != 1) throw ShapeError("broadcast_scalar", fmt::format("source {} is not a scalar", to_string(a.shape())));
  return Tensor(shape, a[0]);
}

Tensor sum_rows(const Tensor& a) {
  require_rank("sum_rows", a, 2);
  Tensor out(Shape{a.shape()[1]});
  MutMap(out.data(), 1, a.shape()[1]) = ConstMap(a.data(), a.shape()[0], a.shape()[1]).colwise().sum();
  return out;
}

Tensor broadcast_rows(const Tensor& a, std::size_t rows) {
  require_rank("broadcast_rows", a, 1);
  Tensor out(Shape{rows, a.shape()[0]});
  MutMap(out.data(), rows, a.shape()[0]).rowwise() = ConstMap(a.data(), 1, a.shape()[0]).row(0);
  return out;
}

Tensor sum_cols(const Tensor& a) {
  require_rank("sum_cols", a, 2);
  Tensor out(Shape{a.shape()[0]});
  MutMap(out.data(), a.shape()[0], 1) = ConstMap(a.data(), a.shape()[0], a.shape()[1]).rowwise().sum();
  return out;
}

Tensor broadcast_cols(const Tensor& a, std::size_t cols) {
  require_rank("broadcast_cols", a, 1);
  Tensor out(Shape{a.shape()[0], cols});
  MutMap(out.data(), a.shape()[0], cols).colwise() = ConstMap(a.data(), a.shape()[0], 1).col(0);
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  require_rank("softmax_rows", a, 2);
  Tensor out(a.shape());
  const std::size_t n = a.shape()[0];
  const std::size_t c = a.shape()[1];
  for (std::size_t r = 0; r < n; ++r) {
    double m = a.at(r, 0);
    for (std::size_t k = 1; k < c; ++k) m = std::max(m, a.at(r, k));
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += (out.at(r, k) = std::exp(a.at(r, k) - m));
    for (std::size_t k = 0; k < c; ++k) out.at(r, k) /= z;
  }
  return out;
}

Tensor softmax_xent(const Tensor& logits, std::span<const int> labels) {
  require_rank("softmax_xent", logits, 2);
  const std::size_t n = logits.shape()[0];
  const std::size_t c = logits.shape()[1];
  if (labels.size() != n) {
    throw ShapeError("softmax_xent", fmt::format("{} labels for {} rows", labels.size(), n));
  }
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double m = logits.at(r, 0);
    for (std::size_t k = 1; k < c; ++k) m = std::max(m, logits.at(r, k));
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(logits.at(r, k) - m);
    const auto y = static_cast<std::size_t>(labels[r]);
    total += m + std::log(z) - logits.at(r, y);
  }
  return Tensor::scalar(total / static_cast<double>(n));
}

Tensor one_hot(const Shape& shape, std::span<const int> labels) {
  Tensor out(shape);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto y = static_cast<std::size_t>(labels[r]);
    if (y >= out.cols()) throw ShapeError("one_hot", fmt::format("label {} out of range", labels[r]));
    out.at(r, y) = 1.0;
  }
  return out;
}

void axpy(Tensor& a, double c, const Tensor& b) {
  require_same("axpy", a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

double dot(const Tensor& a, const Tensor& b) {
  require_same("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TensorList zeros_like(const TensorList& xs) {
  TensorList out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.emplace_back(x.shape());
  return out;
}

void axpy(TensorList& a, double c, const TensorList& b) {
  if (a.size() != b.size()) throw ShapeError("axpy", "collection sizes differ");
  for (std::size_t k = 0; k < a.size(); ++k) axpy(a[k], c, b[k]);
}

double dot(const TensorList& a, const TensorList& b) {
  if (a.size() != b.size()) throw ShapeError("dot", "collection sizes differ");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += dot(a[k], b[k]);
  return s;
}

double max_abs(const TensorList& xs) {
  double m = 0.0;
  for (const auto& x : xs)
    for (double v : x.values()) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const TensorList& xs) {
  return std::all_of(xs.begin(), xs.end(), [](const Tensor& t) { return t.all_finite(); });
}

std::size_t total_size(const TensorList& xs) {
  std::size_t n = 0;
  for (const auto& x : xs) n += x.size();
  return n;
}

std::vector<double> flatten(const TensorList& xs) {
  std::vector<double> out;
  out.reserve(total_size(xs));
  for (const auto& x : xs) out.insert(out.end(), x.values().begin(), x.values().end());
  return out;
}

TensorList unflatten(std::span<const double> flat, const TensorList& like) {
  if (flat.size() != total_size(like)) throw ShapeError("unflatten", "element count mismatch");
  TensorList out;
  out.reserve(like.size());
  std::size_t offset = 0;
  for (const auto& x : like) {
    out.emplace_back(x.shape(), std::vector<double>(flat.begin() + offset, flat.begin() + offset + x.size()));
    offset += x.size();
  }
  return out;
}

}  // namespace onepass::ad
