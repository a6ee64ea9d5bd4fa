#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace onepass::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles with rank 0 (scalar), 1 (vector) or 2 (matrix).
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  // Matrix view of rank <= 2 tensors: scalars are 1x1, vectors are 1xn.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  /// Value of a single-element tensor.
  double item() const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

using TensorList = std::vector<Tensor>;

/// Raised for incompatible operand shapes; carries the graph node when known.
class ShapeError : public std::runtime_error {
 public:
  ShapeError(std::string op, std::string detail, long node = -1);
  const std::string& op() const { return op_; }
  const std::string& detail() const { return detail_; }
  long node() const { return node_; }

 private:
  std::string op_;
  std::string detail_;
  long node_;
};

/// Misuse of the graph API (unbound leaves, bad differentiation targets, missing adjoints).
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Eager tensor arithmetic. Binary elementwise ops require equal shapes; the
// broadcasting variants are explicit.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor relu(const Tensor& a);
Tensor step(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor power(const Tensor& a, double p);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor max_all(const Tensor& a);
Tensor argmax_mask(const Tensor& a);
Tensor broadcast_scalar(const Tensor& a, const Shape& shape);
Tensor sum_rows(const Tensor& a);
Tensor broadcast_rows(const Tensor& a, std::size_t rows);
Tensor sum_cols(const Tensor& a);
Tensor broadcast_cols(const Tensor& a, std::size_t cols);
Tensor softmax_rows(const Tensor& a);
Tensor softmax_xent(const Tensor& logits, std::span<const int> labels);
Tensor one_hot(const Shape& shape, std::span<const int> labels);

/// a + c * b, in place on a. Shapes must match.
void axpy(Tensor& a, double c, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);

// Helpers over tensor collections (weights, gradients, accumulators).
TensorList zeros_like(const TensorList& xs);
void axpy(TensorList& a, double c, const TensorList& b);
double dot(const TensorList& a, const TensorList& b);
double max_abs(const TensorList& xs);
bool all_finite(const TensorList& xs);
std::size_t total_size(const TensorList& xs);
std::vector<double> flatten(const TensorList& xs);
TensorList unflatten(std::span<const double> flat, const TensorList& like);

}  // namespace onepass::ad
