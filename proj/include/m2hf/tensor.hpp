#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace m2hf {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a kernel produces NaN or Inf. Carries the kernel name.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(std::string op);
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

/// Dense row-major array of 64-bit floats.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Rank-2 convenience.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }

  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);

  double item() const;
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// SplitMix64 generator. `split()` derives an independent stream so callers
/// can hand sub-generators to components without sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();   // standard normal, Box-Muller
  std::size_t below(std::size_t n);
  Rng split();

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view text);

// ---- kernels ---------------------------------------------------------------

void check_finite(const Tensor& t, std::string_view op);

Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// aᵀ · b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor l2_normalize(const Tensor& x, std::size_t axis, double eps = 1e-12);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sign(const Tensor& x);
/// sign(x) * sqrt(|x|)
Tensor signed_sqrt(const Tensor& x);
/// Sums non-overlapping windows of width k along the last axis.
Tensor sum_pool(const Tensor& x, std::size_t k);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
double sum(const Tensor& x);

Tensor ones(Shape shape);
Tensor zeros(Shape shape);
Tensor identity(std::size_t n);
Tensor uniform_init(Shape shape, double lo, double hi, Rng& rng);
Tensor normal_init(Shape shape, double stddev, Rng& rng);

/// Visits every 1-D slice along `axis`: fn(base_offset, stride, length).
template <class Fn>
void for_each_slice(const Shape& shape, std::size_t axis, Fn&& fn) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      fn(o * len * inner + in, inner, len);
    }
  }
}

}  // namespace m2hf
