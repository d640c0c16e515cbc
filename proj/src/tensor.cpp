#include "m2hf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace m2hf {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

NonFiniteError::NonFiniteError(std::string op)
    : std::runtime_error("non-finite value produced by " + op), op_(std::move(op)) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t c = shape_.back();
  return std::span<const double>(data_).subspan(i * c, c);
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t c = shape_.back();
  return std::span<double>(data_).subspan(i * c, c);
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

// ---- rng -------------------------------------------------------------------

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  return static_cast<std::size_t>(next_u64() % n);
}

Rng Rng::split() { return Rng(next_u64() ^ 0xD1B54A32D192ED03ULL); }

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---- kernels ---------------------------------------------------------------

namespace {

void require_rank(const Tensor& t, std::size_t rank, std::string_view op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

Tensor checked(Tensor t, std::string_view op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(op));
  }
  return t;
}

template <class Fn>
Tensor map(const Tensor& x, std::string_view op, Fn&& fn) {
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
  return checked(std::move(out), op);
}

template <class Fn>
Tensor zip(const Tensor& a, const Tensor& b, std::string_view op, Fn&& fn) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = fn(x[i], y[i]);
  return checked(std::move(out), op);
}

}  // namespace

void check_finite(const Tensor& t, std::string_view op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(op));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &B[p * n];
      double* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return checked(std::move(out), "matmul");
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions disagree for " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()) + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
      C[i * n + j] = acc;
    }
  }
  return checked(std::move(out), "matmul_nt");
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_tn");
  require_rank(b, 2, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: inner dimensions disagree for " + shape_string(a.shape()) + "^T x " +
                     shape_string(b.shape()));
  }
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  Tensor out({m, n});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      const double api = A[p * m + i];
      if (api == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += api * B[p * n + j];
    }
  }
  return checked(std::move(out), "matmul_tn");
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for_each_slice(x.shape(), axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, src[base + k * stride]);
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(src[base + k * stride] - mx);
      dst[base + k * stride] = e;
      total += e;
    }
    for (std::size_t k = 0; k < len; ++k) dst[base + k * stride] /= total;
  });
  return checked(std::move(out), "softmax");
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for_each_slice(x.shape(), axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, src[base + k * stride]);
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) total += std::exp(src[base + k * stride] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t k = 0; k < len; ++k) dst[base + k * stride] = src[base + k * stride] - lse;
  });
  return checked(std::move(out), "log_softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: affine width mismatch for input " + shape_string(x.shape()) + ", gamma " +
                     shape_string(gamma.shape()) + ", beta " + shape_string(beta.shape()));
  }
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  const std::size_t rows = x.size() / d;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &src[r * d];
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) dst[r * d + j] = (in[j] - mean) * inv * gamma[j] + beta[j];
  }
  return checked(std::move(out), "layer_norm");
}

Tensor l2_normalize(const Tensor& x, std::size_t axis, double eps) {
  Tensor out = x;
  auto dst = out.data();
  for_each_slice(x.shape(), axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
    double ss = 0.0;
    for (std::size_t k = 0; k < len; ++k) ss += dst[base + k * stride] * dst[base + k * stride];
    const double norm = std::sqrt(ss);
    if (norm < eps) return;
    for (std::size_t k = 0; k < len; ++k) dst[base + k * stride] /= norm;
  });
  return checked(std::move(out), "l2_normalize");
}

Tensor add(const Tensor& a, const Tensor& b) { return zip(a, b, "add", [](double x, double y) { return x + y; }); }
Tensor sub(const Tensor& a, const Tensor& b) { return zip(a, b, "sub", [](double x, double y) { return x - y; }); }
Tensor mul(const Tensor& a, const Tensor& b) { return zip(a, b, "mul", [](double x, double y) { return x * y; }); }
Tensor scale(const Tensor& a, double s) { return map(a, "scale", [s](double x) { return x * s; }); }

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t d = x.shape().back();
  if (bias.size() != d) {
    throw ShapeError("add_row_bias: bias " + shape_string(bias.shape()) + " vs input " + shape_string(x.shape()));
  }
  Tensor out = x;
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += bias[i % d];
  return checked(std::move(out), "add_row_bias");
}

Tensor sigmoid(const Tensor& x) {
  return map(x, "sigmoid", [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Tensor relu(const Tensor& x) { return map(x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }); }

Tensor sign(const Tensor& x) {
  return map(x, "sign", [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor signed_sqrt(const Tensor& x) {
  return map(x, "signed_sqrt", [](double v) { return v >= 0.0 ? std::sqrt(v) : -std::sqrt(-v); });
}

Tensor sum_pool(const Tensor& x, std::size_t k) {
  if (x.rank() == 0 || k == 0 || x.shape().back() % k != 0) {
    throw ShapeError("sum_pool: last axis of " + shape_string(x.shape()) + " not divisible by k=" +
                     std::to_string(k));
  }
  Shape shape = x.shape();
  shape.back() /= k;
  Tensor out(shape);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += src[i * k + j];
    dst[i] = acc;
  }
  return checked(std::move(out), "sum_pool");
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape shape = parts[0].shape();
  if (axis >= shape.size()) throw ShapeError("concat: axis out of range for " + shape_string(shape));
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i != axis && p.shape()[i] != shape[i]) {
        throw ShapeError("concat: shape mismatch " + shape_string(parts[0].shape()) + " vs " +
                         shape_string(p.shape()));
      }
    }
    total += p.shape()[axis];
  }
  shape[axis] = total;
  Tensor out(shape);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  auto dst = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    auto src = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(&src[o * chunk], chunk, &dst[o * total * inner + offset]);
    }
    offset += chunk;
  }
  return out;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin > end || end > x.shape()[axis]) {
    throw ShapeError("slice: invalid range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  Shape shape = x.shape();
  const std::size_t len = shape[axis];
  shape[axis] = end - begin;
  Tensor out(shape);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  auto src = x.data();
  auto dst = out.data();
  const std::size_t chunk = (end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(&src[o * len * inner + begin * inner], chunk, &dst[o * chunk]);
  }
  return out;
}

double sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return acc;
}

Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Tensor uniform_init(Shape shape, double lo, double hi, Rng& rng) {
  Tensor out(std::move(shape));
  for (auto& v : out.data()) v = rng.uniform(lo, hi);
  return out;
}

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  Tensor out(std::move(shape));
  for (auto& v : out.data()) v = stddev * rng.normal();
  return out;
}

}  // namespace m2hf
