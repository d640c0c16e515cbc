#pragma once

// Tape-based reverse-mode differentiation over whole tensors. Each op records
// its forward value and a hand-derived adjoint; `Tape::backward` replays the
// adjoints in reverse creation order.

#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "m2hf/tensor.hpp"

namespace m2hf::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  enum class Mode { record, inference };

  /// Adjoint: receives the output gradient, accumulates into inputs.
  using Adjoint = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Appends an op result. The value is checked for finiteness; the adjoint is
  /// kept only when recording and some input requires a gradient.
  Var record(std::string op, Tensor value, std::initializer_list<Var> inputs, Adjoint adjoint);
  Var record(std::string op, Tensor value, const std::vector<Var>& inputs, Adjoint adjoint);

  /// Adds `g` into the gradient of `v` (no-op when `v` needs no gradient).
  void accumulate(Var v, const Tensor& g);

  /// Seeds d(out)/d(out) = 1 for a single-element output and runs every adjoint.
  void backward(Var out);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  bool recording() const noexcept { return mode_ == Mode::record; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Test hook: multiplies the output gradient seen by every adjoint of `op` by
  /// `factor`. Used as a negative control for gradient checking.
  void set_adjoint_fault(std::string op, double factor);

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Adjoint adjoint;
  };

  Var push(std::string op, Tensor value, bool requires_grad, Adjoint adjoint);

  Mode mode_;
  std::vector<Node> nodes_;
  std::string active_op_;
  std::string fault_op_;
  double fault_factor_ = 1.0;
};

// ---- differentiable ops ----------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add_row_bias(Var x, Var bias);

Var softmax(Var x, std::size_t axis);
Var log_softmax(Var x, std::size_t axis);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var l2_normalize(Var x, std::size_t axis, double eps = 1e-12);

Var sigmoid(Var x);
Var relu(Var x);
/// sign(x)·sqrt(|x|); the adjoint at exactly 0 is taken as 0.
Var signed_sqrt(Var x);
Var sum_pool(Var x, std::size_t k);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var x, Shape shape);
/// Diagonal of a square rank-2 tensor, as a rank-1 tensor.
Var diag(Var x);
/// Element-wise product with a constant tensor (e.g. a dropout mask).
Var mul_const(Var x, const Tensor& c);
/// Value passes through; no gradient flows back.
Var stop_gradient(Var x);

Var sum(Var x);
Var mean(Var x);

/// Linear map x·W (+ b). W is [in×out], b is [out].
Var linear(Var x, Var weight, const Var* bias = nullptr);

}  // namespace m2hf::ad
