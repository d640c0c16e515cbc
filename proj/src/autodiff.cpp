#include "m2hf/autodiff.hpp"

#include <cmath>

namespace m2hf::ad {

const Tensor& Var::value() const { return tape_->value(*this); }
const Tensor& Var::grad() const { return tape_->grad(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::push(std::string op, Tensor value, bool requires_grad, Adjoint adjoint) {
  check_finite(value, op);
  Node node;
  node.op = std::move(op);
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.adjoint = std::move(adjoint);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push("constant", std::move(value), false, {}); }

Var Tape::parameter(Tensor value) { return push("parameter", std::move(value), recording(), {}); }

Var Tape::record(std::string op, Tensor value, std::initializer_list<Var> inputs, Adjoint adjoint) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw std::logic_error(op + ": input belongs to another tape");
    needs = needs || nodes_[v.id_].requires_grad;
  }
  return push(std::move(op), std::move(value), needs && recording(), std::move(adjoint));
}

Var Tape::record(std::string op, Tensor value, const std::vector<Var>& inputs, Adjoint adjoint) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw std::logic_error(op + ": input belongs to another tape");
    needs = needs || nodes_[v.id_].requires_grad;
  }
  return push(std::move(op), std::move(value), needs && recording(), std::move(adjoint));
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& node = nodes_[v.id_];
  if (!node.requires_grad) return;
  if (g.shape() != node.value.shape()) {
    throw ShapeError(active_op_ + " adjoint: gradient " + shape_string(g.shape()) + " for value " +
                     shape_string(node.value.shape()));
  }
  check_finite(g, active_op_ + " (adjoint)");
  if (node.grad.empty()) {
    node.grad = g;
    return;
  }
  auto dst = node.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var out) {
  if (!recording()) throw std::logic_error("backward on an inference tape");
  Node& root = nodes_[out.id_];
  if (root.value.size() != 1) {
    throw ShapeError("backward requires a single-element output, got " + shape_string(root.value.shape()));
  }
  if (!root.requires_grad) return;
  root.grad = Tensor(root.value.shape(), 1.0);
  for (std::size_t i = out.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.adjoint || node.grad.empty()) continue;
    active_op_ = node.op;
    if (!fault_op_.empty() && node.op == fault_op_) {
      const Tensor faulty = m2hf::scale(node.grad, fault_factor_);
      node.adjoint(*this, faulty);
    } else {
      node.adjoint(*this, node.grad);
    }
  }
  active_op_.clear();
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id_).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id_);
  if (node.grad.empty()) {
    // Materialise zeros lazily so callers always see a full-shape gradient.
    auto& mutable_node = const_cast<Node&>(node);
    mutable_node.grad = Tensor(node.value.shape(), 0.0);
  }
  return node.grad;
}

bool Tape::requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }

void Tape::set_adjoint_fault(std::string op, double factor) {
  fault_op_ = std::move(op);
  fault_factor_ = factor;
}

// ---- ops -------------------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record("add", m2hf::add(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record("sub", m2hf::sub(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, m2hf::scale(g, -1.0));
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record("mul", m2hf::mul(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (a.requires_grad()) tp.accumulate(a, m2hf::mul(g, b.value()));
    if (b.requires_grad()) tp.accumulate(b, m2hf::mul(g, a.value()));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.record("scale", m2hf::scale(a.value(), s), {a},
                  [a, s](Tape& tp, const Tensor& g) { tp.accumulate(a, m2hf::scale(g, s)); });
}

Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record("matmul", m2hf::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (a.requires_grad()) tp.accumulate(a, m2hf::matmul_nt(g, b.value()));
    if (b.requires_grad()) tp.accumulate(b, m2hf::matmul_tn(a.value(), g));
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape();
  return t.record("matmul_nt", m2hf::matmul_nt(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    // out = a bᵀ: da = g b, db = gᵀ a
    if (a.requires_grad()) tp.accumulate(a, m2hf::matmul(g, b.value()));
    if (b.requires_grad()) tp.accumulate(b, m2hf::matmul_tn(g, a.value()));
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  return t.record("transpose", m2hf::transpose(a.value()), {a},
                  [a](Tape& tp, const Tensor& g) { tp.accumulate(a, m2hf::transpose(g)); });
}

Var add_row_bias(Var x, Var bias) {
  Tape& t = *x.tape();
  return t.record("add_row_bias", m2hf::add_row_bias(x.value(), bias.value()), {x, bias},
                  [x, bias](Tape& tp, const Tensor& g) {
                    tp.accumulate(x, g);
                    if (bias.requires_grad()) {
                      Tensor gb(bias.shape());
                      const std::size_t d = gb.size();
                      auto src = g.data();
                      for (std::size_t i = 0; i < src.size(); ++i) gb[i % d] += src[i];
                      tp.accumulate(bias, gb);
                    }
                  });
}

Var softmax(Var x, std::size_t axis) {
  Tape& t = *x.tape();
  Tensor y = m2hf::softmax(x.value(), axis);
  Tensor yv = y;
  return t.record("softmax", std::move(y), {x}, [x, axis, yv = std::move(yv)](Tape& tp, const Tensor& g) {
    Tensor gx(yv.shape());
    auto Y = yv.data();
    auto G = g.data();
    auto D = gx.data();
    for_each_slice(yv.shape(), axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += G[base + k * stride] * Y[base + k * stride];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = base + k * stride;
        D[i] = Y[i] * (G[i] - dot);
      }
    });
    tp.accumulate(x, gx);
  });
}

Var log_softmax(Var x, std::size_t axis) {
  Tape& t = *x.tape();
  Tensor y = m2hf::log_softmax(x.value(), axis);
  Tensor p = m2hf::softmax(x.value(), axis);
  return t.record("log_softmax", std::move(y), {x}, [x, axis, p = std::move(p)](Tape& tp, const Tensor& g) {
    Tensor gx(p.shape());
    auto P = p.data();
    auto G = g.data();
    auto D = gx.data();
    for_each_slice(p.shape(), axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) total += G[base + k * stride];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = base + k * stride;
        D[i] = G[i] - P[i] * total;
      }
    });
    tp.accumulate(x, gx);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const std::size_t d = xv.shape().back();
  const std::size_t rows = xv.size() / d;
  // Cache standardized input and inverse std for the adjoint.
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.data().subspan(r * d, d);
    double mu = 0.0;
    for (double v : in) mu += v;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) xhat[r * d + j] = (in[j] - mu) * inv_std[r];
  }
  Tensor y = m2hf::layer_norm(xv, gamma.value(), beta.value(), eps);
  return t.record("layer_norm", std::move(y), {x, gamma, beta},
                  [x, gamma, beta, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape& tp, const Tensor& g) {
                    const Tensor& gam = gamma.value();
                    if (gamma.requires_grad() || beta.requires_grad()) {
                      Tensor gg(gamma.shape()), gb(beta.shape());
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t j = 0; j < d; ++j) {
                          gg[j] += g[r * d + j] * xhat[r * d + j];
                          gb[j] += g[r * d + j];
                        }
                      }
                      tp.accumulate(gamma, gg);
                      tp.accumulate(beta, gb);
                    }
                    if (!x.requires_grad()) return;
                    Tensor gx(xhat.shape());
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mean_dx = 0.0, mean_dx_xhat = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[r * d + j] * gam[j];
                        mean_dx += dxh;
                        mean_dx_xhat += dxh * xhat[r * d + j];
                      }
                      mean_dx *= inv_d;
                      mean_dx_xhat *= inv_d;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[r * d + j] * gam[j];
                        gx[r * d + j] = inv_std[r] * (dxh - mean_dx - xhat[r * d + j] * mean_dx_xhat);
                      }
                    }
                    tp.accumulate(x, gx);
                  });
}

Var l2_normalize(Var x, std::size_t axis, double eps) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  Tensor y = m2hf::l2_normalize(xv, axis, eps);
  Tensor norms(xv.shape());  // per-element copy of its slice norm
  {
    auto X = xv.data();
    auto N = norms.data();
    for_each_slice(xv.shape(), axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
      double ss = 0.0;
      for (std::size_t k = 0; k < len; ++k) ss += X[base + k * stride] * X[base + k * stride];
      const double n = std::sqrt(ss);
      for (std::size_t k = 0; k < len; ++k) N[base + k * stride] = n;
    });
  }
  Tensor yc = y;
  return t.record("l2_normalize", std::move(y), {x},
                  [x, axis, eps, yc = std::move(yc), norms = std::move(norms)](Tape& tp, const Tensor& g) {
                    Tensor gx(yc.shape());
                    auto Y = yc.data();
                    auto G = g.data();
                    auto N = norms.data();
                    auto D = gx.data();
                    for_each_slice(yc.shape(), axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
                      const double n = N[base];
                      if (n < eps) {
                        for (std::size_t k = 0; k < len; ++k) D[base + k * stride] = G[base + k * stride];
                        return;
                      }
                      double dot = 0.0;
                      for (std::size_t k = 0; k < len; ++k) dot += G[base + k * stride] * Y[base + k * stride];
                      for (std::size_t k = 0; k < len; ++k) {
                        const std::size_t i = base + k * stride;
                        D[i] = (G[i] - Y[i] * dot) / n;
                      }
                    });
                    tp.accumulate(x, gx);
                  });
}

Var sigmoid(Var x) {
  Tape& t = *x.tape();
  Tensor y = m2hf::sigmoid(x.value());
  Tensor yc = y;
  return t.record("sigmoid", std::move(y), {x}, [x, yc = std::move(yc)](Tape& tp, const Tensor& g) {
    Tensor gx(yc.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[i] * yc[i] * (1.0 - yc[i]);
    tp.accumulate(x, gx);
  });
}

Var relu(Var x) {
  Tape& t = *x.tape();
  return t.record("relu", m2hf::relu(x.value()), {x}, [x](Tape& tp, const Tensor& g) {
    const Tensor& xv = x.value();
    Tensor gx(xv.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = xv[i] > 0.0 ? g[i] : 0.0;
    tp.accumulate(x, gx);
  });
}

Var signed_sqrt(Var x) {
  Tape& t = *x.tape();
  Tensor y = m2hf::signed_sqrt(x.value());
  Tensor yc = y;
  return t.record("signed_sqrt", std::move(y), {x}, [x, yc = std::move(yc)](Tape& tp, const Tensor& g) {
    // d/dx sign(x)·sqrt|x| = 1 / (2 sqrt|x|)
    Tensor gx(yc.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double r = std::abs(yc[i]);
      gx[i] = r > 0.0 ? g[i] / (2.0 * r) : 0.0;
    }
    tp.accumulate(x, gx);
  });
}

Var sum_pool(Var x, std::size_t k) {
  Tape& t = *x.tape();
  return t.record("sum_pool", m2hf::sum_pool(x.value(), k), {x}, [x, k](Tape& tp, const Tensor& g) {
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[i / k];
    tp.accumulate(x, gx);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = *parts.front().tape();
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  return t.record("concat", m2hf::concat(values, axis), parts, [parts, axis](Tape& tp, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const std::size_t len = p.shape()[axis];
      if (p.requires_grad()) tp.accumulate(p, m2hf::slice(g, axis, offset, offset + len));
      offset += len;
    }
  });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& t = *x.tape();
  return t.record("slice", m2hf::slice(x.value(), axis, begin, end), {x},
                  [x, axis, begin, end](Tape& tp, const Tensor& g) {
                    const Shape& shape = x.shape();
                    Tensor gx(shape);
                    std::size_t outer = 1, inner = 1;
                    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
                    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
                    const std::size_t len = shape[axis];
                    const std::size_t chunk = (end - begin) * inner;
                    for (std::size_t o = 0; o < outer; ++o) {
                      for (std::size_t c = 0; c < chunk; ++c) gx[o * len * inner + begin * inner + c] = g[o * chunk + c];
                    }
                    tp.accumulate(x, gx);
                  });
}

Var reshape(Var x, Shape shape) {
  Tape& t = *x.tape();
  return t.record("reshape", x.value().reshaped(std::move(shape)), {x},
                  [x](Tape& tp, const Tensor& g) { tp.accumulate(x, g.reshaped(x.shape())); });
}

Var diag(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.rows() != xv.cols()) throw ShapeError("diag: expected square matrix, got " + shape_string(xv.shape()));
  const std::size_t n = xv.rows();
  Tensor y({n});
  for (std::size_t i = 0; i < n; ++i) y[i] = xv(i, i);
  return x.tape()->record("diag", std::move(y), {x}, [x, n](Tape& tp, const Tensor& g) {
    Tensor gx({n, n});
    for (std::size_t i = 0; i < n; ++i) gx(i, i) = g[i];
    tp.accumulate(x, gx);
  });
}

Var mul_const(Var x, const Tensor& c) {
  return x.tape()->record("mul_const", m2hf::mul(x.value(), c), {x},
                          [x, c](Tape& tp, const Tensor& g) { tp.accumulate(x, m2hf::mul(g, c)); });
}

Var stop_gradient(Var x) { return x.tape()->constant(x.value()); }

Var sum(Var x) {
  return x.tape()->record("sum", Tensor::scalar(m2hf::sum(x.value())), {x},
                          [x](Tape& tp, const Tensor& g) { tp.accumulate(x, Tensor(x.shape(), g[0])); });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return x.tape()->record("mean", Tensor::scalar(m2hf::sum(x.value()) / n), {x},
                          [x, n](Tape& tp, const Tensor& g) { tp.accumulate(x, Tensor(x.shape(), g[0] / n)); });
}

Var linear(Var x, Var weight, const Var* bias) {
  Var y = matmul(x, weight);
  return bias ? add_row_bias(y, *bias) : y;
}

}  // namespace m2hf::ad
