#pragma once

// Parameter structs are templates over their leaf type: `Tensor` for stored
// weights, `ad::Var` for weights bound to a tape. Every module exposes a
// `build_*` template that asks a getter for each named leaf; the same naming
// therefore drives initialization, registry lookup, and tape binding.

#include <cmath>
#include <optional>
#include <string>

#include "m2hf/autodiff.hpp"
#include "m2hf/tensor.hpp"

namespace m2hf {

struct ParamInit {
  enum class Kind { zeros, ones, normal };
  Kind kind = Kind::zeros;
  double stddev = 0.0;

  static ParamInit zeros() { return {Kind::zeros, 0.0}; }
  static ParamInit ones() { return {Kind::ones, 0.0}; }
  static ParamInit normal(double stddev) { return {Kind::normal, stddev}; }
  /// N(0, 1/fan_in)
  static ParamInit fan_in(std::size_t fan_in) { return normal(1.0 / std::sqrt(static_cast<double>(fan_in))); }
};

template <class T>
struct LinearT {
  T weight;  // [in × out]
  std::optional<T> bias;
};

using Linear = LinearT<Tensor>;
using LinearVar = LinearT<ad::Var>;

template <class T, class Get>
LinearT<T> build_linear(const std::string& name, std::size_t in, std::size_t out, bool bias, ParamInit init,
                        Get&& get) {
  LinearT<T> l{get(name + ".weight", Shape{in, out}, init), std::nullopt};
  if (bias) l.bias = get(name + ".bias", Shape{out}, ParamInit::zeros());
  return l;
}

template <class U, class T, class Fn>
LinearT<U> map_params(const LinearT<T>& p, Fn&& fn) {
  LinearT<U> out{fn(p.weight), std::nullopt};
  if (p.bias) out.bias = fn(*p.bias);
  return out;
}

/// Binds stored tensors to a tape as constants (inference) or parameters.
struct TapeBind {
  ad::Tape* tape;
  bool trainable = false;
  ad::Var operator()(const Tensor& t) const { return trainable ? tape->parameter(t) : tape->constant(t); }
};

inline ad::Var apply(const LinearVar& l, ad::Var x) {
  return l.bias ? ad::linear(x, l.weight, &*l.bias) : ad::linear(x, l.weight);
}

Tensor make_param(const Shape& shape, ParamInit init, Rng& rng);

/// Getter that draws fresh tensors from `rng`.
class TensorFactory {
 public:
  explicit TensorFactory(Rng& rng) : rng_(&rng) {}
  Tensor operator()(const std::string&, const Shape& shape, ParamInit init) const { return make_param(shape, init, *rng_); }

 private:
  Rng* rng_;
};

/// Getter that binds existing tensors as trainable leaves on a tape.
template <class Source>
class VarBinder {
 public:
  VarBinder(ad::Tape& tape, Source source) : tape_(&tape), source_(std::move(source)) {}
  ad::Var operator()(const std::string& name, const Shape&, ParamInit) const { return tape_->parameter(source_(name)); }

 private:
  ad::Tape* tape_;
  Source source_;
};

}  // namespace m2hf
