#pragma once

#include <cstdint>

#include "m2hf/layers.hpp"

namespace m2hf {

/// Factorized bilinear pooling of audio and visual frames.
template <class T>
struct MfbParamsT {
  LinearT<T> psi;  // d_a → k·d
  LinearT<T> phi;  // d_v → k·d
  std::size_t k = 2;
  double dropout_rate = 0.1;
};

/// Squeeze-and-excitation gate: sigmoid(relu(x·W1)·W2), W1: d_v → d_v/2.
template <class T>
struct SeParamsT {
  LinearT<T> w1;
  LinearT<T> w2;
};

using MfbParams = MfbParamsT<Tensor>;
using MfbVars = MfbParamsT<ad::Var>;
using SeParams = SeParamsT<Tensor>;
using SeVars = SeParamsT<ad::Var>;

void validate_mfb_config(std::size_t k, std::size_t d, double dropout_rate);

template <class T, class Get>
MfbParamsT<T> build_mfb(const std::string& prefix, std::size_t d_a, std::size_t d_v, std::size_t d, std::size_t k,
                        double dropout_rate, bool bias, Get&& get) {
  validate_mfb_config(k, d, dropout_rate);
  return {build_linear<T>(prefix + ".psi", d_a, k * d, bias, ParamInit::fan_in(d_a), get),
          build_linear<T>(prefix + ".phi", d_v, k * d, bias, ParamInit::fan_in(d_v), get), k, dropout_rate};
}

template <class T, class Get>
SeParamsT<T> build_se(const std::string& prefix, std::size_t d_v, bool bias, Get&& get) {
  if (d_v == 0 || d_v % 2 != 0) {
    throw ShapeError("SE gate needs an even, positive width; got d_v=" + std::to_string(d_v));
  }
  const std::size_t d = d_v / 2;
  return {build_linear<T>(prefix + ".w1", d_v, d, bias, ParamInit::fan_in(d_v), get),
          build_linear<T>(prefix + ".w2", d, d_v, bias, ParamInit::fan_in(d), get)};
}

template <class U, class T, class Fn>
MfbParamsT<U> map_params(const MfbParamsT<T>& p, Fn&& fn) {
  return {map_params<U>(p.psi, fn), map_params<U>(p.phi, fn), p.k, p.dropout_rate};
}

template <class U, class T, class Fn>
SeParamsT<U> map_params(const SeParamsT<T>& p, Fn&& fn) {
  return {map_params<U>(p.w1, fn), map_params<U>(p.w2, fn)};
}

/// Random parameters (seeded) for standalone use.
MfbParams make_mfb_params(std::size_t d_a, std::size_t d_v, std::size_t d, std::size_t k, double dropout_rate,
                          std::uint64_t seed, bool bias = false);
SeParams make_se_params(std::size_t d_v, std::uint64_t seed, bool bias = false);

/// Inverted-dropout keep mask: entries are 0 or 1/(1-rate).
Tensor dropout_mask(const Shape& shape, double rate, Rng& rng);

// Differentiable forms. A null `dropout` means inference (no dropout).
ad::Var mfb_fuse(ad::Var audio, ad::Var visual, const MfbVars& params, Rng* dropout = nullptr);
ad::Var power_l2_normalize(ad::Var x);
ad::Var se_gate(ad::Var fused, const SeVars& params);
ad::Var audio_guided_visual(ad::Var audio, ad::Var visual, const MfbVars& mfb, const SeVars& se,
                            Rng* dropout = nullptr);

// Value forms. `training` enables dropout drawn from `seed`.
Tensor mfb_fuse(const Tensor& audio, const Tensor& visual, const MfbParams& params, bool training = false,
                std::uint64_t seed = 0);
Tensor power_l2_normalize(const Tensor& x);
Tensor se_gate(const Tensor& fused, const SeParams& params);
Tensor audio_guided_visual(const Tensor& audio, const Tensor& visual, const MfbParams& mfb, const SeParams& se,
                           bool training = false, std::uint64_t seed = 0);

}  // namespace m2hf
