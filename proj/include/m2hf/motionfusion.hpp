#pragma once

#include <cstdint>
#include <vector>

#include "m2hf/audiofusion.hpp"

namespace m2hf {

/// Transformer encoder block: X = MHA(Q·Wq, K·Wk, V·Wv) with output
/// projection Wo, Y = FFN(LN1(X + Q·Wq)), out = LN2(X + Y).
template <class T>
struct EncoderParamsT {
  LinearT<T> wq, wk, wv, wo;
  LinearT<T> ffn1, ffn2;  // d → ffn_mult·d → d, rectifier between
  T ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  std::size_t heads = 4;
  double ln_eps = 1e-5;
};

template <class T>
struct MotionLevelParamsT {
  LinearT<T> motion_proj;  // d_m → d_v
  EncoderParamsT<T> self_m, self_v, cross_m, cross_v, fuse;
  SeParamsT<T> se;
};

using EncoderParams = EncoderParamsT<Tensor>;
using EncoderVars = EncoderParamsT<ad::Var>;
using MotionLevelParams = MotionLevelParamsT<Tensor>;
using MotionLevelVars = MotionLevelParamsT<ad::Var>;

struct EncoderConfig {
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  bool projection_bias = false;
  double ln_eps = 1e-5;
};

template <class T, class Get>
EncoderParamsT<T> build_encoder(const std::string& prefix, std::size_t d, const EncoderConfig& cfg, Get&& get) {
  if (cfg.heads == 0 || d % cfg.heads != 0) {
    throw ShapeError("encoder width " + std::to_string(d) + " is not divisible by " + std::to_string(cfg.heads) +
                     " heads");
  }
  if (cfg.ffn_mult == 0) throw std::invalid_argument("encoder ffn_mult must be >= 1");
  const bool b = cfg.projection_bias;
  const std::size_t hidden = cfg.ffn_mult * d;
  EncoderParamsT<T> p{build_linear<T>(prefix + ".wq", d, d, b, ParamInit::fan_in(d), get),
                      build_linear<T>(prefix + ".wk", d, d, b, ParamInit::fan_in(d), get),
                      build_linear<T>(prefix + ".wv", d, d, b, ParamInit::fan_in(d), get),
                      build_linear<T>(prefix + ".wo", d, d, b, ParamInit::fan_in(d), get),
                      build_linear<T>(prefix + ".ffn1", d, hidden, true, ParamInit::fan_in(d), get),
                      build_linear<T>(prefix + ".ffn2", hidden, d, true, ParamInit::fan_in(hidden), get),
                      get(prefix + ".ln1.gamma", Shape{d}, ParamInit::ones()),
                      get(prefix + ".ln1.beta", Shape{d}, ParamInit::zeros()),
                      get(prefix + ".ln2.gamma", Shape{d}, ParamInit::ones()),
                      get(prefix + ".ln2.beta", Shape{d}, ParamInit::zeros()),
                      cfg.heads,
                      cfg.ln_eps};
  return p;
}

template <class T, class Get>
MotionLevelParamsT<T> build_motion_level(const std::string& prefix, std::size_t d_m, std::size_t d_v,
                                         const EncoderConfig& cfg, bool se_bias, Get&& get) {
  return {build_linear<T>(prefix + ".proj", d_m, d_v, cfg.projection_bias, ParamInit::fan_in(d_m), get),
          build_encoder<T>(prefix + ".self_m", d_v, cfg, get),
          build_encoder<T>(prefix + ".self_v", d_v, cfg, get),
          build_encoder<T>(prefix + ".cross_m", d_v, cfg, get),
          build_encoder<T>(prefix + ".cross_v", d_v, cfg, get),
          build_encoder<T>(prefix + ".fuse", d_v, cfg, get),
          build_se<T>(prefix + ".se", d_v, se_bias, get)};
}

template <class U, class T, class Fn>
EncoderParamsT<U> map_params(const EncoderParamsT<T>& p, Fn&& fn) {
  return {map_params<U>(p.wq, fn),   map_params<U>(p.wk, fn),   map_params<U>(p.wv, fn), map_params<U>(p.wo, fn),
          map_params<U>(p.ffn1, fn), map_params<U>(p.ffn2, fn), fn(p.ln1_gamma),          fn(p.ln1_beta),
          fn(p.ln2_gamma),           fn(p.ln2_beta),            p.heads,                  p.ln_eps};
}

template <class U, class T, class Fn>
MotionLevelParamsT<U> map_params(const MotionLevelParamsT<T>& p, Fn&& fn) {
  return {map_params<U>(p.motion_proj, fn), map_params<U>(p.self_m, fn),  map_params<U>(p.self_v, fn),
          map_params<U>(p.cross_m, fn),     map_params<U>(p.cross_v, fn), map_params<U>(p.fuse, fn),
          map_params<U>(p.se, fn)};
}

EncoderParams make_encoder_params(std::size_t d, std::uint64_t seed, const EncoderConfig& cfg = {});
MotionLevelParams make_motion_level_params(std::size_t d_m, std::size_t d_v, std::uint64_t seed,
                                           const EncoderConfig& cfg = {});

/// Stacks two matrices along the time (row) axis.
ad::Var concat_time(ad::Var a, ad::Var b);

/// Encoder block; when `attention` is non-null it receives the per-head
/// attention weights [Lq × Lk].
ad::Var encoder(ad::Var q, ad::Var k, ad::Var v, const EncoderVars& p, std::vector<Tensor>* attention = nullptr);
ad::Var intra_attention(ad::Var x, const EncoderVars& p);
/// Queries from `x`; keys and values from x stacked over `other_self`.
ad::Var inter_attention(ad::Var x, ad::Var other_self, const EncoderVars& p);
ad::Var fuse_motion_visual(ad::Var m_cross, ad::Var v_cross, const EncoderVars& p);
ad::Var motion_guided_visual(ad::Var motion, ad::Var visual, const MotionLevelVars& p);

Tensor encoder(const Tensor& q, const Tensor& k, const Tensor& v, const EncoderParams& p,
               std::vector<Tensor>* attention = nullptr);
Tensor intra_attention(const Tensor& x, const EncoderParams& p);
Tensor inter_attention(const Tensor& x, const Tensor& other_self, const EncoderParams& p);
Tensor fuse_motion_visual(const Tensor& m_cross, const Tensor& v_cross, const EncoderParams& p);
Tensor motion_guided_visual(const Tensor& motion, const Tensor& visual, const MotionLevelParams& p);

}  // namespace m2hf
