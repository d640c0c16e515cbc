#include "m2hf/motionfusion.hpp"

#include <cmath>

namespace m2hf {

EncoderParams make_encoder_params(std::size_t d, std::uint64_t seed, const EncoderConfig& cfg) {
  Rng rng(seed);
  return build_encoder<Tensor>("encoder", d, cfg, TensorFactory(rng));
}

MotionLevelParams make_motion_level_params(std::size_t d_m, std::size_t d_v, std::uint64_t seed,
                                           const EncoderConfig& cfg) {
  Rng rng(seed);
  return build_motion_level<Tensor>("motion", d_m, d_v, cfg, false, TensorFactory(rng));
}

ad::Var concat_time(ad::Var a, ad::Var b) { return ad::concat({a, b}, 0); }

ad::Var encoder(ad::Var q, ad::Var k, ad::Var v, const EncoderVars& p, std::vector<Tensor>* attention) {
  const std::size_t d = p.wq.weight.shape()[0];
  for (const ad::Var* x : {&q, &k, &v}) {
    if (x->shape().size() != 2 || x->shape()[1] != d) {
      throw ShapeError("encoder: input " + shape_string(x->shape()) + " does not have width " + std::to_string(d));
    }
  }
  if (k.shape()[0] != v.shape()[0]) {
    throw ShapeError("encoder: keys " + shape_string(k.shape()) + " and values " + shape_string(v.shape()) +
                     " differ in length");
  }
  const ad::Var qt = apply(p.wq, q);
  const ad::Var kt = apply(p.wk, k);
  const ad::Var vt = apply(p.wv, v);

  const std::size_t dh = d / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> heads;
  if (attention) attention->clear();
  for (std::size_t h = 0; h < p.heads; ++h) {
    const ad::Var qh = ad::slice(qt, 1, h * dh, (h + 1) * dh);
    const ad::Var kh = ad::slice(kt, 1, h * dh, (h + 1) * dh);
    const ad::Var vh = ad::slice(vt, 1, h * dh, (h + 1) * dh);
    const ad::Var weights = ad::softmax(ad::scale(ad::matmul_nt(qh, kh), scale), 1);
    if (attention) attention->push_back(weights.value());
    heads.push_back(ad::matmul(weights, vh));
  }
  const ad::Var x = apply(p.wo, heads.size() == 1 ? heads.front() : ad::concat(heads, 1));
  const ad::Var inner = ad::layer_norm(ad::add(x, qt), p.ln1_gamma, p.ln1_beta, p.ln_eps);
  const ad::Var y = apply(p.ffn2, ad::relu(apply(p.ffn1, inner)));
  return ad::layer_norm(ad::add(x, y), p.ln2_gamma, p.ln2_beta, p.ln_eps);
}

ad::Var intra_attention(ad::Var x, const EncoderVars& p) { return encoder(x, x, x, p); }

ad::Var inter_attention(ad::Var x, ad::Var other_self, const EncoderVars& p) {
  const ad::Var kv = concat_time(x, other_self);
  return encoder(x, kv, kv, p);
}

ad::Var fuse_motion_visual(ad::Var m_cross, ad::Var v_cross, const EncoderVars& p) {
  const ad::Var kv = concat_time(m_cross, v_cross);
  return encoder(ad::mul(m_cross, v_cross), kv, kv, p);
}

ad::Var motion_guided_visual(ad::Var motion, ad::Var visual, const MotionLevelVars& p) {
  if (motion.shape().size() != 2 || visual.shape().size() != 2 || motion.shape()[0] != visual.shape()[0]) {
    throw ShapeError("motion_guided_visual: motion " + shape_string(motion.shape()) + " and visual " +
                     shape_string(visual.shape()) + " must be frame-aligned matrices");
  }
  const ad::Var m = apply(p.motion_proj, motion);
  const ad::Var m_self = intra_attention(m, p.self_m);
  const ad::Var v_self = intra_attention(visual, p.self_v);
  const ad::Var m_cross = inter_attention(m, v_self, p.cross_m);
  const ad::Var v_cross = inter_attention(visual, m_self, p.cross_v);
  const ad::Var fused = fuse_motion_visual(m_cross, v_cross, p.fuse);
  return ad::mul(se_gate(fused, p.se), visual);
}

namespace {

struct InferenceScope {
  ad::Tape tape{ad::Tape::Mode::inference};
  TapeBind bind{&tape};
  ad::Var operator()(const Tensor& t) { return tape.constant(t); }
};

}  // namespace

Tensor encoder(const Tensor& q, const Tensor& k, const Tensor& v, const EncoderParams& p,
               std::vector<Tensor>* attention) {
  InferenceScope s;
  return encoder(s(q), s(k), s(v), map_params<ad::Var>(p, s.bind), attention).value();
}

Tensor intra_attention(const Tensor& x, const EncoderParams& p) {
  InferenceScope s;
  return intra_attention(s(x), map_params<ad::Var>(p, s.bind)).value();
}

Tensor inter_attention(const Tensor& x, const Tensor& other_self, const EncoderParams& p) {
  InferenceScope s;
  return inter_attention(s(x), s(other_self), map_params<ad::Var>(p, s.bind)).value();
}

Tensor fuse_motion_visual(const Tensor& m_cross, const Tensor& v_cross, const EncoderParams& p) {
  InferenceScope s;
  return fuse_motion_visual(s(m_cross), s(v_cross), map_params<ad::Var>(p, s.bind)).value();
}

Tensor motion_guided_visual(const Tensor& motion, const Tensor& visual, const MotionLevelParams& p) {
  InferenceScope s;
  return motion_guided_visual(s(motion), s(visual), map_params<ad::Var>(p, s.bind)).value();
}

}  // namespace m2hf
