#include "m2hf/audiofusion.hpp"

namespace m2hf {

void validate_mfb_config(std::size_t k, std::size_t d, double dropout_rate) {
  if (k == 0) throw std::invalid_argument("MFB pooling factor k must be >= 1");
  if (d == 0) throw std::invalid_argument("MFB latent width must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("MFB dropout rate must be in [0, 1), got " + std::to_string(dropout_rate));
  }
}

MfbParams make_mfb_params(std::size_t d_a, std::size_t d_v, std::size_t d, std::size_t k, double dropout_rate,
                          std::uint64_t seed, bool bias) {
  Rng rng(seed);
  return build_mfb<Tensor>("mfb", d_a, d_v, d, k, dropout_rate, bias, TensorFactory(rng));
}

SeParams make_se_params(std::size_t d_v, std::uint64_t seed, bool bias) {
  Rng rng(seed);
  return build_se<Tensor>("se", d_v, bias, TensorFactory(rng));
}

Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  Tensor mask(shape);
  const double keep = 1.0 - rate;
  for (auto& x : mask.data()) x = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

ad::Var mfb_fuse(ad::Var audio, ad::Var visual, const MfbVars& params, Rng* dropout) {
  if (audio.shape().size() != 2 || visual.shape().size() != 2 || audio.shape()[0] != visual.shape()[0]) {
    throw ShapeError("mfb_fuse: audio " + shape_string(audio.shape()) + " and visual " +
                     shape_string(visual.shape()) + " must be frame-aligned matrices");
  }
  const ad::Var pa = apply(params.psi, audio);
  const ad::Var pv = apply(params.phi, visual);
  ad::Var pooled = ad::sum_pool(ad::mul(pa, pv), params.k);
  if (dropout && params.dropout_rate > 0.0) {
    pooled = ad::mul_const(pooled, dropout_mask(pooled.shape(), params.dropout_rate, *dropout));
  }
  return pooled;
}

ad::Var power_l2_normalize(ad::Var x) { return ad::l2_normalize(ad::signed_sqrt(x), x.shape().size() - 1); }

ad::Var se_gate(ad::Var fused, const SeVars& params) {
  const std::size_t width = params.w1.weight.shape()[0];
  if (fused.shape().size() != 2 || fused.shape()[1] != width) {
    throw ShapeError("se_gate: input " + shape_string(fused.shape()) + " does not match gate width " +
                     std::to_string(width));
  }
  return ad::sigmoid(apply(params.w2, ad::relu(apply(params.w1, fused))));
}

ad::Var audio_guided_visual(ad::Var audio, ad::Var visual, const MfbVars& mfb, const SeVars& se, Rng* dropout) {
  const ad::Var fused = power_l2_normalize(mfb_fuse(audio, visual, mfb, dropout));
  return ad::mul(se_gate(fused, se), visual);
}

namespace {

struct InferenceScope {
  ad::Tape tape{ad::Tape::Mode::inference};
  TapeBind bind{&tape};
};

}  // namespace

Tensor mfb_fuse(const Tensor& audio, const Tensor& visual, const MfbParams& params, bool training,
                std::uint64_t seed) {
  InferenceScope s;
  Rng rng(seed);
  return mfb_fuse(s.tape.constant(audio), s.tape.constant(visual), map_params<ad::Var>(params, s.bind),
                  training ? &rng : nullptr)
      .value();
}

Tensor power_l2_normalize(const Tensor& x) { return l2_normalize(signed_sqrt(x), x.rank() - 1); }

Tensor se_gate(const Tensor& fused, const SeParams& params) {
  InferenceScope s;
  return se_gate(s.tape.constant(fused), map_params<ad::Var>(params, s.bind)).value();
}

Tensor audio_guided_visual(const Tensor& audio, const Tensor& visual, const MfbParams& mfb, const SeParams& se,
                           bool training, std::uint64_t seed) {
  InferenceScope s;
  Rng rng(seed);
  return audio_guided_visual(s.tape.constant(audio), s.tape.constant(visual), map_params<ad::Var>(mfb, s.bind),
                             map_params<ad::Var>(se, s.bind), training ? &rng : nullptr)
      .value();
}

}  // namespace m2hf
