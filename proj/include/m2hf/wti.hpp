#pragma once

#include <vector>

#include "m2hf/layers.hpp"
#include "m2hf/similarity.hpp"

namespace m2hf {

/// Token-weight heads for weighted token-wise interaction. Each head maps a
/// normalized token to one logit; logits are softmaxed across the tokens.
/// Hidden layers (depth > 1) are followed by a rectifier. The last layer is
/// zero-initialized so all tokens start with uniform weight.
template <class T>
struct WtiParamsT {
  std::vector<LinearT<T>> caption_head;
  std::vector<LinearT<T>> video_head;
};

using WtiParams = WtiParamsT<Tensor>;
using WtiVars = WtiParamsT<ad::Var>;

struct WtiOptions {
  /// Use the unnormalized video frames inside the caption-to-video max term.
  bool literal_eq1 = false;
};

template <class T, class Get>
std::vector<LinearT<T>> build_weight_head(const std::string& name, std::size_t width, std::size_t depth, Get&& get) {
  if (depth == 0) throw std::invalid_argument("weight head depth must be >= 1");
  std::vector<LinearT<T>> layers;
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    layers.push_back(build_linear<T>(name + "." + std::to_string(l), width, width, true, ParamInit::fan_in(width), get));
  }
  layers.push_back(build_linear<T>(name + "." + std::to_string(depth - 1), width, 1, false, ParamInit::zeros(), get));
  return layers;
}

template <class T, class Get>
WtiParamsT<T> build_wti(const std::string& prefix, std::size_t width, std::size_t depth, Get&& get) {
  return {build_weight_head<T>(prefix + ".caption", width, depth, get),
          build_weight_head<T>(prefix + ".video", width, depth, get)};
}

template <class U, class T, class Fn>
WtiParamsT<U> map_params(const WtiParamsT<T>& p, Fn&& fn) {
  WtiParamsT<U> out;
  for (const auto& l : p.caption_head) out.caption_head.push_back(map_params<U>(l, fn));
  for (const auto& l : p.video_head) out.video_head.push_back(map_params<U>(l, fn));
  return out;
}

/// Zero-initialized single-layer heads (uniform token weights).
WtiParams make_wti_params(std::size_t width, std::size_t depth = 1);

/// Softmax token weights [n] for already L2-normalized tokens [n × d].
ad::Var token_weights(ad::Var normalized_tokens, const std::vector<LinearVar>& head);

/// Pairwise WTI scores [captions × videos].
ad::Var wti_similarity(const std::vector<ad::Var>& captions, const std::vector<ad::Var>& videos, const WtiVars& params,
                       const WtiOptions& options = {});

double wti_score(const Tensor& caption, const Tensor& video, const WtiParams& params, const WtiOptions& options = {});

SimilarityMatrix wti_matrix(const std::vector<Tensor>& captions, const std::vector<Tensor>& videos,
                            const WtiParams& params, Level level = Level::visual, const WtiOptions& options = {});

}  // namespace m2hf
