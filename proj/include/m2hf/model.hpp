#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "m2hf/audiofusion.hpp"
#include "m2hf/featureio.hpp"
#include "m2hf/motionfusion.hpp"
#include "m2hf/textlevel.hpp"
#include "m2hf/wti.hpp"

namespace m2hf {

struct ModelConfig {
  Dims dims;
  std::size_t mfb_k = 2;
  double mfb_dropout = 0.1;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t wti_depth = 1;
  bool wti_literal = false;
  bool linear_bias = false;
  double ln_eps = 1e-5;

  void validate() const;
  EncoderConfig encoder() const { return {heads, ffn_mult, linear_bias, ln_eps}; }
  bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct ModelT {
  WtiParamsT<T> wti_visual, wti_audio, wti_motion;
  MfbParamsT<T> mfb;
  SeParamsT<T> se_audio;
  MotionLevelParamsT<T> motion;
};

using ModelVars = ModelT<ad::Var>;
using ModelView = ModelT<Tensor>;

template <class T, class Get>
ModelT<T> build_model(const ModelConfig& c, Get&& get) {
  const Dims& d = c.dims;
  if (d.d_v != d.d_c) {
    throw ShapeError("visual width d_v=" + std::to_string(d.d_v) + " must equal caption width d_c=" +
                     std::to_string(d.d_c));
  }
  return {build_wti<T>("wti.visual", d.d_v, c.wti_depth, get),
          build_wti<T>("wti.audio", d.d_v, c.wti_depth, get),
          build_wti<T>("wti.motion", d.d_v, c.wti_depth, get),
          build_mfb<T>("mfb", d.d_a, d.d_v, d.d_v, c.mfb_k, c.mfb_dropout, c.linear_bias, get),
          build_se<T>("se_audio", d.d_v, c.linear_bias, get),
          build_motion_level<T>("motion", d.d_m, d.d_v, c.encoder(), c.linear_bias, get)};
}

/// Name prefixes of the tensors each trainable level owns. The sets are
/// disjoint and together cover the whole registry.
const std::vector<std::string>& level_prefixes(Level level);
/// Level owning a registered tensor.
Level owner_level(const std::string& name);

/// Flat registry of every trainable tensor, in build order.
class ModelParams {
 public:
  ModelParams() = default;
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  /// Builds a registry from named tensors; names and shapes must match the
  /// model built from `config`.
  static ModelParams from_tensors(const ModelConfig& config, std::vector<std::pair<std::string, Tensor>> tensors);

  const ModelConfig& config() const { return config_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  /// Total number of scalar parameters.
  std::size_t scalar_count() const;
  /// Names owned by `level`, in registry order.
  std::vector<std::string> names_for(Level level) const;

  ModelView view() const;
  /// Binds every tensor to `tape`: names in `trainable` become parameters,
  /// all others constants. `vars` receives the bound handles by name.
  ModelVars bind(ad::Tape& tape, const std::set<std::string>& trainable,
                 std::map<std::string, ad::Var>* vars = nullptr) const;

  bool operator==(const ModelParams& other) const;

 private:
  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Caption and video streams for one batch, bound to a tape.
struct BatchVars {
  std::vector<ad::Var> captions;
  std::vector<ad::Var> visual, audio, motion;
};

BatchVars bind_batch(ad::Tape& tape, const Dataset& data, const std::vector<std::size_t>& caption_idx,
                     const std::vector<std::size_t>& video_idx);

/// Caption × video similarity of one trainable level on a bound batch.
/// `dropout` (may be null) drives the audio-level dropout.
ad::Var level_similarity(Level level, const ModelVars& model, const ModelConfig& config, const BatchVars& batch,
                         Rng* dropout);

/// Guided visual features for every video (no dropout).
std::vector<Tensor> guided_features(Level level, const Dataset& data, const ModelParams& params);

/// Full caption × video similarity matrices for the requested levels.
std::vector<SimilarityMatrix> compute_similarities(const Dataset& data, const ModelParams& params,
                                                   const std::vector<Level>& levels, const LexiconConfig& lexicon);

}  // namespace m2hf
