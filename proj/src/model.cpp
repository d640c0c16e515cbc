#include "m2hf/model.hpp"

#include <algorithm>

#include "m2hf/parallel.hpp"

namespace m2hf {

void ModelConfig::validate() const {
  const Dims& d = dims;
  for (auto [name, v] : {std::pair{"F", d.frames}, {"T", d.tokens}, {"d_v", d.d_v}, {"d_c", d.d_c},
                         {"d_a", d.d_a}, {"d_m", d.d_m}}) {
    if (v == 0) throw std::invalid_argument(std::string("dimension ") + name + " must be >= 1");
  }
  if (d.d_v != d.d_c) throw ShapeError("d_v must equal d_c");
  if (d.d_v % 2 != 0) throw ShapeError("d_v must be even for the SE gate");
  if (heads == 0 || d.d_v % heads != 0) throw ShapeError("d_v must be divisible by the head count");
  if (wti_depth == 0) throw std::invalid_argument("wti_depth must be >= 1");
  validate_mfb_config(mfb_k, d.d_v, mfb_dropout);
}

const std::vector<std::string>& level_prefixes(Level level) {
  static const std::vector<std::string> visual = {"wti.visual."};
  static const std::vector<std::string> audio = {"wti.audio.", "mfb.", "se_audio."};
  static const std::vector<std::string> motion = {"wti.motion.", "motion."};
  static const std::vector<std::string> none;
  switch (level) {
    case Level::visual: return visual;
    case Level::audio: return audio;
    case Level::motion: return motion;
    case Level::text: return none;
  }
  return none;
}

Level owner_level(const std::string& name) {
  for (Level l : kTrainableLevels) {
    for (const auto& p : level_prefixes(l)) {
      if (name.rfind(p, 0) == 0) return l;
    }
  }
  throw std::invalid_argument("tensor '" + name + "' belongs to no level");
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config_ = config;
  Rng rng(seed);
  build_model<Tensor>(config, [&](const std::string& name, const Shape& shape, ParamInit init) {
    if (!p.index_.emplace(name, p.names_.size()).second) throw std::logic_error("duplicate parameter " + name);
    p.names_.push_back(name);
    p.tensors_.push_back(make_param(shape, init, rng));
    return p.tensors_.back();
  });
  return p;
}

ModelParams ModelParams::from_tensors(const ModelConfig& config, std::vector<std::pair<std::string, Tensor>> tensors) {
  ModelParams expected = init(config, 0);
  if (tensors.size() != expected.size()) {
    throw std::invalid_argument("expected " + std::to_string(expected.size()) + " tensors, got " +
                                std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, t] = tensors[i];
    if (name != expected.names_[i]) {
      throw std::invalid_argument("tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                                  expected.names_[i] + "'");
    }
    if (t.shape() != expected.tensors_[i].shape()) {
      throw ShapeError("tensor '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                       shape_string(expected.tensors_[i].shape()));
    }
    expected.tensors_[i] = std::move(t);
  }
  return expected;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return tensors_[it->second];
}

Tensor& ModelParams::at(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ModelParams&>(*this).at(name));
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<std::string> ModelParams::names_for(Level level) const {
  std::vector<std::string> out;
  for (const auto& n : names_) {
    if (owner_level(n) == level) out.push_back(n);
  }
  return out;
}

ModelView ModelParams::view() const {
  return build_model<Tensor>(config_, [&](const std::string& name, const Shape&, ParamInit) { return at(name); });
}

ModelVars ModelParams::bind(ad::Tape& tape, const std::set<std::string>& trainable,
                            std::map<std::string, ad::Var>* vars) const {
  return build_model<ad::Var>(config_, [&](const std::string& name, const Shape&, ParamInit) {
    const Tensor& t = at(name);
    ad::Var v = trainable.count(name) ? tape.parameter(t) : tape.constant(t);
    if (vars) (*vars)[name] = v;
    return v;
  });
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (!(config_ == other.config_) || names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape() != other.tensors_[i].shape()) return false;
    if (!std::equal(tensors_[i].data().begin(), tensors_[i].data().end(), other.tensors_[i].data().begin())) {
      return false;
    }
  }
  return true;
}

BatchVars bind_batch(ad::Tape& tape, const Dataset& data, const std::vector<std::size_t>& caption_idx,
                     const std::vector<std::size_t>& video_idx) {
  BatchVars b;
  for (std::size_t c : caption_idx) b.captions.push_back(tape.constant(data.captions.at(c).tokens));
  for (std::size_t v : video_idx) {
    const FeatureBundle& f = data.videos.at(v);
    if (!f.audio || !f.motion) throw std::invalid_argument("video '" + f.video_id + "' is not aligned and padded");
    b.visual.push_back(tape.constant(f.visual));
    b.audio.push_back(tape.constant(*f.audio));
    b.motion.push_back(tape.constant(*f.motion));
  }
  return b;
}

ad::Var level_similarity(Level level, const ModelVars& model, const ModelConfig& config, const BatchVars& batch,
                         Rng* dropout) {
  const WtiOptions opts{config.wti_literal};
  switch (level) {
    case Level::visual: return wti_similarity(batch.captions, batch.visual, model.wti_visual, opts);
    case Level::audio: {
      std::vector<ad::Var> av;
      for (std::size_t j = 0; j < batch.visual.size(); ++j) {
        av.push_back(audio_guided_visual(batch.audio[j], batch.visual[j], model.mfb, model.se_audio, dropout));
      }
      return wti_similarity(batch.captions, av, model.wti_audio, opts);
    }
    case Level::motion: {
      std::vector<ad::Var> mv;
      for (std::size_t j = 0; j < batch.visual.size(); ++j) {
        mv.push_back(motion_guided_visual(batch.motion[j], batch.visual[j], model.motion));
      }
      return wti_similarity(batch.captions, mv, model.wti_motion, opts);
    }
    case Level::text: break;
  }
  throw std::invalid_argument("the text level has no learned similarity");
}

std::vector<Tensor> guided_features(Level level, const Dataset& data, const ModelParams& params) {
  if (level != Level::audio && level != Level::motion) throw std::invalid_argument("no guided features for level");
  const ModelView view = params.view();
  std::vector<Tensor> out(data.videos.size());
  parallel_chunks(data.videos.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const FeatureBundle& f = data.videos[j];
      if (!f.audio || !f.motion) throw std::invalid_argument("video '" + f.video_id + "' is not aligned and padded");
      out[j] = level == Level::audio ? audio_guided_visual(*f.audio, f.visual, view.mfb, view.se_audio)
                                     : motion_guided_visual(*f.motion, f.visual, view.motion);
    }
  });
  return out;
}

std::vector<SimilarityMatrix> compute_similarities(const Dataset& data, const ModelParams& params,
                                                   const std::vector<Level>& levels, const LexiconConfig& lexicon) {
  const ModelView view = params.view();
  const WtiOptions opts{params.config().wti_literal};
  std::vector<Tensor> captions;
  for (const auto& c : data.captions) captions.push_back(c.tokens);
  std::vector<SimilarityMatrix> out;
  for (Level level : levels) {
    switch (level) {
      case Level::visual: {
        std::vector<Tensor> visual;
        for (const auto& v : data.videos) visual.push_back(v.visual);
        out.push_back(wti_matrix(captions, visual, view.wti_visual, level, opts));
        break;
      }
      case Level::audio:
        out.push_back(wti_matrix(captions, guided_features(level, data, params), view.wti_audio, level, opts));
        break;
      case Level::motion:
        out.push_back(wti_matrix(captions, guided_features(level, data, params), view.wti_motion, level, opts));
        break;
      case Level::text: {
        std::vector<std::vector<std::string>> cap_tokens, asr;
        for (const auto& c : data.captions) cap_tokens.push_back(c.raw_tokens);
        for (const auto& v : data.videos) asr.push_back(v.asr_tokens);
        out.push_back(text_similarity_matrix(cap_tokens, asr, lexicon));
        break;
      }
    }
  }
  return out;
}

}  // namespace m2hf
