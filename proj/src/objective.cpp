#include "m2hf/objective.hpp"

#include <algorithm>
#include <cmath>

namespace m2hf {

std::string_view fusion_name(Fusion fusion) {
  switch (fusion) {
    case Fusion::min: return "min";
    case Fusion::avg: return "avg";
    case Fusion::max: return "max";
    case Fusion::add: return "add";
  }
  return "?";
}

Fusion parse_fusion(std::string_view name) {
  for (Fusion f : {Fusion::min, Fusion::avg, Fusion::max, Fusion::add}) {
    if (fusion_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown fusion '" + std::string(name) + "' (expected min, avg, max or add)");
}

void LossConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive and finite");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive and finite");
}

Tensor dsl_prior_v2c(const Tensor& s, double lambda) { return softmax(scale(s, lambda), 0); }
Tensor dsl_prior_c2v(const Tensor& s, double lambda) { return softmax(scale(s, lambda), 1); }

DslPriors DslPriors::of(const Tensor& s, double lambda) { return {dsl_prior_v2c(s, lambda), dsl_prior_c2v(s, lambda)}; }

namespace {

void require_square(const Shape& shape) {
  if (shape.size() != 2 || shape[0] != shape[1] || shape[0] == 0) {
    throw ShapeError("dual softmax loss needs a non-empty square similarity matrix, got " + shape_string(shape));
  }
}

}  // namespace

ad::Var dsl_per_sample(ad::Var s, const LossConfig& cfg) {
  cfg.validate();
  require_square(s.shape());
  ad::Var p_v2c = ad::softmax(ad::scale(s, cfg.lambda), 0);
  ad::Var p_c2v = ad::softmax(ad::scale(s, cfg.lambda), 1);
  if (!cfg.prior_grad) {
    p_v2c = ad::stop_gradient(p_v2c);
    p_c2v = ad::stop_gradient(p_c2v);
  }
  const ad::Var l_v2c = ad::diag(ad::log_softmax(ad::scale(ad::mul(s, p_v2c), cfg.eta), 1));
  const ad::Var l_c2v = ad::diag(ad::log_softmax(ad::scale(ad::mul(s, p_c2v), cfg.eta), 0));
  return ad::add(l_v2c, l_c2v);
}

ad::Var dsl_per_sample(ad::Var s, const DslPriors& priors, const LossConfig& cfg) {
  cfg.validate();
  require_square(s.shape());
  if (priors.v2c.shape() != s.shape() || priors.c2v.shape() != s.shape()) {
    throw ShapeError("DSL priors do not match similarity shape " + shape_string(s.shape()));
  }
  const ad::Var l_v2c = ad::diag(ad::log_softmax(ad::scale(ad::mul_const(s, priors.v2c), cfg.eta), 1));
  const ad::Var l_c2v = ad::diag(ad::log_softmax(ad::scale(ad::mul_const(s, priors.c2v), cfg.eta), 0));
  return ad::add(l_v2c, l_c2v);
}

ad::Var dsl_loss(ad::Var s, const LossConfig& cfg) { return ad::scale(ad::mean(dsl_per_sample(s, cfg)), -1.0); }

ad::Var fuse_per_sample(const std::vector<ad::Var>& levels, Fusion fusion) {
  if (levels.empty()) throw std::invalid_argument("fusion over zero levels");
  const Shape& shape = levels.front().shape();
  for (const auto& l : levels) {
    if (l.shape() != shape || shape.size() != 1) {
      throw ShapeError("per-sample losses disagree: " + shape_string(shape) + " vs " + shape_string(l.shape()));
    }
  }
  if (levels.size() == 1) return levels.front();
  ad::Var total = levels.front();
  switch (fusion) {
    case Fusion::add:
    case Fusion::avg:
      for (std::size_t l = 1; l < levels.size(); ++l) total = ad::add(total, levels[l]);
      return fusion == Fusion::avg ? ad::scale(total, 1.0 / static_cast<double>(levels.size())) : total;
    case Fusion::min:
    case Fusion::max: break;
  }

  const std::size_t n = shape[0];
  const bool take_min = fusion == Fusion::min;
  Tensor out(shape);
  std::vector<std::size_t> pick(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = levels[0].value()[i];
    for (std::size_t l = 1; l < levels.size(); ++l) {
      const double x = levels[l].value()[i];
      if (take_min ? x < best : x > best) {
        best = x;
        pick[i] = l;
      }
    }
    out[i] = best;
  }
  return levels.front().tape()->record(take_min ? "fuse_min" : "fuse_max", std::move(out), levels,
                                       [levels, pick](ad::Tape& tp, const Tensor& g) {
                                         for (std::size_t l = 0; l < levels.size(); ++l) {
                                           Tensor gl(g.shape());
                                           for (std::size_t i = 0; i < pick.size(); ++i) {
                                             if (pick[i] == l) gl[i] = g[i];
                                           }
                                           tp.accumulate(levels[l], gl);
                                         }
                                       });
}

ad::Var mmbl(const std::vector<ad::Var>& levels, const LossConfig& cfg) {
  return ad::scale(ad::mean(fuse_per_sample(levels, cfg.fusion)), -1.0);
}

PerSampleLosses dsl_per_sample(const SimilarityMatrix& s, const LossConfig& cfg) {
  ad::Tape tape(ad::Tape::Mode::inference);
  return {s.level, dsl_per_sample(tape.constant(s.scores), cfg).value()};
}

PerSampleLosses dsl_per_sample(const SimilarityMatrix& s, const DslPriors& priors, const LossConfig& cfg) {
  ad::Tape tape(ad::Tape::Mode::inference);
  return {s.level, dsl_per_sample(tape.constant(s.scores), priors, cfg).value()};
}

double dsl_loss(const SimilarityMatrix& s, const LossConfig& cfg) {
  ad::Tape tape(ad::Tape::Mode::inference);
  return dsl_loss(tape.constant(s.scores), cfg).value().item();
}

double mmbl(const std::vector<PerSampleLosses>& levels, const LossConfig& cfg) {
  ad::Tape tape(ad::Tape::Mode::inference);
  std::vector<ad::Var> vars;
  for (const auto& l : levels) {
    if (l.level == Level::text) throw std::invalid_argument("the text level has no trainable loss term");
    vars.push_back(tape.constant(l.values));
  }
  return mmbl(vars, cfg).value().item();
}

}  // namespace m2hf
