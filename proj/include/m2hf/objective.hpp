#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "m2hf/autodiff.hpp"
#include "m2hf/similarity.hpp"

namespace m2hf {

/// How per-level terms are combined, per sample (losses) or per entry (ranks).
enum class Fusion { min, avg, max, add };

std::string_view fusion_name(Fusion fusion);
Fusion parse_fusion(std::string_view name);

struct LossConfig {
  double lambda = 100.0;  // prior temperature
  double eta = 100.0;     // logit scale
  Fusion fusion = Fusion::min;
  /// Differentiate through the softmax priors instead of treating them as constants.
  bool prior_grad = false;

  void validate() const;
};

/// Per-sample log-probability terms L_v2c[i] + L_c2v[i] for one level.
struct PerSampleLosses {
  Level level = Level::visual;
  Tensor values;  // [B]
};

/// Prior over videos for each caption column: softmax of λ·S down each column.
Tensor dsl_prior_v2c(const Tensor& s, double lambda);
/// Prior over captions for each row: softmax of λ·S along each row.
Tensor dsl_prior_c2v(const Tensor& s, double lambda);

/// The two softmax priors of a similarity matrix.
struct DslPriors {
  Tensor v2c;
  Tensor c2v;

  static DslPriors of(const Tensor& s, double lambda);
};

ad::Var dsl_per_sample(ad::Var s, const LossConfig& cfg);
/// Per-sample terms with the priors held at the given values. With
/// gradient-stopped priors this is the function whose derivative training
/// follows, so it is the one finite differences must probe.
ad::Var dsl_per_sample(ad::Var s, const DslPriors& priors, const LossConfig& cfg);
/// −mean of the per-sample terms.
ad::Var dsl_loss(ad::Var s, const LossConfig& cfg);
/// Fuses per-sample terms across levels (min/max pick the first attaining
/// level in the given order).
ad::Var fuse_per_sample(const std::vector<ad::Var>& levels, Fusion fusion);
/// −mean of the fused per-sample terms.
ad::Var mmbl(const std::vector<ad::Var>& levels, const LossConfig& cfg);

PerSampleLosses dsl_per_sample(const SimilarityMatrix& s, const LossConfig& cfg);
PerSampleLosses dsl_per_sample(const SimilarityMatrix& s, const DslPriors& priors, const LossConfig& cfg);
double dsl_loss(const SimilarityMatrix& s, const LossConfig& cfg);
/// Levels must be visual/audio/motion with equal batch sizes.
double mmbl(const std::vector<PerSampleLosses>& levels, const LossConfig& cfg);

}  // namespace m2hf
