#include "m2hf/wti.hpp"

#include <limits>

#include "m2hf/parallel.hpp"

namespace m2hf {

WtiParams make_wti_params(std::size_t width, std::size_t depth) {
  Rng rng(0);
  return build_wti<Tensor>("wti", width, depth, TensorFactory(rng));
}

ad::Var token_weights(ad::Var normalized_tokens, const std::vector<LinearVar>& head) {
  ad::Var x = normalized_tokens;
  for (std::size_t l = 0; l < head.size(); ++l) {
    x = apply(head[l], x);
    if (l + 1 < head.size()) x = ad::relu(x);
  }
  const std::size_t n = x.shape()[0];
  return ad::softmax(ad::reshape(x, {n}), 0);
}

namespace {

struct PairMax {
  double c2v = 0.0;  // Σ_p wc[p] · max_q Gc[p, q]
  double v2c = 0.0;  // Σ_q wv[q] · max_p G[p, q]
};

// Row-wise max of cn·vᵀ (with argmax) and column-wise max of cn·vnᵀ.
void pair_maxima(const Tensor& cn, const Tensor& vc, const Tensor& vn, std::vector<double>& row_max,
                 std::vector<std::size_t>& row_arg, std::vector<double>& col_max, std::vector<std::size_t>& col_arg) {
  const std::size_t T = cn.rows(), F = vn.rows(), d = cn.cols();
  row_max.assign(T, -std::numeric_limits<double>::infinity());
  row_arg.assign(T, 0);
  col_max.assign(F, -std::numeric_limits<double>::infinity());
  col_arg.assign(F, 0);
  const bool shared = &vc == &vn;
  for (std::size_t p = 0; p < T; ++p) {
    const double* c = &cn.data()[p * d];
    for (std::size_t q = 0; q < F; ++q) {
      const double* v = &vn.data()[q * d];
      double g = 0.0;
      for (std::size_t k = 0; k < d; ++k) g += c[k] * v[k];
      if (g > col_max[q]) {
        col_max[q] = g;
        col_arg[q] = p;
      }
      double gc = g;
      if (!shared) {
        const double* w = &vc.data()[q * d];
        gc = 0.0;
        for (std::size_t k = 0; k < d; ++k) gc += c[k] * w[k];
      }
      if (gc > row_max[p]) {
        row_max[p] = gc;
        row_arg[p] = q;
      }
    }
  }
}

}  // namespace

ad::Var wti_similarity(const std::vector<ad::Var>& captions, const std::vector<ad::Var>& videos, const WtiVars& params,
                       const WtiOptions& options) {
  if (captions.empty() || videos.empty()) throw std::invalid_argument("wti_similarity: empty caption or video list");
  ad::Tape& tape = *captions.front().tape();
  const std::size_t width = captions.front().shape().at(1);

  std::vector<ad::Var> cn, wc, vn, vc, wv;
  for (const auto& c : captions) {
    if (c.shape().size() != 2 || c.shape()[1] != width || c.shape()[0] == 0) {
      throw ShapeError("wti: caption shape " + shape_string(c.shape()) + " incompatible with width " + std::to_string(width));
    }
    cn.push_back(ad::l2_normalize(c, 1));
    wc.push_back(token_weights(cn.back(), params.caption_head));
  }
  for (const auto& v : videos) {
    if (v.shape().size() != 2 || v.shape()[1] != width || v.shape()[0] == 0) {
      throw ShapeError("wti: width mismatch, caption width " + std::to_string(width) + " vs video " +
                       shape_string(v.shape()));
    }
    vn.push_back(ad::l2_normalize(v, 1));
    vc.push_back(options.literal_eq1 ? v : vn.back());
    wv.push_back(token_weights(vn.back(), params.video_head));
  }

  const std::size_t nc = captions.size(), nv = videos.size();
  Tensor scores({nc, nv});
  std::vector<double> row_max, col_max;
  std::vector<std::size_t> row_arg, col_arg;
  for (std::size_t i = 0; i < nc; ++i) {
    const Tensor& cv = cn[i].value();
    const Tensor& w_c = wc[i].value();
    for (std::size_t j = 0; j < nv; ++j) {
      pair_maxima(cv, vc[j].value(), vn[j].value(), row_max, row_arg, col_max, col_arg);
      PairMax pm;
      for (std::size_t p = 0; p < row_max.size(); ++p) pm.c2v += w_c[p] * row_max[p];
      const Tensor& w_v = wv[j].value();
      for (std::size_t q = 0; q < col_max.size(); ++q) pm.v2c += w_v[q] * col_max[q];
      scores(i, j) = 0.5 * (pm.c2v + pm.v2c);
    }
  }

  std::vector<ad::Var> inputs;
  inputs.insert(inputs.end(), cn.begin(), cn.end());
  inputs.insert(inputs.end(), wc.begin(), wc.end());
  inputs.insert(inputs.end(), vn.begin(), vn.end());
  inputs.insert(inputs.end(), vc.begin(), vc.end());
  inputs.insert(inputs.end(), wv.begin(), wv.end());

  return tape.record("wti", std::move(scores), inputs, [cn, wc, vn, vc, wv](ad::Tape& tp, const Tensor& g) {
    const std::size_t nc = cn.size(), nv = vn.size();
    std::vector<Tensor> g_cn, g_wc, g_vn, g_vc, g_wv;
    for (std::size_t i = 0; i < nc; ++i) {
      g_cn.emplace_back(cn[i].shape());
      g_wc.emplace_back(wc[i].shape());
    }
    for (std::size_t j = 0; j < nv; ++j) {
      g_vn.emplace_back(vn[j].shape());
      g_vc.emplace_back(vc[j].shape());
      g_wv.emplace_back(wv[j].shape());
    }
    std::vector<double> row_max, col_max;
    std::vector<std::size_t> row_arg, col_arg;
    for (std::size_t i = 0; i < nc; ++i) {
      const Tensor& c = cn[i].value();
      const Tensor& w_c = wc[i].value();
      const std::size_t d = c.cols();
      for (std::size_t j = 0; j < nv; ++j) {
        const double gs = 0.5 * g(i, j);
        if (gs == 0.0) continue;
        const Tensor& v_n = vn[j].value();
        const Tensor& v_c = vc[j].value();
        const Tensor& w_v = wv[j].value();
        pair_maxima(c, v_c, v_n, row_max, row_arg, col_max, col_arg);
        for (std::size_t p = 0; p < row_max.size(); ++p) {
          g_wc[i][p] += gs * row_max[p];
          const std::size_t q = row_arg[p];
          const double coef = gs * w_c[p];
          for (std::size_t k = 0; k < d; ++k) {
            g_cn[i](p, k) += coef * v_c(q, k);
            g_vc[j](q, k) += coef * c(p, k);
          }
        }
        for (std::size_t q = 0; q < col_max.size(); ++q) {
          g_wv[j][q] += gs * col_max[q];
          const std::size_t p = col_arg[q];
          const double coef = gs * w_v[q];
          for (std::size_t k = 0; k < d; ++k) {
            g_cn[i](p, k) += coef * v_n(q, k);
            g_vn[j](q, k) += coef * c(p, k);
          }
        }
      }
    }
    for (std::size_t i = 0; i < nc; ++i) {
      tp.accumulate(cn[i], g_cn[i]);
      tp.accumulate(wc[i], g_wc[i]);
    }
    for (std::size_t j = 0; j < nv; ++j) {
      tp.accumulate(vn[j], g_vn[j]);
      tp.accumulate(vc[j], g_vc[j]);
      tp.accumulate(wv[j], g_wv[j]);
    }
  });
}

double wti_score(const Tensor& caption, const Tensor& video, const WtiParams& params, const WtiOptions& options) {
  ad::Tape tape(ad::Tape::Mode::inference);
  const WtiVars vars = map_params<ad::Var>(params, TapeBind{&tape});
  return wti_similarity({tape.constant(caption)}, {tape.constant(video)}, vars, options).value().item();
}

SimilarityMatrix wti_matrix(const std::vector<Tensor>& captions, const std::vector<Tensor>& videos,
                            const WtiParams& params, Level level, const WtiOptions& options) {
  if (captions.empty() || videos.empty()) throw std::invalid_argument("wti_matrix: empty caption or video list");
  SimilarityMatrix out{level, Tensor({captions.size(), videos.size()})};
  parallel_chunks(captions.size(), [&](std::size_t begin, std::size_t end) {
    ad::Tape tape(ad::Tape::Mode::inference);
    const WtiVars vars = map_params<ad::Var>(params, TapeBind{&tape});
    std::vector<ad::Var> cs, vs;
    for (std::size_t i = begin; i < end; ++i) cs.push_back(tape.constant(captions[i]));
    for (const auto& v : videos) vs.push_back(tape.constant(v));
    const Tensor& block = wti_similarity(cs, vs, vars, options).value();
    for (std::size_t i = begin; i < end; ++i) {
      auto src = block.row(i - begin);
      std::copy(src.begin(), src.end(), out.scores.row(i).begin());
    }
  });
  return out;
}

}  // namespace m2hf
