// Python bindings for the pipeline operations and the core scoring kernels.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "m2hf/audiofusion.hpp"
#include "m2hf/pipeline.hpp"
#include "m2hf/wti.hpp"

namespace py = pybind11;
using namespace m2hf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::array_t<std::uint32_t> ranks_to_array(const RankMatrix& r) {
  py::array_t<std::uint32_t> out(
      std::vector<py::ssize_t>{static_cast<py::ssize_t>(r.queries), static_cast<py::ssize_t>(r.candidates)});
  std::copy(r.ranks.begin(), r.ranks.end(), out.mutable_data());
  return out;
}

/// Config from `key -> value` pairs; Python values are stringified, booleans as true/false.
RunConfig make_config(const py::dict& options, RunConfig cfg = {}) {
  for (const auto& [k, v] : options) {
    const std::string key = py::str(k);
    std::string value;
    if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto& item : v) value += (value.empty() ? "" : ",") + std::string(py::str(item));
    } else {
      value = py::str(v);
    }
    cfg.set(key, value);
  }
  return cfg;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["R@1"] = m.r1;
  d["R@5"] = m.r5;
  d["R@10"] = m.r10;
  d["MdR"] = m.mdr;
  d["MnR"] = m.mnr;
  d["queries"] = m.queries;
  return d;
}

py::dict report_dict(const RetrievalReport& r) {
  py::dict out;
  for (Direction d : {Direction::t2v, Direction::v2t}) {
    py::dict levels;
    for (const auto& e : r.entries) {
      if (e.direction == d) levels[py::str(e.level)] = metrics_dict(e.metrics);
    }
    out[py::str(std::string(direction_name(d)))] = levels;
  }
  out["fusion"] = std::string(fusion_name(r.fusion));
  out["text"] = format_report_text(r);
  out["tsv"] = format_report_tsv(r);
  return out;
}

Level level_arg(const std::string& name) { return parse_level(name); }

}  // namespace

PYBIND11_MODULE(m2hf, m) {
  m.doc() = "Multi-level multi-modal fusion for text-video retrieval";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ManifestError>(m, "ManifestError", PyExc_RuntimeError);
  py::register_exception<FeatureFileError>(m, "FeatureFileError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def("config_keys", &RunConfig::keys, "Every accepted config key");
  m.def(
      "config_echo", [](const py::dict& options) { return make_config(options).echo(); }, py::arg("options") = py::dict(),
      "Effective config text for the given overrides");

  m.def(
      "synth",
      [](const std::filesystem::path& out, const py::dict& options, bool force) {
        const Dataset ds = run_synth(make_config(options), out, force);
        return ds.pairs.size();
      },
      py::arg("out"), py::arg("options") = py::dict(), py::arg("force") = false,
      "Write a synthetic dataset; returns the number of pairs");

  m.def(
      "train",
      [](const std::filesystem::path& data, const std::filesystem::path& out, const py::dict& options, bool force) {
        RunConfig cfg = make_config(options);
        cfg.data = data.string();
        const TrainResult r = run_train(cfg, out, force);
        py::dict traces;
        for (const auto& t : r.traces) {
          std::vector<double> losses;
          for (const auto& row : t.rows) losses.push_back(row.loss);
          traces[py::str(t.name)] = losses;
        }
        return traces;
      },
      py::arg("data"), py::arg("out"), py::arg("options") = py::dict(), py::arg("force") = false,
      "Train from a fresh initialization; returns the loss trace per optimization");

  m.def(
      "evaluate",
      [](const std::filesystem::path& data, const std::filesystem::path& ckpt, const py::dict& options) {
        RunConfig cfg = make_config(options);
        cfg.data = data.string();
        cfg.ckpt = ckpt.string();
        return report_dict(run_eval(cfg));
      },
      py::arg("data"), py::arg("ckpt"), py::arg("options") = py::dict(),
      "Per-level and fused retrieval metrics in both directions");

  m.def(
      "retrieve",
      [](const std::filesystem::path& data, const std::filesystem::path& ckpt, const std::string& caption,
         std::size_t topk, const py::dict& options, const std::optional<Array>& tokens) {
        RunConfig cfg = make_config(options);
        const Dataset ds = load_dataset(data);
        const Checkpoint ck = load_checkpoint(ckpt);
        std::optional<Tensor> t;
        if (tokens) t = to_tensor(*tokens);
        const RetrievalResult r = retrieve(ds, ck.params, cfg, caption, t, topk);
        py::list hits;
        for (const auto& h : r.hits) {
          py::dict d;
          d["video"] = h.video_id;
          d["fused_rank"] = h.fused_rank;
          py::dict scores, ranks;
          for (std::size_t l = 0; l < h.levels.size(); ++l) {
            scores[py::str(std::string(level_name(h.levels[l])))] = h.scores[l];
            ranks[py::str(std::string(level_name(h.levels[l])))] = h.ranks[l];
          }
          d["scores"] = scores;
          d["ranks"] = ranks;
          hits.append(d);
        }
        return py::make_tuple(hits, r.warning ? py::cast(*r.warning) : py::none());
      },
      py::arg("data"), py::arg("ckpt"), py::arg("caption") = "", py::arg("topk") = 10, py::arg("options") = py::dict(),
      py::arg("tokens") = py::none(), "Rank every video for one caption; returns (hits, warning)");

  m.def(
      "gradcheck",
      [](const py::dict& options, std::size_t batch, std::size_t max_entries, const std::optional<std::string>& level,
         const std::string& corrupt_adjoint) {
        const RunConfig cfg = make_config(options, gradcheck_config());
        GradcheckRun run;
        run.batch = batch;
        run.options.max_entries = max_entries;
        if (level) run.options.level = level_arg(*level);
        run.options.fault_op = corrupt_adjoint;
        const GradcheckReport r = run_gradcheck(cfg, run);
        py::dict errors;
        for (const auto& e : r.entries) errors[py::str(e.name)] = e.rel_error;
        py::dict out;
        out["passed"] = r.pass();
        out["loss"] = r.loss;
        out["inactive"] = r.inactive();
        out["rel_error"] = errors;
        out["text"] = r.format();
        return out;
      },
      py::arg("options") = py::dict(), py::arg("batch") = 4, py::arg("max_entries") = 0, py::arg("level") = py::none(),
      py::arg("corrupt_adjoint") = "", "Finite-difference check of every registered tensor");

  m.def(
      "wti_score",
      [](const Array& caption, const Array& video, bool literal) {
        const Tensor c = to_tensor(caption);
        if (c.rank() != 2) throw ShapeError("caption must be 2-D");
        return wti_score(c, to_tensor(video), make_wti_params(c.cols()), WtiOptions{literal});
      },
      py::arg("caption"), py::arg("video"), py::arg("literal") = false,
      "Token-wise interaction score with uniform token weights");

  m.def(
      "power_l2_normalize", [](const Array& x) { return to_array(power_l2_normalize(to_tensor(x))); }, py::arg("x"));

  m.def(
      "dsl_per_sample",
      [](const Array& s, double lambda, double eta) {
        LossConfig cfg;
        cfg.lambda = lambda;
        cfg.eta = eta;
        return to_array(dsl_per_sample(SimilarityMatrix{Level::visual, to_tensor(s)}, cfg).values);
      },
      py::arg("s"), py::arg("lambda_") = 100.0, py::arg("eta") = 100.0,
      "Per-sample dual softmax log-likelihood terms (higher is better)");

  m.def(
      "ranks",
      [](const Array& s, const std::string& direction) {
        const Direction d = direction == "v2t" ? Direction::v2t : Direction::t2v;
        if (direction != "t2v" && direction != "v2t") throw UsageError("direction must be t2v or v2t");
        return ranks_to_array(ranks_from_similarity({Level::visual, to_tensor(s)}, d));
      },
      py::arg("s"), py::arg("direction") = "t2v", "Competition ranks of a similarity matrix");

  m.def(
      "fuse",
      [](const std::vector<Array>& sims, const std::string& fusion) {
        std::vector<RankMatrix> ranks;
        for (const auto& s : sims) ranks.push_back(ranks_from_similarity({Level::visual, to_tensor(s)}, Direction::t2v));
        return ranks_to_array(fuse_ranks(ranks, parse_fusion(fusion)));
      },
      py::arg("similarities"), py::arg("fusion") = "min", "Fused t2v rank matrix over several similarity matrices");

  m.def(
      "metrics",
      [](const std::vector<std::uint32_t>& gt_ranks) { return metrics_dict(metrics_from_ranks(gt_ranks)); },
      py::arg("gt_ranks"), "R@1/5/10, MdR and MnR from ground-truth ranks");

  m.def(
      "jaccard",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        const LexiconConfig lex = LexiconConfig::defaults();
        return jaccard(preprocess(a, lex), preprocess(b, lex));
      },
      py::arg("a"), py::arg("b"), "Noun-set Jaccard similarity of two token lists");

  m.def(
      "read_features", [](const std::filesystem::path& p) { return to_array(read_feature_file(p)); }, py::arg("path"));
  m.def(
      "write_features", [](const std::filesystem::path& p, const Array& a) { write_feature_file(p, to_tensor(a)); },
      py::arg("path"), py::arg("array"));
}
