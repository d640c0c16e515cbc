#include "m2hf/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace m2hf {

namespace fs = std::filesystem;

void prepare_output_dir(const fs::path& dir, bool force) {
  if (dir.empty()) throw UsageError("missing output directory");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw UsageError(dir.string() + " is not empty (use --force to overwrite)");
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Dataset synth_from_config(const RunConfig& cfg) {
  if (cfg.synth.pairs == 0) throw UsageError("pairs must be positive");
  if (cfg.synth.correlation < 0.0 || cfg.synth.correlation > 1.0) throw UsageError("correlation must lie in [0, 1]");
  return synth_dataset(cfg.synth.pairs, cfg.model.dims, cfg.synth.correlation, cfg.train.seed, cfg.synth.options());
}

Dataset run_synth(const RunConfig& cfg, const fs::path& out, bool force) {
  Dataset ds = synth_from_config(cfg);
  prepare_output_dir(out, force);
  write_dataset(ds, out);
  write_text_file(out / kConfigEchoName, cfg.echo());
  return ds;
}

namespace {

Dataset load_data(const RunConfig& cfg) {
  if (cfg.data.empty()) throw UsageError("missing data directory");
  return load_dataset(cfg.data);
}

std::vector<std::string> echo_lines(const RunConfig& cfg) {
  std::vector<std::string> lines;
  std::istringstream in(cfg.echo());
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TrainResult run_train(const RunConfig& cfg, const fs::path& out, bool force) {
  cfg.train.validate();
  const Dataset data = load_data(cfg);
  ModelConfig model = cfg.model;
  model.dims = data.manifest.dims;
  if (!out.empty()) prepare_output_dir(out, force);
  TrainResult result = train(data, ModelParams::init(model, cfg.init_seed), cfg.train);
  if (!out.empty()) {
    save_checkpoint(out / kCheckpointName, Checkpoint{result.steps, result.params, echo_lines(cfg)});
    for (const auto& t : result.traces) {
      write_text_file(out / ("trace_" + t.name + ".tsv"), format_trace_tsv(t));
    }
    write_text_file(out / kConfigEchoName, cfg.echo());
  }
  return result;
}

std::vector<Level> active_levels(const std::vector<Level>& drop) {
  std::vector<Level> levels;
  for (Level l : kAllLevels) {
    if (std::find(drop.begin(), drop.end(), l) == drop.end()) levels.push_back(l);
  }
  if (levels.empty()) throw UsageError("every level was dropped; nothing to fuse");
  return levels;
}

RetrievalReport evaluate_dataset(const Dataset& data, const ModelParams& params, const RunConfig& cfg) {
  const std::vector<Level> levels = active_levels(cfg.drop);
  const auto sims = compute_similarities(data, params, levels, cfg.lexicon.load());
  const GroundTruth gt = GroundTruth::from_pairs(data.captions.size(), data.videos.size(), data.pairs);
  RetrievalReport report = evaluate(sims, gt, cfg.eval_fusion);
  report.padded_audio = data.padded_audio_count();
  report.padded_motion = data.padded_motion_count();
  return report;
}

RetrievalReport run_eval(const RunConfig& cfg, const fs::path& out, bool force) {
  if (cfg.ckpt.empty()) throw UsageError("missing checkpoint");
  active_levels(cfg.drop);
  const Dataset data = load_data(cfg);
  const Checkpoint ckpt = load_checkpoint(cfg.ckpt);
  if (!(ckpt.params.config().dims == data.manifest.dims)) {
    throw std::invalid_argument("checkpoint dims " + format_dims(ckpt.params.config().dims) +
                                " do not match dataset dims " + format_dims(data.manifest.dims));
  }
  RetrievalReport report = evaluate_dataset(data, ckpt.params, cfg);
  if (!out.empty()) {
    prepare_output_dir(out, force);
    write_text_file(out / "report.txt", format_report_text(report));
    write_text_file(out / "report.tsv", format_report_tsv(report));
    write_text_file(out / kConfigEchoName, cfg.echo());
  }
  return report;
}

RetrievalResult retrieve(const Dataset& data, const ModelParams& params, const RunConfig& cfg,
                         const std::string& caption_text, const std::optional<Tensor>& caption_tokens,
                         std::size_t topk) {
  if (topk == 0) throw UsageError("topk must be positive");
  const Dims& dims = params.config().dims;
  const LexiconConfig lexicon = cfg.lexicon.load();
  const std::vector<std::string> words = split_tokens(caption_text);
  Tensor tokens;
  if (caption_tokens) {
    tokens = *caption_tokens;
    if (tokens.rank() != 2 || tokens.cols() != dims.d_c || tokens.rows() == 0) {
      throw ShapeError("caption tokens " + shape_string(tokens.shape()) + " do not have width d_c=" +
                       std::to_string(dims.d_c));
    }
  } else {
    if (words.empty()) throw UsageError("empty caption");
    tokens = embed_tokens(words, dims.tokens, dims.d_c, lexicon.stopwords);
  }

  std::vector<Level> levels = active_levels(cfg.drop);
  if (words.empty()) levels.erase(std::remove(levels.begin(), levels.end(), Level::text), levels.end());
  if (levels.empty()) throw UsageError("no level left to score the caption");

  // A one-caption dataset view reuses the regular similarity path.
  Dataset query = data;
  query.captions = {CaptionBundle{"query", tokens, words}};
  const auto sims = compute_similarities(query, params, levels, lexicon);

  std::vector<RankMatrix> ranks;
  for (const auto& s : sims) ranks.push_back(ranks_from_similarity(s, Direction::t2v));
  const RankMatrix fused = fuse_ranks(ranks, cfg.eval_fusion);

  const std::size_t n = data.videos.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rank_sum = [&](std::size_t j) {
    std::uint64_t s = 0;
    for (const auto& r : ranks) s += r.at(0, j);
    return s;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (fused.at(0, a) != fused.at(0, b)) return fused.at(0, a) < fused.at(0, b);
    return rank_sum(a) < rank_sum(b);
  });

  RetrievalResult result;
  if (topk > n) {
    result.warning = "requested top " + std::to_string(topk) + " but the corpus has " + std::to_string(n) +
                     " videos; listing all";
    topk = n;
  }
  for (std::size_t k = 0; k < topk; ++k) {
    const std::size_t j = order[k];
    RetrievalHit hit{data.videos[j].video_id, fused.at(0, j), levels, {}, {}};
    for (std::size_t l = 0; l < sims.size(); ++l) {
      hit.scores.push_back(sims[l].scores(0, j));
      hit.ranks.push_back(ranks[l].at(0, j));
    }
    result.hits.push_back(std::move(hit));
  }
  return result;
}

std::string format_retrieval(const RetrievalResult& result) {
  std::ostringstream os;
  os << "rank\tvideo\tfused_rank";
  if (!result.hits.empty()) {
    for (Level l : result.hits.front().levels) os << '\t' << level_name(l) << "_score\t" << level_name(l) << "_rank";
  }
  os << '\n';
  char buf[40];
  for (std::size_t k = 0; k < result.hits.size(); ++k) {
    const auto& h = result.hits[k];
    os << k + 1 << '\t' << h.video_id << '\t' << h.fused_rank;
    for (std::size_t l = 0; l < h.levels.size(); ++l) {
      std::snprintf(buf, sizeof buf, "%.6f", h.scores[l]);
      os << '\t' << buf << '\t' << h.ranks[l];
    }
    os << '\n';
  }
  return os.str();
}

RunConfig gradcheck_config() {
  RunConfig cfg;
  cfg.set("dims", kGradcheckDims);
  cfg.train.loss.lambda = 1.0;
  cfg.train.loss.eta = 1.0;
  return cfg;
}

GradcheckReport run_gradcheck(const RunConfig& cfg, const GradcheckRun& run) {
  if (run.batch < 2) throw UsageError("gradcheck batch must be >= 2");
  const Dataset data = synth_dataset(run.batch, cfg.model.dims, run.correlation, run.data_seed);
  const ModelParams params = ModelParams::init(cfg.model, cfg.init_seed);
  std::vector<std::size_t> idx(run.batch);
  std::iota(idx.begin(), idx.end(), 0);
  return gradcheck(params, data, idx, cfg.train, run.options);
}

}  // namespace m2hf
