// m2hf command-line tool: synth, train, eval, retrieve, gradcheck.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "m2hf/pipeline.hpp"

namespace {

using m2hf::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Flags that map one-to-one onto config keys, applied after --config and --set.
class KeyFlags {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option(flag, values_[key], help);
  }

  void apply(RunConfig& cfg) const {
    for (const auto& [key, value] : values_) {
      if (value) cfg.set(key, *value);
    }
  }

 private:
  std::map<std::string, std::optional<std::string>> values_;
};

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  KeyFlags keys;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Config file of 'key = value' lines");
    app->add_option("--set", overrides, "Override one config key (key=value); repeatable");
  }

  RunConfig build(RunConfig cfg = {}) const {
    if (!config_file.empty()) cfg.apply_file(config_file);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw m2hf::UsageError("--set expects key=value, got '" + o + "'");
      cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    keys.apply(cfg);
    return cfg;
  }
};

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw m2hf::UsageError(flag + " is required");
}

void add_model_flags(Common& c, CLI::App* app) {
  c.keys.add(app, "--dims", "dims", "Feature dims, e.g. F=12,T=32,d_v=32,d_c=32,d_a=16,d_m=24");
  c.keys.add(app, "--seed", "seed", "Random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-level multi-modal fusion for text-video retrieval"};
  app.require_subcommand(1);

  // synth
  Common synth_opts;
  std::string synth_out;
  bool synth_force = false;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_opts.attach(synth);
  add_model_flags(synth_opts, synth);
  synth_opts.keys.add(synth, "--pairs", "pairs", "Number of caption-video pairs");
  synth_opts.keys.add(synth, "--correlation", "correlation", "Signal strength in [0, 1]");
  synth_opts.keys.add(synth, "--asr-correlation", "asr_correlation", "ASR noun overlap in [0, 1]");
  synth_opts.keys.add(synth, "--missing-audio", "missing_audio", "Fraction of videos without audio");
  synth_opts.keys.add(synth, "--missing-motion", "missing_motion", "Fraction of videos without motion");
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_flag("--force", synth_force, "Overwrite a non-empty output directory");

  // train
  Common train_opts;
  std::string train_out;
  bool train_force = false;
  auto* train = app.add_subcommand("train", "Train the fusion model");
  train_opts.attach(train);
  train_opts.keys.add(train, "--data", "data", "Dataset directory");
  train_opts.keys.add(train, "--mode", "mode", "e2e or ensemble");
  train_opts.keys.add(train, "--steps", "steps", "Optimizer steps (0: use --epochs)");
  train_opts.keys.add(train, "--epochs", "epochs", "Epochs when --steps is 0");
  train_opts.keys.add(train, "--batch-size", "batch_size", "Pairs per batch");
  train_opts.keys.add(train, "--lr-head", "lr_head", "Learning rate");
  train_opts.keys.add(train, "--optimizer", "optimizer", "adam or sgd");
  train_opts.keys.add(train, "--fusion", "loss_fusion", "Balance-loss fusion: min, avg, max or add");
  train_opts.keys.add(train, "--lambda", "lambda", "Prior temperature");
  train_opts.keys.add(train, "--eta", "eta", "Logit scale");
  train_opts.keys.add(train, "--seed", "seed", "Training seed");
  train_opts.keys.add(train, "--init-seed", "init_seed", "Parameter initialization seed");
  train->add_option("--out", train_out, "Output directory");
  train->add_flag("--force", train_force, "Overwrite a non-empty output directory");

  // eval
  Common eval_opts;
  std::string eval_out;
  bool eval_force = false, eval_tsv = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_opts.attach(eval);
  eval_opts.keys.add(eval, "--data", "data", "Dataset directory");
  eval_opts.keys.add(eval, "--ckpt", "ckpt", "Checkpoint file");
  eval_opts.keys.add(eval, "--drop", "drop", "Comma-separated levels to leave out of the fusion");
  eval_opts.keys.add(eval, "--fusion", "eval_fusion", "Rank fusion: min, avg, max or add");
  eval->add_option("--out", eval_out, "Also write report.txt, report.tsv and the config echo here");
  eval->add_flag("--force", eval_force, "Overwrite a non-empty output directory");
  eval->add_flag("--tsv", eval_tsv, "Print the tab-separated table instead of the text report");

  // retrieve
  Common ret_opts;
  std::string caption, caption_file;
  std::size_t topk = 10;
  auto* ret = app.add_subcommand("retrieve", "Rank videos for one caption");
  ret_opts.attach(ret);
  ret_opts.keys.add(ret, "--data", "data", "Dataset directory");
  ret_opts.keys.add(ret, "--ckpt", "ckpt", "Checkpoint file");
  ret_opts.keys.add(ret, "--drop", "drop", "Comma-separated levels to leave out");
  ret_opts.keys.add(ret, "--fusion", "eval_fusion", "Rank fusion: min, avg, max or add");
  ret->add_option("--caption", caption, "Caption text");
  ret->add_option("--caption-file", caption_file, "Pre-embedded caption tokens (feature container, T x d_c)");
  ret->add_option("--topk", topk, "Number of videos to list");

  // gradcheck
  Common gc_opts;
  m2hf::GradcheckRun gc_run;
  std::string gc_level;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gc_opts.attach(gc);
  gc_opts.keys.add(gc, "--dims", "dims", std::string("Feature dims (default ") + m2hf::kGradcheckDims + ")");
  gc_opts.keys.add(gc, "--seed", "seed", "Dropout seed");
  gc_opts.keys.add(gc, "--init-seed", "init_seed", "Parameter initialization seed");
  gc->add_option("--batch", gc_run.batch, "Batch size");
  gc->add_option("--correlation", gc_run.correlation, "Synthetic correlation of the batch");
  gc->add_option("--data-seed", gc_run.data_seed, "Synthetic data seed");
  gc->add_option("--step", gc_run.options.h, "Finite-difference step");
  gc->add_option("--tolerance", gc_run.options.tolerance, "Maximum relative error per tensor");
  gc->add_option("--max-entries", gc_run.options.max_entries, "Entries checked per tensor (0: all)");
  gc->add_option("--level", gc_level, "Check one level's loss only");
  gc->add_option("--corrupt-adjoint", gc_run.options.fault_op, "Scale the adjoint of this op (negative control)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) {
      RunConfig cfg = synth_opts.build();
      require(synth_out, "--out");
      const m2hf::Dataset ds = m2hf::run_synth(cfg, synth_out, synth_force);
      std::cout << "wrote " << ds.videos.size() << " videos and " << ds.captions.size() << " captions to "
                << synth_out << "\n";
    } else if (*train) {
      RunConfig cfg = train_opts.build();
      require(cfg.data, "--data");
      require(train_out, "--out");
      const m2hf::TrainResult r = m2hf::run_train(cfg, train_out, train_force);
      for (const auto& t : r.traces) {
        std::cout << t.name << ": " << t.rows.size() << " steps, final loss " << t.rows.back().loss + 0.0 << "\n";
      }
      std::cout << "wrote " << (std::filesystem::path(train_out) / m2hf::kCheckpointName).string() << "\n";
    } else if (*eval) {
      RunConfig cfg = eval_opts.build();
      require(cfg.data, "--data");
      require(cfg.ckpt, "--ckpt");
      const m2hf::RetrievalReport report = m2hf::run_eval(cfg, eval_out, eval_force);
      std::cout << (eval_tsv ? m2hf::format_report_tsv(report) : m2hf::format_report_text(report));
    } else if (*ret) {
      RunConfig cfg = ret_opts.build();
      require(cfg.data, "--data");
      require(cfg.ckpt, "--ckpt");
      if (caption.empty() && caption_file.empty()) throw m2hf::UsageError("--caption or --caption-file is required");
      const m2hf::Dataset data = m2hf::load_dataset(cfg.data);
      const m2hf::Checkpoint ckpt = m2hf::load_checkpoint(cfg.ckpt);
      std::optional<m2hf::Tensor> tokens;
      if (!caption_file.empty()) tokens = m2hf::read_feature_file(caption_file);
      const auto result = m2hf::retrieve(data, ckpt.params, cfg, caption, tokens, topk);
      if (result.warning) std::cerr << "warning: " << *result.warning << "\n";
      std::cout << m2hf::format_retrieval(result);
    } else if (*gc) {
      const RunConfig cfg = gc_opts.build(m2hf::gradcheck_config());
      if (!gc_level.empty()) gc_run.options.level = m2hf::parse_level(gc_level);
      const m2hf::GradcheckReport report = m2hf::run_gradcheck(cfg, gc_run);
      std::cout << report.format();
      return report.pass() ? kExitOk : kExitFailure;
    }
  } catch (const m2hf::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
