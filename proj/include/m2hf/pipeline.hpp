#pragma once

// End-to-end operations shared by the command-line tool and the Python module.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "m2hf/config.hpp"
#include "m2hf/ranker.hpp"

namespace m2hf {

inline constexpr const char* kConfigEchoName = "config.txt";
inline constexpr const char* kCheckpointName = "model.ckpt";

/// Creates `dir`. An existing non-empty directory is an error unless `force`,
/// in which case its contents are removed first.
void prepare_output_dir(const std::filesystem::path& dir, bool force);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Dataset synth_from_config(const RunConfig& cfg);
/// Synthesizes and writes a dataset plus the config echo.
Dataset run_synth(const RunConfig& cfg, const std::filesystem::path& out, bool force);

/// Loads `cfg.data`, trains from a fresh initialization, and when `out` is
/// non-empty writes the checkpoint, loss traces and config echo there.
TrainResult run_train(const RunConfig& cfg, const std::filesystem::path& out = {}, bool force = false);

/// Levels left after removing `drop`; throws UsageError when none remain.
std::vector<Level> active_levels(const std::vector<Level>& drop);

RetrievalReport evaluate_dataset(const Dataset& data, const ModelParams& params, const RunConfig& cfg);
/// Loads `cfg.data` and `cfg.ckpt`; writes report files when `out` is non-empty.
RetrievalReport run_eval(const RunConfig& cfg, const std::filesystem::path& out = {}, bool force = false);

struct RetrievalHit {
  std::string video_id;
  std::uint32_t fused_rank = 0;
  std::vector<Level> levels;
  std::vector<double> scores;
  std::vector<std::uint32_t> ranks;
};

struct RetrievalResult {
  std::vector<RetrievalHit> hits;
  /// Set when the requested K exceeded the corpus and was clamped.
  std::optional<std::string> warning;
};

/// Ranks every video for one caption. `caption_text` is embedded with the
/// synthetic token embedder unless `caption_tokens` supplies pre-embedded
/// tokens; the text level needs `caption_text`.
RetrievalResult retrieve(const Dataset& data, const ModelParams& params, const RunConfig& cfg,
                         const std::string& caption_text, const std::optional<Tensor>& caption_tokens,
                         std::size_t topk);
std::string format_retrieval(const RetrievalResult& result);

/// Small default dimensions for gradient checking.
inline constexpr const char* kGradcheckDims = "F=4,T=6,d_v=16,d_c=16,d_a=8,d_m=12";

/// Gradcheck defaults: small dims and unit loss temperatures. At the training
/// temperatures the priors underflow on an untrained model and most levels
/// contribute gradients below finite-difference resolution.
RunConfig gradcheck_config();

struct GradcheckRun {
  std::size_t batch = 4;
  double correlation = 0.1;
  std::uint64_t data_seed = 1;
  GradcheckOptions options;
};

/// Synthesizes a batch at `cfg.model.dims` and checks every registered tensor.
GradcheckReport run_gradcheck(const RunConfig& cfg, const GradcheckRun& run);

}  // namespace m2hf
