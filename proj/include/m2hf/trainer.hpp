#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "m2hf/model.hpp"
#include "m2hf/objective.hpp"

namespace m2hf {

enum class TrainMode { e2e, ensemble };
enum class OptimizerKind { adam, sgd };

std::string_view train_mode_name(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::e2e;
  std::size_t batch_size = 8;
  std::size_t epochs = 1;
  /// Total optimizer steps; 0 means epochs × full batches per epoch.
  std::size_t steps = 0;
  double lr_head = 1e-4;
  /// Kept for parity with backbone fine-tuning recipes. Features are
  /// precomputed, so nothing reads it.
  double lr_backbone = 1e-7;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, const std::string& what);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Adam or SGD over named registry tensors.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
  void step(ModelParams& params, const std::map<std::string, Tensor>& grads);

 private:
  struct Moments {
    Tensor m, v;
    std::size_t t = 0;
  };
  TrainConfig cfg_;
  std::map<std::string, Moments> state_;
};

struct TraceRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0;
  std::vector<double> parts;  // per-level DSL losses (e2e only)
};

struct LossTrace {
  std::string name;                 // "e2e" or a level name
  std::vector<std::string> parts;   // column names of TraceRow::parts
  std::vector<TraceRow> rows;
};

std::string format_trace_tsv(const LossTrace& trace);

struct TrainResult {
  ModelParams params;
  std::vector<LossTrace> traces;
  std::size_t steps = 0;
};

/// Shuffled full batches of pair indices; the final partial batch is dropped.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n_pairs, std::size_t batch_size, Rng& rng);

/// Number of optimizer steps `cfg` asks for on `n_pairs` pairs.
std::size_t planned_steps(std::size_t n_pairs, const TrainConfig& cfg);

/// Joint training of the three learned levels under the balance loss.
TrainResult train_e2e(const Dataset& data, ModelParams params, const TrainConfig& cfg);
/// Independent per-level training, each level on its own dual softmax loss
/// and its own parameter partition.
TrainResult train_ensemble(const Dataset& data, ModelParams params, const TrainConfig& cfg);
TrainResult train(const Dataset& data, ModelParams params, const TrainConfig& cfg);

/// Training loss for one batch of pairs. `level` selects a single level's
/// dual softmax loss; otherwise the balance loss over all learned levels.
ad::Var batch_loss(ad::Tape& tape, const ModelVars& model, const ModelConfig& config, const Dataset& data,
                   const std::vector<std::size_t>& pair_idx, const LossConfig& loss, std::optional<Level> level,
                   std::uint64_t dropout_seed, std::vector<double>* level_losses = nullptr);

// ---- gradient verification -------------------------------------------------

struct GradcheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  /// Entries checked per tensor (evenly spaced); 0 checks every entry.
  std::size_t max_entries = 0;
  /// Restrict the loss (and the checked tensors) to one level's DSL.
  std::optional<Level> level;
  /// Negative control: scales the adjoint of this op on the analytic pass.
  std::string fault_op;
  double fault_factor = 1.5;
};

struct GradcheckEntry {
  std::string name;
  std::size_t entries = 0;
  double max_abs_analytic = 0;
  double max_abs_numeric = 0;
  /// max|a − n| / max(max|a|, max|n|, 1e-8)
  double rel_error = 0;
  bool pass = false;
  /// False when both gradients vanish on every checked entry, i.e. the loss
  /// does not depend on the tensor at this point.
  bool active = false;
};

struct GradcheckReport {
  double loss = 0;
  double tolerance = 0;
  std::vector<GradcheckEntry> entries;

  bool pass() const;
  std::size_t inactive() const;
  std::string format() const;
};

GradcheckReport gradcheck(const ModelParams& params, const Dataset& data, const std::vector<std::size_t>& pair_idx,
                          const TrainConfig& cfg, const GradcheckOptions& opts = {});

// ---- checkpoints -----------------------------------------------------------

struct Checkpoint {
  static constexpr int kVersion = 1;
  std::size_t step = 0;
  ModelParams params;
  /// Free-form config echo lines, kept verbatim.
  std::vector<std::string> config_echo;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& path = "<memory>");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace m2hf
