#include "m2hf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace m2hf {

std::string_view train_mode_name(TrainMode mode) { return mode == TrainMode::e2e ? "e2e" : "ensemble"; }

TrainMode parse_train_mode(std::string_view name) {
  if (name == "e2e") return TrainMode::e2e;
  if (name == "ensemble") return TrainMode::ensemble;
  throw std::invalid_argument("unknown training mode '" + std::string(name) + "' (expected e2e or ensemble)");
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 for in-batch negatives");
  if (epochs == 0 && steps == 0) throw std::invalid_argument("need epochs >= 1 or steps >= 1");
  if (!(lr_head >= 0.0) || !std::isfinite(lr_head)) throw std::invalid_argument("lr_head must be finite and >= 0");
  if (!(lr_backbone >= 0.0) || !std::isfinite(lr_backbone)) {
    throw std::invalid_argument("lr_backbone must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
  loss.validate();
}

TrainingError::TrainingError(std::size_t step, const std::string& what)
    : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

void Optimizer::step(ModelParams& params, const std::map<std::string, Tensor>& grads) {
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    if (g.shape() != p.shape()) throw ShapeError("gradient shape mismatch for " + name);
    const double lr = cfg_.lr_head;
    if (cfg_.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
      continue;
    }
    Moments& s = state_[name];
    if (s.t == 0) {
      s.m = Tensor(p.shape());
      s.v = Tensor(p.shape());
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = s.m[i] / c1;
      const double v_hat = s.v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.adam_eps);
    }
  }
}

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_trace(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string format_trace_tsv(const LossTrace& trace) {
  std::ostringstream os;
  os << "step\tepoch\tloss";
  for (const auto& p : trace.parts) os << '\t' << p;
  os << '\n';
  for (const auto& r : trace.rows) {
    os << r.step << '\t' << r.epoch << '\t' << fmt_trace(r.loss);
    for (double x : r.parts) os << '\t' << fmt_trace(x);
    os << '\n';
  }
  return os.str();
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n_pairs, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) order[i] = i;
  for (std::size_t i = n_pairs; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b + batch_size <= n_pairs; b += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(b + batch_size));
  }
  return batches;
}

std::size_t planned_steps(std::size_t n_pairs, const TrainConfig& cfg) {
  if (cfg.steps) return cfg.steps;
  return cfg.epochs * (n_pairs / cfg.batch_size);
}

ad::Var batch_loss(ad::Tape& tape, const ModelVars& model, const ModelConfig& config, const Dataset& data,
                   const std::vector<std::size_t>& pair_idx, const LossConfig& loss, std::optional<Level> level,
                   std::uint64_t dropout_seed, std::vector<double>* level_losses) {
  std::vector<std::size_t> captions, videos;
  for (std::size_t p : pair_idx) {
    const auto& [v, c] = data.pairs.at(p);
    videos.push_back(v);
    captions.push_back(c);
  }
  const BatchVars batch = bind_batch(tape, data, captions, videos);
  Rng dropout(dropout_seed);
  if (level) return dsl_loss(level_similarity(*level, model, config, batch, &dropout), loss);
  std::vector<ad::Var> per_sample;
  for (Level l : kTrainableLevels) {
    per_sample.push_back(dsl_per_sample(level_similarity(l, model, config, batch, &dropout), loss));
    if (level_losses) level_losses->push_back(-sum(per_sample.back().value()) / static_cast<double>(pair_idx.size()));
  }
  return mmbl(per_sample, loss);
}

namespace {

std::uint64_t step_seed(std::uint64_t seed, std::size_t step, std::uint64_t salt) {
  Rng r(seed ^ (0x9E3779B97F4A7C15ull * (step + 1)) ^ salt);
  return r.next_u64();
}

std::set<std::string> name_set(const std::vector<std::string>& names) { return {names.begin(), names.end()}; }

/// Runs one optimizer step of `level` (or the joint loss) and returns the loss.
double train_step(const Dataset& data, ModelParams& params, Optimizer& opt, const TrainConfig& cfg,
                  const std::set<std::string>& trainable, const std::vector<std::size_t>& batch,
                  std::optional<Level> level, std::size_t step, std::vector<double>* parts) {
  ad::Tape tape;
  std::map<std::string, ad::Var> vars;
  try {
    const ModelVars model = params.bind(tape, trainable, &vars);
    const std::uint64_t salt = level ? static_cast<std::uint64_t>(*level) + 1 : 0;
    const ad::Var loss =
        batch_loss(tape, model, params.config(), data, batch, cfg.loss, level, step_seed(cfg.seed, step, salt), parts);
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw TrainingError(step, "non-finite loss");
    tape.backward(loss);
    std::map<std::string, Tensor> grads;
    for (const auto& name : trainable) grads.emplace(name, vars.at(name).grad());
    opt.step(params, grads);
    for (const auto& name : trainable) check_finite(params.at(name), "optimizer update of " + name);
    return value;
  } catch (const NonFiniteError& e) {
    throw TrainingError(step, e.what());
  }
}

}  // namespace

TrainResult train_e2e(const Dataset& data, ModelParams params, const TrainConfig& cfg) {
  if (cfg.mode != TrainMode::e2e) throw std::invalid_argument("train_e2e requires mode e2e");
  cfg.validate();
  const std::size_t total = planned_steps(data.pairs.size(), cfg);
  if (data.pairs.size() < cfg.batch_size) throw std::invalid_argument("fewer pairs than one batch");
  Rng rng(cfg.seed);
  Optimizer opt(cfg);
  const std::set<std::string> all = name_set(params.names());
  LossTrace trace{"e2e", {"visual", "audio", "motion"}, {}};
  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total; ++epoch) {
    for (const auto& batch : make_batches(data.pairs.size(), cfg.batch_size, rng)) {
      if (step >= total) break;
      TraceRow row{step, epoch, 0.0, {}};
      row.loss = train_step(data, params, opt, cfg, all, batch, std::nullopt, step, &row.parts);
      trace.rows.push_back(std::move(row));
      ++step;
    }
  }
  return {std::move(params), {std::move(trace)}, step};
}

TrainResult train_ensemble(const Dataset& data, ModelParams params, const TrainConfig& cfg) {
  if (cfg.mode != TrainMode::ensemble) throw std::invalid_argument("train_ensemble requires mode ensemble");
  cfg.validate();
  const std::size_t total = planned_steps(data.pairs.size(), cfg);
  if (data.pairs.size() < cfg.batch_size) throw std::invalid_argument("fewer pairs than one batch");
  Rng rng(cfg.seed);
  Optimizer opt(cfg);
  std::vector<LossTrace> traces;
  std::vector<std::set<std::string>> partitions;
  for (Level l : kTrainableLevels) {
    traces.push_back({std::string(level_name(l)), {}, {}});
    partitions.push_back(name_set(params.names_for(l)));
  }
  // Levels touch disjoint tensors, so stepping them in lockstep on shared
  // batches is equivalent to three separate runs.
  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total; ++epoch) {
    for (const auto& batch : make_batches(data.pairs.size(), cfg.batch_size, rng)) {
      if (step >= total) break;
      for (std::size_t l = 0; l < kTrainableLevels.size(); ++l) {
        const double loss = train_step(data, params, opt, cfg, partitions[l], batch, kTrainableLevels[l], step, nullptr);
        traces[l].rows.push_back({step, epoch, loss, {}});
      }
      ++step;
    }
  }
  return {std::move(params), std::move(traces), step};
}

TrainResult train(const Dataset& data, ModelParams params, const TrainConfig& cfg) {
  return cfg.mode == TrainMode::e2e ? train_e2e(data, std::move(params), cfg)
                                    : train_ensemble(data, std::move(params), cfg);
}

// ---- gradient verification -------------------------------------------------

bool GradcheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.pass; });
}

std::size_t GradcheckReport::inactive() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return !e.active; }));
}

std::string GradcheckReport::format() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "loss %.12g tolerance %.1e\n", loss, tolerance);
  os << line;
  std::snprintf(line, sizeof line, "%-36s %8s %12s %12s %12s %s\n", "tensor", "entries", "max|grad|", "max|fd|",
                "rel_err", "status");
  os << line;
  std::size_t failed = 0;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-36s %8zu %12.4e %12.4e %12.4e %s\n", e.name.c_str(), e.entries,
                  e.max_abs_analytic, e.max_abs_numeric, e.rel_error, e.pass ? (e.active ? "ok" : "ok (zero)") : "FAIL");
    os << line;
    failed += !e.pass;
  }
  if (inactive()) os << inactive() << " tensors have zero gradient at this point\n";
  os << (failed ? "FAIL: " + std::to_string(failed) + " of " + std::to_string(entries.size()) + " tensors\n"
                : "PASS: " + std::to_string(entries.size()) + " tensors\n");
  return os.str();
}

namespace {

/// Inference-only scores of one level, for finite differences.
Tensor level_scores(Level level, const ModelParams& params, const Dataset& data, const std::vector<std::size_t>& captions,
                    const std::vector<std::size_t>& videos, std::uint64_t dropout_seed) {
  ad::Tape tape(ad::Tape::Mode::inference);
  const ModelVars model = params.bind(tape, {});
  const BatchVars batch = bind_batch(tape, data, captions, videos);
  Rng dropout(dropout_seed);
  return level_similarity(level, model, params.config(), batch, &dropout).value();
}

/// Loss from per-level scores. Gradient-stopped priors stay at their values
/// for the unperturbed scores (`base_priors`).
double loss_from_scores(const std::vector<std::pair<Level, Tensor>>& scores, const std::vector<DslPriors>& base_priors,
                        const LossConfig& cfg, bool single) {
  std::vector<PerSampleLosses> per;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const SimilarityMatrix s{scores[i].first, scores[i].second};
    per.push_back(cfg.prior_grad ? dsl_per_sample(s, cfg) : dsl_per_sample(s, base_priors[i], cfg));
  }
  if (single) return -sum(per.front().values) / static_cast<double>(per.front().values.size());
  return mmbl(per, cfg);
}

}  // namespace

GradcheckReport gradcheck(const ModelParams& params, const Dataset& data, const std::vector<std::size_t>& pair_idx,
                          const TrainConfig& cfg, const GradcheckOptions& opts) {
  cfg.loss.validate();
  std::vector<std::size_t> captions, videos;
  for (std::size_t p : pair_idx) {
    videos.push_back(data.pairs.at(p).first);
    captions.push_back(data.pairs.at(p).second);
  }
  const std::uint64_t dropout_seed = cfg.seed;
  std::vector<Level> levels;
  if (opts.level) {
    if (*opts.level == Level::text) throw std::invalid_argument("the text level has no gradients");
    levels.push_back(*opts.level);
  } else {
    levels.assign(kTrainableLevels.begin(), kTrainableLevels.end());
  }
  std::vector<std::string> names;
  for (Level l : levels) {
    for (auto& n : params.names_for(l)) names.push_back(std::move(n));
  }

  GradcheckReport report;
  report.tolerance = opts.tolerance;

  ad::Tape tape;
  if (!opts.fault_op.empty()) tape.set_adjoint_fault(opts.fault_op, opts.fault_factor);
  std::map<std::string, ad::Var> vars;
  const ModelVars model = params.bind(tape, name_set(names), &vars);
  const ad::Var loss =
      batch_loss(tape, model, params.config(), data, pair_idx, cfg.loss, opts.level, dropout_seed, nullptr);
  report.loss = loss.value().item();
  tape.backward(loss);

  std::vector<std::pair<Level, Tensor>> base;
  for (Level l : levels) base.emplace_back(l, level_scores(l, params, data, captions, videos, dropout_seed));
  const bool single = opts.level.has_value();
  std::vector<DslPriors> priors;
  for (const auto& [l, s] : base) priors.push_back(DslPriors::of(s, cfg.loss.lambda));

  ModelParams probe = params;
  for (const auto& name : names) {
    const Level owner = owner_level(name);
    const std::size_t slot =
        static_cast<std::size_t>(std::find_if(base.begin(), base.end(), [&](const auto& b) { return b.first == owner; }) -
                                 base.begin());
    const Tensor& analytic = vars.at(name).grad();
    Tensor& p = probe.at(name);
    const std::size_t n = p.size();
    std::vector<std::size_t> idx;
    if (opts.max_entries == 0 || opts.max_entries >= n) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (std::size_t k = 0; k < opts.max_entries; ++k) idx.push_back(k * n / opts.max_entries);
    }
    GradcheckEntry e{name, idx.size()};
    double max_diff = 0.0;
    auto scores = base;
    for (std::size_t i : idx) {
      const double orig = p[i];
      p[i] = orig + opts.h;
      scores[slot].second = level_scores(owner, probe, data, captions, videos, dropout_seed);
      const double up = loss_from_scores(scores, priors, cfg.loss, single);
      p[i] = orig - opts.h;
      scores[slot].second = level_scores(owner, probe, data, captions, videos, dropout_seed);
      const double down = loss_from_scores(scores, priors, cfg.loss, single);
      p[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.h);
      e.max_abs_analytic = std::max(e.max_abs_analytic, std::abs(analytic[i]));
      e.max_abs_numeric = std::max(e.max_abs_numeric, std::abs(numeric));
      max_diff = std::max(max_diff, std::abs(analytic[i] - numeric));
    }
    e.rel_error = max_diff / std::max({e.max_abs_analytic, e.max_abs_numeric, 1e-8});
    e.pass = std::isfinite(e.rel_error) && e.rel_error <= opts.tolerance;
    e.active = e.max_abs_analytic > 0.0 || e.max_abs_numeric > 0.0;
    report.entries.push_back(std::move(e));
  }
  return report;
}

// ---- checkpoints -----------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "M2HF-CHECKPOINT";

std::vector<std::pair<std::string, std::string>> model_fields(const ModelConfig& c) {
  const Dims& d = c.dims;
  return {{"frames", std::to_string(d.frames)},
          {"tokens", std::to_string(d.tokens)},
          {"d_v", std::to_string(d.d_v)},
          {"d_c", std::to_string(d.d_c)},
          {"d_a", std::to_string(d.d_a)},
          {"d_m", std::to_string(d.d_m)},
          {"mfb_k", std::to_string(c.mfb_k)},
          {"mfb_dropout", fmt_g(c.mfb_dropout)},
          {"heads", std::to_string(c.heads)},
          {"ffn_mult", std::to_string(c.ffn_mult)},
          {"wti_depth", std::to_string(c.wti_depth)},
          {"wti_literal", c.wti_literal ? "1" : "0"},
          {"linear_bias", c.linear_bias ? "1" : "0"},
          {"ln_eps", fmt_g(c.ln_eps)}};
}

void set_model_field(ModelConfig& c, const std::string& key, const std::string& value) {
  auto u = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  if (key == "frames") c.dims.frames = u();
  else if (key == "tokens") c.dims.tokens = u();
  else if (key == "d_v") c.dims.d_v = u();
  else if (key == "d_c") c.dims.d_c = u();
  else if (key == "d_a") c.dims.d_a = u();
  else if (key == "d_m") c.dims.d_m = u();
  else if (key == "mfb_k") c.mfb_k = u();
  else if (key == "mfb_dropout") c.mfb_dropout = std::stod(value);
  else if (key == "heads") c.heads = u();
  else if (key == "ffn_mult") c.ffn_mult = u();
  else if (key == "wti_depth") c.wti_depth = u();
  else if (key == "wti_literal") c.wti_literal = value == "1";
  else if (key == "linear_bias") c.linear_bias = value == "1";
  else if (key == "ln_eps") c.ln_eps = std::stod(value);
  else throw CheckpointError("unknown model field '" + key + "'");
}

Shape parse_shape(const std::string& text) {
  Shape s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) s.push_back(static_cast<std::size_t>(std::stoull(part)));
  return s;
}

std::string shape_field(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream os;
  os << kCheckpointMagic << '\n' << "version " << Checkpoint::kVersion << '\n' << "step " << ckpt.step << '\n';
  for (const auto& [k, v] : model_fields(ckpt.params.config())) os << "model " << k << ' ' << v << '\n';
  for (const auto& line : ckpt.config_echo) {
    if (line.find('\n') != std::string::npos) throw CheckpointError("config echo lines must not contain newlines");
    os << "config " << line << '\n';
  }
  for (const auto& name : ckpt.params.names()) {
    os << "tensor " << name << ' ' << shape_field(ckpt.params.at(name).shape()) << '\n';
  }
  os << '\n';
  for (const auto& name : ckpt.params.names()) os << encode_tensor(ckpt.params.at(name));
  return os.str();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& path) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw CheckpointError(path + ": header is not terminated by a blank line");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointMagic) throw CheckpointError(path + ": not a checkpoint (bad magic line)");
  Checkpoint ckpt;
  ModelConfig config;
  std::vector<std::pair<std::string, Shape>> declared;
  bool have_version = false;
  for (std::string line = next_line(); !line.empty(); line = next_line()) {
    const std::size_t sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    try {
      if (key == "version") {
        if (std::stoi(rest) != Checkpoint::kVersion) throw CheckpointError(path + ": unsupported version " + rest);
        have_version = true;
      } else if (key == "step") {
        ckpt.step = static_cast<std::size_t>(std::stoull(rest));
      } else if (key == "model") {
        const std::size_t s2 = rest.find(' ');
        set_model_field(config, rest.substr(0, s2), s2 == std::string::npos ? "" : rest.substr(s2 + 1));
      } else if (key == "config") {
        ckpt.config_echo.push_back(rest);
      } else if (key == "tensor") {
        const std::size_t s2 = rest.find(' ');
        if (s2 == std::string::npos) throw CheckpointError(path + ": malformed tensor line '" + line + "'");
        declared.emplace_back(rest.substr(0, s2), parse_shape(rest.substr(s2 + 1)));
      } else {
        throw CheckpointError(path + ": unknown header line '" + line + "'");
      }
    } catch (const std::logic_error&) {
      throw CheckpointError(path + ": malformed header line '" + line + "'");
    }
  }
  if (!have_version) throw CheckpointError(path + ": missing version line");
  std::vector<std::pair<std::string, Tensor>> tensors;
  const std::span<const char> payload(bytes.data(), bytes.size());
  for (const auto& [name, shape] : declared) {
    Tensor t = decode_tensor(payload, pos, path);
    if (t.shape() != shape) {
      throw CheckpointError(path + ": tensor '" + name + "' has shape " + shape_string(t.shape()) +
                            ", header says " + shape_string(shape));
    }
    tensors.emplace_back(name, std::move(t));
  }
  if (pos != bytes.size()) throw CheckpointError(path + ": trailing bytes after the last tensor");
  try {
    ckpt.params = ModelParams::from_tensors(config, std::move(tensors));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path + ": " + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace m2hf
