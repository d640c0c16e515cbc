#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "m2hf/model.hpp"
#include "m2hf/objective.hpp"
#include "m2hf/textlevel.hpp"
#include "m2hf/trainer.hpp"

namespace m2hf {

/// Invalid user input: unknown key, malformed value, bad flag combination.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthSettings {
  std::size_t pairs = 32;
  double correlation = 1.0;
  /// Negative: follow `correlation`.
  double asr_correlation = -1.0;
  double missing_audio = 0.0;
  double missing_motion = 0.0;

  SynthOptions options() const;
};

struct LexiconSettings {
  std::string stopwords;  // empty: built-in list
  std::string nouns;      // empty: built-in list
  Stemmer stemmer = Stemmer::suffix_strip;

  LexiconConfig load() const;
};

/// Every tunable of every command. Text form: one `key = value` per line,
/// `#` starts a comment. Later assignments win, so flags applied after the
/// file override it.
struct RunConfig {
  std::string data;
  std::string ckpt;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t init_seed = 0;
  SynthSettings synth;
  LexiconSettings lexicon;
  std::vector<Level> drop;
  Fusion eval_fusion = Fusion::min;

  /// Throws UsageError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Applies `key = value` lines.
  void apply_text(const std::string& text, const std::string& origin = "<config>");
  void apply_file(const std::filesystem::path& path);
  /// All keys in canonical order, one `key = value` line each.
  std::string echo() const;
};

std::vector<Level> parse_level_list(const std::string& text);
std::string format_level_list(const std::vector<Level>& levels);

}  // namespace m2hf
