#include "m2hf/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace m2hf {

SynthOptions SynthSettings::options() const {
  SynthOptions o;
  o.missing_audio_rate = missing_audio;
  o.missing_motion_rate = missing_motion;
  if (asr_correlation >= 0.0) o.asr_correlation = asr_correlation;
  return o;
}

LexiconConfig LexiconSettings::load() const {
  if (stopwords.empty() && nouns.empty()) return LexiconConfig::defaults(stemmer);
  const auto stop = stopwords.empty() ? default_stopword_words() : load_word_list(stopwords);
  const auto noun = nouns.empty() ? default_noun_words() : load_word_list(nouns);
  return LexiconConfig::from_words(stop, noun, stemmer);
}

std::vector<Level> parse_level_list(const std::string& text) {
  std::vector<Level> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    const Level l = parse_level(item.substr(b, e - b + 1));
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::string format_level_list(const std::vector<Level>& levels) {
  std::string out;
  for (Level l : kAllLevels) {
    if (std::find(levels.begin(), levels.end(), l) == levels.end()) continue;
    if (!out.empty()) out += ',';
    out += level_name(l);
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw UsageError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError(key + ": expected a boolean, got '" + v + "'");
}

template <class Fn>
auto wrap(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(key + ": " + e.what());
  }
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define M2HF_SIZE_FIELD(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = to_u64(key, v); }, \
         [](const RunConfig& c) { return std::to_string(c.member); }}}
#define M2HF_DOUBLE_FIELD(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = to_double(key, v); }, \
         [](const RunConfig& c) { return fmt_double(c.member); }}}
#define M2HF_BOOL_FIELD(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = to_bool(key, v); }, \
         [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}
#define M2HF_STRING_FIELD(key, member) \
  {key, {[](RunConfig& c, const std::string& v) { c.member = v; }, [](const RunConfig& c) { return c.member; }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      M2HF_STRING_FIELD("data", data),
      M2HF_STRING_FIELD("ckpt", ckpt),
      {"dims",
       {[](RunConfig& c, const std::string& v) { c.model.dims = wrap("dims", [&] { return parse_dims(v, c.model.dims); }); },
        [](const RunConfig& c) { return format_dims(c.model.dims); }}},
      M2HF_SIZE_FIELD("mfb_k", model.mfb_k),
      M2HF_DOUBLE_FIELD("mfb_dropout", model.mfb_dropout),
      M2HF_SIZE_FIELD("heads", model.heads),
      M2HF_SIZE_FIELD("ffn_mult", model.ffn_mult),
      M2HF_SIZE_FIELD("wti_depth", model.wti_depth),
      M2HF_BOOL_FIELD("wti_literal", model.wti_literal),
      M2HF_BOOL_FIELD("linear_bias", model.linear_bias),
      M2HF_DOUBLE_FIELD("ln_eps", model.ln_eps),
      M2HF_SIZE_FIELD("init_seed", init_seed),
      {"mode",
       {[](RunConfig& c, const std::string& v) { c.train.mode = wrap("mode", [&] { return parse_train_mode(v); }); },
        [](const RunConfig& c) { return std::string(train_mode_name(c.train.mode)); }}},
      M2HF_SIZE_FIELD("batch_size", train.batch_size),
      M2HF_SIZE_FIELD("epochs", train.epochs),
      M2HF_SIZE_FIELD("steps", train.steps),
      M2HF_DOUBLE_FIELD("lr_head", train.lr_head),
      M2HF_DOUBLE_FIELD("lr_backbone", train.lr_backbone),
      {"optimizer",
       {[](RunConfig& c, const std::string& v) {
          c.train.optimizer = wrap("optimizer", [&] { return parse_optimizer(v); });
        },
        [](const RunConfig& c) { return std::string(optimizer_name(c.train.optimizer)); }}},
      M2HF_DOUBLE_FIELD("beta1", train.beta1),
      M2HF_DOUBLE_FIELD("beta2", train.beta2),
      M2HF_DOUBLE_FIELD("adam_eps", train.adam_eps),
      M2HF_SIZE_FIELD("seed", train.seed),
      M2HF_DOUBLE_FIELD("lambda", train.loss.lambda),
      M2HF_DOUBLE_FIELD("eta", train.loss.eta),
      {"loss_fusion",
       {[](RunConfig& c, const std::string& v) {
          c.train.loss.fusion = wrap("loss_fusion", [&] { return parse_fusion(v); });
        },
        [](const RunConfig& c) { return std::string(fusion_name(c.train.loss.fusion)); }}},
      M2HF_BOOL_FIELD("dsl_prior_grad", train.loss.prior_grad),
      M2HF_SIZE_FIELD("pairs", synth.pairs),
      M2HF_DOUBLE_FIELD("correlation", synth.correlation),
      M2HF_DOUBLE_FIELD("asr_correlation", synth.asr_correlation),
      M2HF_DOUBLE_FIELD("missing_audio", synth.missing_audio),
      M2HF_DOUBLE_FIELD("missing_motion", synth.missing_motion),
      M2HF_STRING_FIELD("stopwords", lexicon.stopwords),
      M2HF_STRING_FIELD("nouns", lexicon.nouns),
      {"stemmer",
       {[](RunConfig& c, const std::string& v) {
          c.lexicon.stemmer = wrap("stemmer", [&] { return parse_stemmer(v); });
        },
        [](const RunConfig& c) { return std::string(stemmer_name(c.lexicon.stemmer)); }}},
      {"drop",
       {[](RunConfig& c, const std::string& v) { c.drop = wrap("drop", [&] { return parse_level_list(v); }); },
        [](const RunConfig& c) { return format_level_list(c.drop); }}},
      {"eval_fusion",
       {[](RunConfig& c, const std::string& v) { c.eval_fusion = wrap("eval_fusion", [&] { return parse_fusion(v); }); },
        [](const RunConfig& c) { return std::string(fusion_name(c.eval_fusion)); }}},
  };
  return table;
}

#undef M2HF_SIZE_FIELD
#undef M2HF_DOUBLE_FIELD
#undef M2HF_BOOL_FIELD
#undef M2HF_STRING_FIELD

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return f;
  }
  throw UsageError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string());
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + " = " + f.get(*this) + "\n";
  return out;
}

}  // namespace m2hf
