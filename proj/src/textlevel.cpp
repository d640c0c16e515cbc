#include "m2hf/textlevel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "m2hf/featureio.hpp"

namespace m2hf {

// Generated from data/*.txt at configure time.
extern const char* const kDefaultStopwordsText;
extern const char* const kDefaultNounsText;

Stemmer parse_stemmer(std::string_view name) {
  if (name == "suffix_strip") return Stemmer::suffix_strip;
  if (name == "identity") return Stemmer::identity;
  throw std::invalid_argument("unknown stemmer '" + std::string(name) + "'");
}

std::string_view stemmer_name(Stemmer s) { return s == Stemmer::identity ? "identity" : "suffix_strip"; }

std::vector<std::string> parse_word_list(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string word;
    if (fields >> word) {
      std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
      words.push_back(word);
    }
  }
  return words;
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word list " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_word_list(buf.str());
}

const std::vector<std::string>& default_stopword_words() {
  static const std::vector<std::string> words = parse_word_list(kDefaultStopwordsText);
  return words;
}

const std::vector<std::string>& default_noun_words() {
  static const std::vector<std::string> words = parse_word_list(kDefaultNounsText);
  return words;
}

LexiconConfig LexiconConfig::from_words(const std::vector<std::string>& stopwords,
                                        const std::vector<std::string>& nouns, Stemmer stemmer) {
  LexiconConfig cfg;
  cfg.stemmer = stemmer;
  for (const auto& w : stopwords) cfg.stopwords.insert(normalize_token(w));
  for (const auto& w : nouns) {
    std::string s = stem(normalize_token(w), stemmer);
    if (!s.empty() && !cfg.stopwords.contains(s)) cfg.noun_stems.insert(std::move(s));
  }
  return cfg;
}

LexiconConfig LexiconConfig::from_files(const std::filesystem::path& stopword_file,
                                        const std::filesystem::path& noun_file, Stemmer stemmer) {
  return from_words(load_word_list(stopword_file), load_word_list(noun_file), stemmer);
}

LexiconConfig LexiconConfig::defaults(Stemmer stemmer) {
  return from_words(default_stopword_words(), default_noun_words(), stemmer);
}

namespace {

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() && std::string_view(w).substr(w.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// "runn" -> "run", but keep "fall", "kiss", "buzz".
void undouble(std::string& w) {
  const std::size_t n = w.size();
  if (n >= 2 && w[n - 1] == w[n - 2] && !is_vowel(w[n - 1]) && w[n - 1] != 'l' && w[n - 1] != 's' &&
      w[n - 1] != 'z') {
    w.pop_back();
  }
}

std::string stem_once(std::string w) {
  if (ends_with(w, "'s")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "'")) {
    w.pop_back();
  }

  if (ends_with(w, "ies") && w.size() > 4) {
    w.resize(w.size() - 3);
    w += 'y';
  } else if (ends_with(w, "sses") || ends_with(w, "zzes")) {
    w.resize(w.size() - 2);
  } else if ((ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes")) && w.size() > 4) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is") &&
             w.size() > 3) {
    w.pop_back();
  }

  if (ends_with(w, "ing") && w.size() >= 6) {
    w.resize(w.size() - 3);
    undouble(w);
  } else if (ends_with(w, "ed") && !ends_with(w, "eed") && w.size() >= 5) {
    w.resize(w.size() - 2);
    undouble(w);
  }
  return w;
}

}  // namespace

std::string stem(std::string_view word, Stemmer stemmer) {
  std::string w(word);
  if (stemmer == Stemmer::identity) return w;
  for (;;) {
    std::string next = stem_once(w);
    if (next == w) return w;
    w = std::move(next);
  }
}

TokenSet preprocess(const std::vector<std::string>& tokens, const LexiconConfig& cfg) {
  TokenSet out;
  for (const auto& raw : tokens) {
    const std::string token = normalize_token(raw);
    if (token.empty() || cfg.stopwords.contains(token)) continue;
    std::string s = stem(token, cfg.stemmer);
    if (!cfg.noun_stems.contains(s)) continue;
    out.insert(std::move(s));
  }
  return out;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

SimilarityMatrix text_similarity_matrix(const std::vector<std::vector<std::string>>& caption_tokens,
                                        const std::vector<std::vector<std::string>>& video_asr_tokens,
                                        const LexiconConfig& cfg) {
  std::vector<TokenSet> caps, asr;
  caps.reserve(caption_tokens.size());
  asr.reserve(video_asr_tokens.size());
  for (const auto& c : caption_tokens) caps.push_back(preprocess(c, cfg));
  for (const auto& v : video_asr_tokens) asr.push_back(preprocess(v, cfg));
  SimilarityMatrix s{Level::text, Tensor({caps.size(), asr.size()})};
  for (std::size_t i = 0; i < caps.size(); ++i) {
    for (std::size_t j = 0; j < asr.size(); ++j) s.scores(i, j) = jaccard(caps[i], asr[j]);
  }
  return s;
}

}  // namespace m2hf
