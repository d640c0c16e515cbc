#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "m2hf/similarity.hpp"

namespace m2hf {

enum class Stemmer { suffix_strip, identity };

Stemmer parse_stemmer(std::string_view name);
std::string_view stemmer_name(Stemmer s);

/// Lowercase noun stems with stopwords removed.
using TokenSet = std::set<std::string>;

struct LexiconConfig {
  std::set<std::string> stopwords;
  std::set<std::string> noun_stems;
  Stemmer stemmer = Stemmer::suffix_strip;

  /// Stems every noun word; stems that collide with a stopword are dropped so
  /// that preprocessing is idempotent.
  static LexiconConfig from_words(const std::vector<std::string>& stopwords, const std::vector<std::string>& nouns,
                                  Stemmer stemmer);
  static LexiconConfig from_files(const std::filesystem::path& stopword_file, const std::filesystem::path& noun_file,
                                  Stemmer stemmer);
  /// Built-in lists.
  static LexiconConfig defaults(Stemmer stemmer = Stemmer::suffix_strip);
};

/// One token per line, '#' comments, blank lines ignored; lowercased.
std::vector<std::string> parse_word_list(const std::string& text);
std::vector<std::string> load_word_list(const std::filesystem::path& path);

const std::vector<std::string>& default_stopword_words();
const std::vector<std::string>& default_noun_words();

/// Suffix stripping (possessive, plural, -ing, -ed) iterated to a fixed point.
std::string stem(std::string_view word, Stemmer stemmer = Stemmer::suffix_strip);

/// lowercase -> drop stopwords -> keep tokens whose stem is a known noun ->
/// stem -> deduplicate.
TokenSet preprocess(const std::vector<std::string>& tokens, const LexiconConfig& cfg);

/// |a ∩ b| / |a ∪ b|, and 0 when both are empty.
double jaccard(const TokenSet& a, const TokenSet& b);

SimilarityMatrix text_similarity_matrix(const std::vector<std::vector<std::string>>& caption_tokens,
                                        const std::vector<std::vector<std::string>>& video_asr_tokens,
                                        const LexiconConfig& cfg);

}  // namespace m2hf
