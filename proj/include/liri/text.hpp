#pragma once

/** \file text.hpp
 *  \brief Deterministic tokenization shared by the sparse and dense paths.
 *
 * Pipeline, in order: whitespace split, lowercasing, edge punctuation
 * stripping, stopword removal, Porter stemming. Each stage is a toggle in
 * TokenizerConfig. The sparse path enables everything; the dense path keeps
 * stopwords and skips stemming.
 */

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace liri {

using TokenSeq = std::vector<std::string>;

struct TokenizerConfig {
  bool lowercase = true;
  bool strip_punctuation = true;
  std::set<std::string, std::less<>> stopwords;
  bool stem = false;

  /// Lowercase, strip punctuation, built-in stopwords, stemming.
  static TokenizerConfig sparse_default();
  /// Lowercase and strip punctuation only.
  static TokenizerConfig dense_default();

  friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

TokenSeq tokenize(const TokenizerConfig& config, std::string_view text);

/// Built-in English stopword list.
const std::set<std::string, std::less<>>& default_stopwords();

/// One token per line; blank lines and `#` comments are ignored.
std::set<std::string, std::less<>> load_stopwords(const std::filesystem::path& path);
std::set<std::string, std::less<>> parse_stopwords(std::string_view contents);

/// Classic Porter (1980) stemmer. Input is expected lowercase; words of
/// length <= 2 or containing non a-z bytes are returned unchanged.
std::string porter_stem(std::string_view word);

/// True for code points treated as punctuation or symbols.
bool is_punct_or_symbol(char32_t cp) noexcept;

}  // namespace liri
