#include "liri/text.hpp"

#include <cstdint>

#include "liri/io.hpp"

namespace liri {

namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Decodes one UTF-8 sequence starting at s[i]; invalid bytes decode as
// themselves with length 1.
char32_t decode_at(std::string_view s, std::size_t i, std::size_t& len) {
  auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto byte = [&](std::size_t k) {
    return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    len = 2;
    return (static_cast<char32_t>(b0 & 0x1F) << 6) | byte(1);
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    len = 3;
    return (static_cast<char32_t>(b0 & 0x0F) << 12) | (byte(1) << 6) | byte(2);
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    len = 4;
    return (static_cast<char32_t>(b0 & 0x07) << 18) | (byte(1) << 12) | (byte(2) << 6) |
           byte(3);
  }
  len = 1;
  return b0;
}

// Length of the code point that ends at s[end - 1].
std::size_t last_cp_len(std::string_view s, std::size_t end) {
  std::size_t start = end - 1;
  while (start > 0 && end - start < 4 &&
         (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) {
    --start;
  }
  std::size_t len = 0;
  decode_at(s, start, len);
  return len == end - start ? len : 1;
}

void lowercase_in_place(std::string& token) {
  for (std::size_t i = 0; i < token.size(); ++i) {
    auto c = static_cast<unsigned char>(token[i]);
    if (c >= 'A' && c <= 'Z') {
      token[i] = static_cast<char>(c + 32);
    } else if (c == 0xC3 && i + 1 < token.size()) {
      // Latin-1 capitals U+00C0..U+00DE (except U+00D7) live at C3 80..C3 9E.
      auto c1 = static_cast<unsigned char>(token[i + 1]);
      if (c1 >= 0x80 && c1 <= 0x9E && c1 != 0x97) token[i + 1] = static_cast<char>(c1 + 0x20);
      ++i;
    }
  }
}

std::string_view strip_edges(std::string_view token) {
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end) {
    std::size_t len = 0;
    auto cp = decode_at(token, begin, len);
    if (!is_punct_or_symbol(cp)) break;
    begin += len;
  }
  while (end > begin) {
    std::size_t len = last_cp_len(token, end);
    std::size_t l2 = 0;
    auto cp = decode_at(token, end - len, l2);
    if (!is_punct_or_symbol(cp)) break;
    end -= len;
  }
  return token.substr(begin, end - begin);
}

}  // namespace

bool is_punct_or_symbol(char32_t cp) noexcept {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  // Latin-1: everything in A1..BF except the letters and digits in that block.
  if (cp >= 0xA1 && cp <= 0xBF) {
    return cp != 0xAA && cp != 0xB2 && cp != 0xB3 && cp != 0xB5 && cp != 0xB9 &&
           cp != 0xBA && cp != 0xBC && cp != 0xBD && cp != 0xBE;
  }
  if (cp == 0xD7 || cp == 0xF7) return true;
  if (cp >= 0x2010 && cp <= 0x2027) return true;   // dashes, quotes, bullets
  if (cp >= 0x2030 && cp <= 0x205E) return true;   // per mille, primes, misc
  if (cp >= 0x20A0 && cp <= 0x20CF) return true;   // currency
  if (cp >= 0x2190 && cp <= 0x23FF) return true;   // arrows, math, technical
  if (cp >= 0x2500 && cp <= 0x27BF) return true;   // box drawing .. dingbats
  if (cp >= 0x3001 && cp <= 0x3003) return true;   // CJK comma, full stop
  if (cp >= 0x3008 && cp <= 0x3011) return true;   // CJK brackets
  if (cp >= 0xFF01 && cp <= 0xFF0F) return true;   // fullwidth ASCII punct
  return false;
}

TokenizerConfig TokenizerConfig::sparse_default() {
  TokenizerConfig c;
  c.stopwords = default_stopwords();
  c.stem = true;
  return c;
}

TokenizerConfig TokenizerConfig::dense_default() { return TokenizerConfig{}; }

TokenSeq tokenize(const TokenizerConfig& config, std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    if (start == i) continue;

    std::string token(text.substr(start, i - start));
    if (config.lowercase) lowercase_in_place(token);
    if (config.strip_punctuation) token = std::string(strip_edges(token));
    if (token.empty()) continue;
    if (config.stopwords.contains(token)) continue;
    if (config.stem) token = porter_stem(token);
    if (!token.empty()) out.push_back(std::move(token));
  }
  return out;
}

const std::set<std::string, std::less<>>& default_stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "a",       "about",   "above",  "after",   "again",  "against", "all",     "am",
      "an",      "and",     "any",    "are",     "as",     "at",      "be",      "because",
      "been",    "before",  "being",  "below",   "between", "both",   "but",     "by",
      "can",     "could",   "did",    "do",      "does",   "doing",   "down",    "during",
      "each",    "few",     "for",    "from",    "further", "had",    "has",     "have",
      "having",  "he",      "her",    "here",    "hers",   "herself", "him",     "himself",
      "his",     "how",     "i",      "if",      "in",     "into",    "is",      "it",
      "its",     "itself",  "just",   "me",      "more",   "most",    "my",      "myself",
      "no",      "nor",     "not",    "now",     "of",     "off",     "on",      "once",
      "only",    "or",      "other",  "our",     "ours",   "ourselves", "out",   "over",
      "own",     "same",    "she",    "should",  "so",     "some",    "such",    "than",
      "that",    "the",     "their",  "theirs",  "them",   "themselves", "then", "there",
      "these",   "they",    "this",   "those",   "through", "to",     "too",     "under",
      "until",   "up",      "very",   "was",     "we",     "were",    "what",    "when",
      "where",   "which",   "while",  "who",     "whom",   "why",     "will",    "with",
      "would",   "you",     "your",   "yours",   "yourself", "yourselves",
  };
  return words;
}

std::set<std::string, std::less<>> parse_stopwords(std::string_view contents) {
  std::set<std::string, std::less<>> words;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    auto line = contents.substr(pos, nl - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::size_t b = 0;
    std::size_t e = line.size();
    while (b < e && is_ascii_space(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && is_ascii_space(static_cast<unsigned char>(line[e - 1]))) --e;
    if (e > b) {
      std::string w(line.substr(b, e - b));
      for (auto& c : w) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      }
      words.insert(std::move(w));
    }
    pos = nl + 1;
  }
  return words;
}

std::set<std::string, std::less<>> load_stopwords(const std::filesystem::path& path) {
  return parse_stopwords(io::read_file(path));
}

}  // namespace liri
