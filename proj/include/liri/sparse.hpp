#pragma once

/** \file sparse.hpp
 *  \brief BM25 inverted index.
 *
 * Scoring uses the Lucene form of idf, ln(1 + (N - df + 0.5) / (df + 0.5)),
 * which is never negative. A repeated query term contributes once per
 * occurrence in the query.
 *
 * Thread-safety: the index is immutable after build(); concurrent readers are fine.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "liri/text.hpp"
#include "liri/types.hpp"

namespace liri {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  void validate() const;
  friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct Posting {
  std::uint32_t doc = 0;  // position in Bm25Index::passage_ids()
  std::uint32_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

class Bm25Index {
 public:
  static constexpr std::string_view kMagic = "LIRI-BM25-v1";

  /// Throws Errc::empty_corpus or Errc::duplicate_id.
  static Bm25Index build(std::span<const Passage> passages, TokenizerConfig tokenizer,
                         Bm25Params params = {});

  [[nodiscard]] double idf(std::string_view term) const;

  /// Throws Errc::unknown_id for an id not in the corpus.
  [[nodiscard]] double score(const TokenSeq& query, std::string_view passage_id) const;

  /// Top-k by score; zero-score passages are omitted.
  [[nodiscard]] RankedResult search(std::string_view query_text, std::size_t k) const;

  /// Scores every passage (zeros included).
  [[nodiscard]] ScoreMap score_all(std::string_view query_text) const;
  [[nodiscard]] std::vector<double> score_all_tokens(const TokenSeq& query) const;

  [[nodiscard]] std::string serialize() const;
  static Bm25Index deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Bm25Index load(const std::filesystem::path& path);

  [[nodiscard]] std::size_t n_docs() const noexcept { return ids_.size(); }
  [[nodiscard]] double avgdl() const noexcept { return avgdl_; }
  [[nodiscard]] const Bm25Params& params() const noexcept { return params_; }
  [[nodiscard]] const TokenizerConfig& tokenizer() const noexcept { return tokenizer_; }
  [[nodiscard]] const std::vector<std::string>& passage_ids() const noexcept { return ids_; }
  [[nodiscard]] std::uint32_t doc_len(std::string_view passage_id) const;
  [[nodiscard]] const std::map<std::string, std::vector<Posting>, std::less<>>& postings()
      const noexcept {
    return postings_;
  }

  friend bool operator==(const Bm25Index& a, const Bm25Index& b) {
    return a.params_ == b.params_ && a.tokenizer_ == b.tokenizer_ && a.ids_ == b.ids_ &&
           a.doc_len_ == b.doc_len_ && a.avgdl_ == b.avgdl_ && a.postings_ == b.postings_;
  }

 private:
  void rebuild_lookup();
  [[nodiscard]] std::uint32_t doc_index(std::string_view passage_id) const;
  [[nodiscard]] double term_weight(double idf, std::uint32_t tf, std::uint32_t dl) const;

  Bm25Params params_;
  TokenizerConfig tokenizer_;
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> doc_len_;
  double avgdl_ = 0.0;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
  std::unordered_map<std::string, std::uint32_t> id_lookup_;
};

}  // namespace liri
