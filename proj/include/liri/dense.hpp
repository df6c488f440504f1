#pragma once

/** \file dense.hpp
 *  \brief Late-interaction and single-vector dense retrieval.
 *
 * A TokenVectorIndex holds every kept passage token vector (the "entries")
 * plus the per-passage token matrices used for exact reranking. Late
 * interaction search is fetch-then-rerank: each query token pulls its k_tok
 * nearest entries (optionally restricted to the nprobe closest IVF lists),
 * the union of their passages is rescored exactly with SumMaxSim.
 *
 * An index is tied to the checkpoint that encoded it; searching with a
 * different checkpoint version throws Errc::stale_index.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "liri/encoder.hpp"
#include "liri/text.hpp"
#include "liri/types.hpp"

namespace liri {

struct TokenizedPassage {
  std::string id;
  TokenSeq tokens;
};

/// Checks dimensions, then delegates to the kernel.
double sim(std::span<const float> u, std::span<const float> v, Similarity mode);
/// Throws Errc::empty_passage when `p` has no rows; an empty `q` scores 0.
double summaxsim(const TokenMatrix& q, const TokenMatrix& p, Similarity mode);
/// Dot product; throws Errc::dimension_mismatch.
double single_vector_score(std::span<const double> qv, std::span<const double> pv);

struct IvfLists {
  std::vector<float> centroids;             // clusters x dim
  std::vector<std::uint32_t> assignments;   // entry -> centroid
  std::vector<std::vector<std::uint32_t>> lists;  // centroid -> entries, ascending

  [[nodiscard]] std::uint32_t clusters(std::uint32_t dim) const noexcept {
    return static_cast<std::uint32_t>(centroids.size() / dim);
  }
};

struct KMeansResult {
  std::vector<float> centroids;
  std::vector<std::uint32_t> assignments;
  int iterations = 0;
};

/// Lloyd's k-means under squared L2: seeded init from distinct random rows,
/// at most `max_iters` iterations or until no centroid moves more than 1e-6.
/// An emptied cluster is reseeded from the row farthest from its centroid.
/// Throws Errc::cancelled when `stop` is requested between iterations.
KMeansResult kmeans(std::span<const float> vectors, std::uint32_t dim, std::uint32_t k,
                    std::uint64_t seed, int max_iters = 25, std::stop_token stop = {});

struct IndexBuildOptions {
  /// nullopt: exact index. 0: round(sqrt(token count)). Otherwise the cluster count.
  std::optional<std::uint32_t> ivf_clusters;
  std::uint64_t seed = 0;
  /// Checked between passages and k-means iterations; a request throws Errc::cancelled.
  std::stop_token stop;
};

struct TokenVectorIndex {
  static constexpr std::string_view kMagic = "LIRI-TVIX-v1";

  std::uint64_t built_from_version = 0;
  EncoderConfig config;
  TokenizerConfig tokenizer;
  std::uint64_t seed = 0;
  std::vector<std::string> passage_ids;
  std::vector<TokenMatrix> passage_matrices;
  std::vector<std::vector<double>> pooled;  // mean of each passage matrix
  std::vector<float> entries;               // n_entries x dim
  std::vector<std::uint32_t> entry_passage;
  std::vector<std::uint32_t> entry_offset;
  std::optional<IvfLists> ivf;

  [[nodiscard]] std::size_t n_entries() const noexcept { return entry_passage.size(); }
  [[nodiscard]] std::size_t n_passages() const noexcept { return passage_ids.size(); }

  /// Throws Errc::malformed if any structural invariant is broken.
  void check() const;

  [[nodiscard]] std::string serialize() const;
  static TokenVectorIndex deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static TokenVectorIndex load(const std::filesystem::path& path);

  friend bool operator==(const TokenVectorIndex& a, const TokenVectorIndex& b);
};

/// Throws Errc::empty_corpus, Errc::duplicate_id, Errc::empty_passage (a
/// passage with no tokens) or Errc::invalid_argument (more clusters than tokens).
TokenVectorIndex build_token_index(const EncoderParams& params,
                                   std::span<const TokenizedPassage> passages,
                                   TokenizerConfig tokenizer, const IndexBuildOptions& options);
TokenVectorIndex build_token_index(const EncoderParams& params, std::span<const Passage> passages,
                                   const TokenizerConfig& tokenizer,
                                   const IndexBuildOptions& options);

/// Re-encodes with `params`, keeping prev's IVF configuration and seed.
TokenVectorIndex refresh_index(const EncoderParams& params,
                               std::span<const TokenizedPassage> passages,
                               const TokenVectorIndex& prev, std::stop_token stop = {});
TokenVectorIndex refresh_index(const EncoderParams& params, std::span<const Passage> passages,
                               const TokenVectorIndex& prev, std::stop_token stop = {});

/// Passage positions (ascending) reached by the per-token nearest entries.
std::vector<std::uint32_t> ann_candidate_positions(const TokenVectorIndex& index,
                                                   const TokenMatrix& q, std::size_t k_tok,
                                                   std::size_t nprobe);
std::set<std::string> ann_candidates(const TokenVectorIndex& index, const TokenMatrix& q,
                                     std::size_t k_tok, std::size_t nprobe);

enum class DenseMode { late_interaction, single_vector };

struct DenseSearchOptions {
  std::size_t k = 10;
  std::size_t k_tok = 8;
  std::size_t nprobe = 4;
  DenseMode mode = DenseMode::late_interaction;
  /// Late interaction only: rerank every passage instead of ANN candidates.
  bool exhaustive = false;
};

/// Throws Errc::stale_index when the index was built from another checkpoint version.
RankedResult dense_search(const TokenVectorIndex& index, const EncoderParams& params,
                          std::string_view query_text, const DenseSearchOptions& options);
RankedResult dense_search_tokens(const TokenVectorIndex& index, const EncoderParams& params,
                                 const TokenSeq& query, const DenseSearchOptions& options);

/// Exact scores for every passage (SumMaxSim or pooled dot product).
ScoreMap dense_score_all(const TokenVectorIndex& index, const EncoderParams& params,
                         std::string_view query_text, DenseMode mode);
std::vector<double> dense_score_all_tokens(const TokenVectorIndex& index,
                                           const EncoderParams& params, const TokenSeq& query,
                                           DenseMode mode);

}  // namespace liri
