#pragma once

/** \file learn.hpp
 *  \brief Training objective, gradients and training-triple curation.
 *
 * The objective for a triple <q, p+, p-> is the two-way softmax cross
 * entropy ln(1 + exp(S(q,p-) - S(q,p+))) with S = SumMaxSim. Gradients are
 * analytic: each query row sends its gradient only to its argmax passage row
 * (first index on ties), and rows that share a hash bucket accumulate.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "liri/dense.hpp"
#include "liri/encoder.hpp"
#include "liri/random.hpp"
#include "liri/sparse.hpp"
#include "liri/types.hpp"

namespace liri {

struct TrainingTriple {
  std::string query_id;
  std::string pos_id;
  std::string neg_id;

  friend bool operator==(const TrainingTriple&, const TrainingTriple&) = default;
};

struct TripleBatch {
  std::vector<TrainingTriple> triples;
  std::uint64_t curated_by_version = 0;

  [[nodiscard]] bool empty() const noexcept { return triples.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return triples.size(); }
};

/// ln(1 + exp(s_neg - s_pos)) without overflow. Throws Errc::non_finite.
double pairwise_loss(double s_pos, double s_neg);

/// Row gradients keyed by bucket.
struct SparseGradient {
  std::uint32_t dim = 0;
  std::unordered_map<std::uint32_t, std::vector<double>> rows;

  std::span<double> row(std::uint32_t bucket);
  [[nodiscard]] std::vector<double> dense(std::uint32_t buckets) const;
};

/// Loss of one triple given bucket sequences; adds weight * dloss/dtable into
/// `grad` when non-null. Throws Errc::empty_passage for an empty p+ or p-.
double triple_loss_grad(const EncoderParams& params, std::span<const std::uint32_t> query,
                        std::span<const std::uint32_t> pos, std::span<const std::uint32_t> neg,
                        double weight, SparseGradient* grad);

/// Tokenized, hashed view of a corpus plus one query set, resolved by id.
class TrainingSet {
 public:
  TrainingSet(std::span<const Passage> passages, std::span<const Query> queries,
              const EncoderConfig& config,
              TokenizerConfig tokenizer = TokenizerConfig::dense_default());

  struct Resolved {
    std::uint32_t query;
    std::uint32_t pos;
    std::uint32_t neg;
  };

  /// Throws Errc::unknown_id naming the unresolvable id.
  [[nodiscard]] Resolved resolve(const TrainingTriple& t) const;
  [[nodiscard]] std::uint32_t passage_pos(const std::string& id) const;
  [[nodiscard]] std::uint32_t query_pos(const std::string& id) const;

  [[nodiscard]] const std::vector<TokenizedPassage>& passages() const noexcept { return passages_; }
  [[nodiscard]] const std::vector<std::string>& passage_ids() const noexcept { return passage_ids_; }
  [[nodiscard]] const std::vector<Query>& queries() const noexcept { return queries_; }
  [[nodiscard]] const TokenSeq& query_tokens(std::uint32_t q) const { return query_tokens_[q]; }
  [[nodiscard]] const std::vector<std::uint32_t>& query_buckets(std::uint32_t q) const {
    return query_buckets_[q];
  }
  [[nodiscard]] const std::vector<std::uint32_t>& passage_buckets(std::uint32_t p) const {
    return passage_buckets_[p];
  }
  [[nodiscard]] const Qrels& qrels() const noexcept { return qrels_; }
  [[nodiscard]] const TokenizerConfig& tokenizer() const noexcept { return tokenizer_; }
  [[nodiscard]] const EncoderConfig& config() const noexcept { return config_; }

 private:
  EncoderConfig config_;
  TokenizerConfig tokenizer_;
  std::vector<TokenizedPassage> passages_;
  std::vector<std::string> passage_ids_;
  std::vector<std::vector<std::uint32_t>> passage_buckets_;
  std::vector<Query> queries_;
  std::vector<TokenSeq> query_tokens_;
  std::vector<std::vector<std::uint32_t>> query_buckets_;
  std::unordered_map<std::string, std::uint32_t> passage_lookup_;
  std::unordered_map<std::string, std::uint32_t> query_lookup_;
  Qrels qrels_;
};

/// Mean loss and gradient of the mean over a minibatch.
double minibatch_loss_grad(const EncoderParams& params, std::span<const TrainingSet::Resolved> batch,
                           const TrainingSet& set, SparseGradient* grad);

/// In-place plain gradient descent step; bumps the version by one. Returns the mean loss.
double apply_step(EncoderParams& params, std::span<const TrainingSet::Resolved> batch,
                  const TrainingSet& set, double lr);

struct StepResult {
  EncoderParams params;
  double mean_loss = 0.0;
};

/// Pure form of apply_step: returns a new checkpoint, leaves `params` alone.
/// Throws Errc::invalid_argument on an empty minibatch, Errc::unknown_id on bad ids.
StepResult grad_step(const EncoderParams& params, std::span<const TrainingTriple> minibatch,
                     const TrainingSet& set, double lr);

/// Hard-negative curation from rankings. For each qrels query with gold at
/// rank i within the top m: i > 1 gives the i-1 triples whose negatives are
/// exactly the passages ranked above gold; i = 1 gives r_rand triples with
/// negatives drawn uniformly without replacement from corpus minus gold;
/// gold outside the top m uses every listed top-m passage as a negative.
/// Throws Errc::unknown_id when a qrels query has no ranking.
TripleBatch curate_triples(const std::map<std::string, RankedResult>& rankings,
                           const Qrels& qrels, std::span<const std::string> corpus_ids,
                           std::size_t m, std::size_t r_rand, Rng& rng,
                           std::uint64_t version = 0);

/// One triple per (query, non-gold passage).
TripleBatch all_negatives_triples(std::span<const Query> queries,
                                  std::span<const std::string> corpus_ids);

/// curate_triples over BM25 top-m rankings.
TripleBatch bm25_guided_triples(const Bm25Index& bm25, std::span<const Query> queries,
                                std::size_t m, std::size_t r_rand, Rng& rng);

/// Tab-separated query_id, pos_id, neg_id; one triple per line.
std::string format_triples(const TripleBatch& batch);
TripleBatch parse_triples(std::string_view contents);
void save_triples(const TripleBatch& batch, const std::filesystem::path& path);

}  // namespace liri
