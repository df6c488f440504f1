#pragma once

/** \file evalbench.hpp
 *  \brief Score ensembling, the seeded k-examples-per-doc protocol and latency measurement.
 */

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liri/dense.hpp"
#include "liri/metrics.hpp"
#include "liri/sparse.hpp"
#include "liri/training.hpp"

namespace liri {

struct EnsembleWeights {
  double w_a = 0.3;
  double w_b = 1.0;

  void validate() const;
  /// "A:B", e.g. "0.3:1".
  static EnsembleWeights parse(std::string_view text);

  friend bool operator==(const EnsembleWeights&, const EnsembleWeights&) = default;
};

/// Raw linear combination w_a*a(p) + w_b*b(p), ranked over the whole corpus.
/// Throws Errc::invalid_argument listing the symmetric difference when the id sets differ.
RankedResult ensemble_scores(const ScoreMap& a, const ScoreMap& b, const EnsembleWeights& w);

class RetrievalSystem {
 public:
  virtual ~RetrievalSystem() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  /// End to end: tokenization, encoding and ranking.
  [[nodiscard]] virtual RankedResult search(std::string_view query, std::size_t k) const = 0;
  /// Scores for every passage in the corpus.
  [[nodiscard]] virtual ScoreMap score_all(std::string_view query) const = 0;
  /// Serialized index size (plus parameter bytes for learned systems).
  [[nodiscard]] virtual std::size_t index_bytes() const = 0;
};

class Bm25System final : public RetrievalSystem {
 public:
  explicit Bm25System(Bm25Index index) : index_(std::move(index)) {}
  [[nodiscard]] std::string name() const override { return "bm25"; }
  [[nodiscard]] RankedResult search(std::string_view query, std::size_t k) const override;
  [[nodiscard]] ScoreMap score_all(std::string_view query) const override;
  [[nodiscard]] std::size_t index_bytes() const override;
  [[nodiscard]] const Bm25Index& index() const noexcept { return index_; }

 private:
  Bm25Index index_;
};

class DenseSystem final : public RetrievalSystem {
 public:
  DenseSystem(EncoderParams params, TokenVectorIndex index, DenseSearchOptions options);
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] RankedResult search(std::string_view query, std::size_t k) const override;
  [[nodiscard]] ScoreMap score_all(std::string_view query) const override;
  [[nodiscard]] std::size_t index_bytes() const override;
  [[nodiscard]] const EncoderParams& params() const noexcept { return params_; }
  [[nodiscard]] const TokenVectorIndex& index() const noexcept { return index_; }

 private:
  EncoderParams params_;
  TokenVectorIndex index_;
  DenseSearchOptions options_;
};

class EnsembleSystem final : public RetrievalSystem {
 public:
  EnsembleSystem(std::unique_ptr<RetrievalSystem> a, std::unique_ptr<RetrievalSystem> b,
                 EnsembleWeights weights);
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] RankedResult search(std::string_view query, std::size_t k) const override;
  [[nodiscard]] ScoreMap score_all(std::string_view query) const override;
  [[nodiscard]] std::size_t index_bytes() const override;

 private:
  std::unique_ptr<RetrievalSystem> a_;
  std::unique_ptr<RetrievalSystem> b_;
  EnsembleWeights weights_;
};

/// Rankings (top k) for each query.
std::map<std::string, RankedResult> rank_queries(const RetrievalSystem& system,
                                                 std::span<const Query> queries, std::size_t k);

/// Builds a system from a training view (all passages, sampled training
/// queries, no test queries) and a seed.
using SystemFactory =
    std::function<std::unique_ptr<RetrievalSystem>(const Dataset& train_view, std::uint64_t seed)>;

/// Samples k training queries per passage without replacement, in passage order.
/// Throws Errc::insufficient_queries naming the first short passage.
Dataset sample_training_view(const Dataset& dataset, std::uint32_t k_ex_per_doc, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  double match1 = 0.0;
  double match3 = 0.0;
};

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t samples = 0;
  std::size_t index_bytes = 0;
};

struct EvalReport {
  std::string system;
  std::string dataset;
  std::uint32_t k_ex_per_doc = 0;
  std::vector<SeedResult> per_seed;
  double match1 = 0.0;  // mean over seeds
  double match1_std = 0.0;
  double match3 = 0.0;
  double match3_std = 0.0;
  LatencyStats latency;  // left empty by run_protocol
  std::size_t index_bytes = 0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for one value
};
MeanStd mean_std(std::span<const double> values);

/// Mean and sample std of match1/match3 from per_seed.
void aggregate(EvalReport& report);

/// Seeds 0..n-1.
std::vector<std::uint64_t> default_seeds(std::size_t n = 10);

/// k_ex_per_doc == 0 builds from the passages alone (0-shot).
EvalReport run_protocol(const Dataset& dataset, std::uint32_t k_ex_per_doc,
                        std::span<const std::uint64_t> seeds, const SystemFactory& factory);

/// Sequential single-threaded timing of search() per query; the first
/// `warmup` passes over the queries are discarded.
LatencyStats benchmark_latency(const RetrievalSystem& system, std::span<const std::string> queries,
                               std::size_t warmup, std::size_t reps, std::size_t k = 10);

/// Linear-interpolated percentile, q in [0, 100]. `values` need not be sorted.
double percentile(std::vector<double> values, double q);

/// One JSON object per seed, then an aggregate record.
std::string format_report(const EvalReport& report);
/// "system<TAB>0-shot<TAB>1 ex/doc<TAB>3 ex/doc", cells as mean(std) on a 0-100 scale.
std::string summary_header();
std::string summary_row(std::string_view system, std::span<const EvalReport> reports);

/// Dense factory: trains with `strategy` on the view, then builds the token index.
SystemFactory dense_factory(Strategy strategy, const EncoderConfig& encoder,
                            const TrainConfig& train, const DenseSearchOptions& search,
                            std::optional<std::uint32_t> ivf_clusters = std::nullopt);
SystemFactory bm25_factory(const Bm25Params& params = {});

}  // namespace liri
