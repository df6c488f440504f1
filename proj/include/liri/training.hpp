#pragma once

/** \file training.hpp
 *  \brief Training strategies: one-pass, self-directed iterative, asynchronous.
 *
 * The Sampler role refreshes a token index from a checkpoint, ranks every
 * training query and curates hard-negative triples. The Trainer role runs
 * gradient-descent epochs over a triple batch and emits new checkpoints.
 *
 * iterative_train alternates the two roles on one thread. async_train runs
 * them concurrently: the Trainer never waits for a fresh batch (except the
 * very first one) and keeps training on the batch it has; the Sampler always
 * curates from the newest published checkpoint.
 */

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "liri/learn.hpp"

namespace liri {

struct TrainConfig {
  double learning_rate = 0.05;
  std::uint32_t epochs_per_round = 6;
  std::uint32_t max_rounds = 5;
  std::uint32_t m = 20;
  std::uint32_t r_rand = 3;
  double target_train_match1 = 0.95;
  std::uint32_t minibatch_size = 32;
  std::uint64_t seed = 0;
  /// Epochs for the one-pass strategies (all negatives, BM25 guided).
  std::uint32_t one_pass_epochs = 10;
  // Sampler-side retrieval.
  std::uint32_t k_tok = 8;
  std::uint32_t nprobe = 4;
  /// nullopt: exact token index; 0: round(sqrt(tokens)) IVF lists.
  std::optional<std::uint32_t> ivf_clusters = 0u;
  /// Test hook: extra latency added to every async Sampler batch.
  std::chrono::milliseconds sampler_delay{0};
  /// Async only: nice value for the Sampler thread (0..19), so the Trainer
  /// keeps the CPU when the two roles share a core. 0 leaves priority alone.
  int sampler_nice = 10;

  void validate() const;
};

enum class Strategy { all_negatives, bm25_guided, iterative, async };

const char* strategy_name(Strategy s) noexcept;
/// Accepts allneg, bm25guided, iterative, async.
Strategy parse_strategy(std::string_view name);

struct RoundRecord {
  std::uint32_t round = 0;
  std::size_t triples = 0;         // size of the batch(es) trained on this round
  std::size_t triple_updates = 0;  // triples x epochs
  double loss_mean = 0.0;
  double train_match1 = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t version = 0;
};

struct EpochRecord {
  std::uint32_t epoch = 0;
  std::uint64_t batch_version = 0;  // checkpoint that curated the batch
  std::size_t triples = 0;
  double loss_mean = 0.0;
  double seconds = 0.0;
  std::uint64_t version = 0;
};

struct TrainHistory {
  std::string strategy;
  std::vector<RoundRecord> rounds;
  std::vector<EpochRecord> epochs;
  bool reached_target = false;
  bool stopped_on_empty_batch = false;
  std::size_t batches_adopted = 0;
  std::size_t total_triple_updates = 0;
  double total_seconds = 0.0;

  [[nodiscard]] double final_train_match1() const noexcept {
    return rounds.empty() ? 0.0 : rounds.back().train_match1;
  }
};

/// One JSON object per line: a record per round, per epoch, then a summary.
std::string format_history(const TrainHistory& history);
void save_history(const TrainHistory& history, const std::filesystem::path& path);

struct TrainResult {
  EncoderParams params;
  TrainHistory history;
};

/// Train Match@1 of `params` on the set's queries, with exhaustive exact SumMaxSim ranking.
double train_match_at_1(const EncoderParams& params, const TrainingSet& set);

/// Rankings from a refreshed (or newly built) token index and the curated triples.
class Sampler {
 public:
  Sampler(const TrainingSet& set, const TrainConfig& config, std::uint64_t seed);
  TripleBatch curate(const EncoderParams& checkpoint);
  /// As curate(), abandoning the work (nullopt) once `stop` is requested.
  std::optional<TripleBatch> curate(const EncoderParams& checkpoint, std::stop_token stop);

 private:
  const TrainingSet& set_;
  TrainConfig config_;
  Rng rng_;
  std::optional<TokenVectorIndex> index_;
};

/// Trains `epochs` epochs over a fixed batch (all negatives / BM25 guided).
TrainResult train_one_pass(const Dataset& dataset, const EncoderConfig& encoder,
                           const TrainConfig& config, const TripleBatch& batch,
                           std::string strategy_label);

TrainResult iterative_train(const Dataset& dataset, const EncoderConfig& encoder,
                            const TrainConfig& config);

TrainResult async_train(const Dataset& dataset, const EncoderConfig& encoder,
                        const TrainConfig& config);

/// Dispatches on strategy; the one-pass strategies build their batch first.
TrainResult train(Strategy strategy, const Dataset& dataset, const EncoderConfig& encoder,
                  const TrainConfig& config);

/// Monotone checkpoint store: publish() keeps only strictly newer versions.
class CheckpointStore {
 public:
  explicit CheckpointStore(std::shared_ptr<const EncoderParams> initial);

  bool publish(std::shared_ptr<const EncoderParams> checkpoint);
  [[nodiscard]] std::shared_ptr<const EncoderParams> latest() const;
  /// Blocks until a version newer than `after` exists; nullptr once stop is requested.
  std::shared_ptr<const EncoderParams> wait_newer(std::uint64_t after, std::stop_token stop) const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable_any cv_;
  std::shared_ptr<const EncoderParams> latest_;
};

/// Single-slot mailbox; a deposit replaces any batch not yet taken.
class BatchMailbox {
 public:
  void deposit(TripleBatch batch);
  std::optional<TripleBatch> try_take();
  /// Blocks until a deposit arrives; nullopt once stop is requested.
  std::optional<TripleBatch> wait_take(std::stop_token stop);
  [[nodiscard]] std::size_t deposits() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable_any cv_;
  std::optional<TripleBatch> slot_;
  std::size_t deposits_ = 0;
};

}  // namespace liri
