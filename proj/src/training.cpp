#include "liri/training.hpp"

#include <exception>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <unistd.h>
#include <thread>

#include "json.hpp"

#include "liri/error.hpp"
#include "liri/io.hpp"

namespace liri {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kSamplerSalt = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kBm25Salt = 0xA0761D6478BD642FULL;

std::vector<TrainingSet::Resolved> resolve_all(const TripleBatch& batch, const TrainingSet& set) {
  std::vector<TrainingSet::Resolved> out;
  out.reserve(batch.size());
  for (const auto& t : batch.triples) out.push_back(set.resolve(t));
  return out;
}

// One pass over `triples` in a fresh random order; returns the mean loss per triple.
double run_epoch(EncoderParams& params, std::vector<TrainingSet::Resolved>& triples,
                 const TrainingSet& set, const TrainConfig& config, Rng& rng) {
  shuffle_in_place(triples, rng);
  double weighted = 0.0;
  const std::size_t mb = config.minibatch_size;
  for (std::size_t start = 0; start < triples.size(); start += mb) {
    auto len = std::min(mb, triples.size() - start);
    std::span<const TrainingSet::Resolved> chunk(triples.data() + start, len);
    weighted += apply_step(params, chunk, set, config.learning_rate) * static_cast<double>(len);
  }
  return triples.empty() ? 0.0 : weighted / static_cast<double>(triples.size());
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::invalid_argument, "train config: " + what); };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be >= 0");
  if (epochs_per_round < 1 || max_rounds < 1 || m < 1 || minibatch_size < 1 ||
      one_pass_epochs < 1 || k_tok < 1 || nprobe < 1) {
    fail("counts must be >= 1");
  }
  if (!(target_train_match1 >= 0.0 && target_train_match1 <= 1.0)) fail("target must be in [0,1]");
  if (sampler_nice < 0 || sampler_nice > 19) fail("sampler nice must be in [0,19]");
}

const char* strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::all_negatives: return "allneg";
    case Strategy::bm25_guided: return "bm25guided";
    case Strategy::iterative: return "iterative";
    case Strategy::async: return "async";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "allneg") return Strategy::all_negatives;
  if (name == "bm25guided") return Strategy::bm25_guided;
  if (name == "iterative") return Strategy::iterative;
  if (name == "async") return Strategy::async;
  throw Error(Errc::invalid_argument, "unknown strategy '" + std::string(name) + "'");
}

std::string format_history(const TrainHistory& h) {
  std::string out;
  for (const auto& r : h.rounds) {
    nlohmann::json j = {{"type", "round"},
                        {"strategy", h.strategy},
                        {"round", r.round},
                        {"triples", r.triples},
                        {"triple_updates", r.triple_updates},
                        {"loss_mean", r.loss_mean},
                        {"train_match1", r.train_match1},
                        {"wall_seconds", r.wall_seconds},
                        {"version", r.version}};
    out += j.dump() + "\n";
  }
  for (const auto& e : h.epochs) {
    nlohmann::json j = {{"type", "epoch"},          {"strategy", h.strategy},
                        {"epoch", e.epoch},         {"batch_version", e.batch_version},
                        {"triples", e.triples},     {"loss_mean", e.loss_mean},
                        {"seconds", e.seconds},     {"version", e.version}};
    out += j.dump() + "\n";
  }
  nlohmann::json s = {{"type", "summary"},
                      {"strategy", h.strategy},
                      {"rounds", h.rounds.size()},
                      {"epochs", h.epochs.size()},
                      {"reached_target", h.reached_target},
                      {"stopped_on_empty_batch", h.stopped_on_empty_batch},
                      {"batches_adopted", h.batches_adopted},
                      {"total_triple_updates", h.total_triple_updates},
                      {"total_seconds", h.total_seconds},
                      {"final_train_match1", h.final_train_match1()}};
  out += s.dump() + "\n";
  return out;
}

void save_history(const TrainHistory& history, const std::filesystem::path& path) {
  io::write_file_atomic(path, format_history(history));
}

double train_match_at_1(const EncoderParams& params, const TrainingSet& set) {
  if (set.queries().empty()) return 0.0;
  auto index = build_token_index(params, set.passages(), set.tokenizer(), IndexBuildOptions{});
  DenseSearchOptions opts;
  opts.k = 1;
  opts.exhaustive = true;
  std::size_t hits = 0;
  for (std::uint32_t q = 0; q < set.queries().size(); ++q) {
    auto top = dense_search_tokens(index, params, set.query_tokens(q), opts);
    if (!top.empty() && top.items[0].id == set.queries()[q].gold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(set.queries().size());
}

Sampler::Sampler(const TrainingSet& set, const TrainConfig& config, std::uint64_t seed)
    : set_(set), config_(config), rng_(seed) {}

TripleBatch Sampler::curate(const EncoderParams& checkpoint) {
  return *curate(checkpoint, std::stop_token{});
}

std::optional<TripleBatch> Sampler::curate(const EncoderParams& checkpoint, std::stop_token stop) {
  try {
    if (index_) {
      index_ = refresh_index(checkpoint, set_.passages(), *index_, stop);
    } else {
      IndexBuildOptions opts;
      opts.ivf_clusters = config_.ivf_clusters;
      opts.seed = config_.seed;
      opts.stop = stop;
      index_ = build_token_index(checkpoint, set_.passages(), set_.tokenizer(), opts);
    }
  } catch (const Error& e) {
    if (e.code() == Errc::cancelled) return std::nullopt;
    throw;
  }
  DenseSearchOptions search;
  search.k = config_.m;
  search.k_tok = config_.k_tok;
  search.nprobe = config_.nprobe;
  std::map<std::string, RankedResult> rankings;
  for (std::uint32_t q = 0; q < set_.queries().size(); ++q) {
    if (stop.stop_requested()) return std::nullopt;
    rankings[set_.queries()[q].id] =
        dense_search_tokens(*index_, checkpoint, set_.query_tokens(q), search);
  }
  return curate_triples(rankings, set_.qrels(), set_.passage_ids(), config_.m, config_.r_rand,
                        rng_, checkpoint.version);
}

TrainResult train_one_pass(const Dataset& dataset, const EncoderConfig& encoder,
                           const TrainConfig& config, const TripleBatch& batch,
                           std::string strategy_label) {
  config.validate();
  auto t0 = Clock::now();
  TrainingSet set(dataset.passages, dataset.train_queries, encoder);
  TrainResult res{init_params(encoder, config.seed), {}};
  res.history.strategy = std::move(strategy_label);
  Rng rng(config.seed ^ kShuffleSalt);

  auto triples = resolve_all(batch, set);
  double loss_sum = 0.0;
  for (std::uint32_t e = 1; e <= config.one_pass_epochs && !triples.empty(); ++e) {
    auto te = Clock::now();
    double loss = run_epoch(res.params, triples, set, config, rng);
    loss_sum += loss;
    res.history.epochs.push_back(
        {e, batch.curated_by_version, triples.size(), loss, seconds_since(te), res.params.version});
  }
  const auto epochs = res.history.epochs.size();
  RoundRecord r;
  r.round = 1;
  r.triples = triples.size();
  r.triple_updates = triples.size() * epochs;
  r.loss_mean = epochs ? loss_sum / static_cast<double>(epochs) : 0.0;
  r.train_match1 = train_match_at_1(res.params, set);
  r.version = res.params.version;
  r.wall_seconds = seconds_since(t0);
  res.history.rounds.push_back(r);
  res.history.batches_adopted = triples.empty() ? 0 : 1;
  res.history.total_triple_updates = r.triple_updates;
  res.history.reached_target = r.train_match1 >= config.target_train_match1;
  res.history.total_seconds = r.wall_seconds;
  return res;
}

TrainResult iterative_train(const Dataset& dataset, const EncoderConfig& encoder,
                            const TrainConfig& config) {
  config.validate();
  auto t_start = Clock::now();
  TrainingSet set(dataset.passages, dataset.train_queries, encoder);
  TrainResult res{init_params(encoder, config.seed), {}};
  auto& h = res.history;
  h.strategy = "iterative";
  Rng rng(config.seed ^ kShuffleSalt);
  Sampler sampler(set, config, config.seed ^ kSamplerSalt);
  std::uint32_t epoch_no = 0;

  for (std::uint32_t round = 1; round <= config.max_rounds; ++round) {
    auto t0 = Clock::now();
    auto batch = sampler.curate(res.params);
    if (batch.empty()) {
      h.stopped_on_empty_batch = true;
      h.reached_target = true;
      break;
    }
    ++h.batches_adopted;
    auto triples = resolve_all(batch, set);
    double loss_sum = 0.0;
    for (std::uint32_t e = 0; e < config.epochs_per_round; ++e) {
      auto te = Clock::now();
      double loss = run_epoch(res.params, triples, set, config, rng);
      loss_sum += loss;
      h.epochs.push_back({++epoch_no, batch.curated_by_version, triples.size(), loss,
                          seconds_since(te), res.params.version});
    }
    RoundRecord r;
    r.round = round;
    r.triples = triples.size();
    r.triple_updates = triples.size() * config.epochs_per_round;
    r.loss_mean = loss_sum / config.epochs_per_round;
    r.train_match1 = train_match_at_1(res.params, set);
    r.version = res.params.version;
    r.wall_seconds = seconds_since(t0);
    h.rounds.push_back(r);
    h.total_triple_updates += r.triple_updates;
    if (r.train_match1 >= config.target_train_match1) {
      h.reached_target = true;
      break;
    }
  }
  h.total_seconds = seconds_since(t_start);
  return res;
}

CheckpointStore::CheckpointStore(std::shared_ptr<const EncoderParams> initial)
    : latest_(std::move(initial)) {}

bool CheckpointStore::publish(std::shared_ptr<const EncoderParams> checkpoint) {
  {
    std::lock_guard lock(mu_);
    if (latest_ && checkpoint->version <= latest_->version) return false;
    latest_ = std::move(checkpoint);
  }
  cv_.notify_all();
  return true;
}

std::shared_ptr<const EncoderParams> CheckpointStore::latest() const {
  std::lock_guard lock(mu_);
  return latest_;
}

std::shared_ptr<const EncoderParams> CheckpointStore::wait_newer(std::uint64_t after,
                                                                 std::stop_token stop) const {
  std::unique_lock lock(mu_);
  bool ok = cv_.wait(lock, stop, [&] { return latest_ && latest_->version > after; });
  return ok ? latest_ : nullptr;
}

void BatchMailbox::deposit(TripleBatch batch) {
  {
    std::lock_guard lock(mu_);
    slot_ = std::move(batch);
    ++deposits_;
  }
  cv_.notify_all();
}

std::optional<TripleBatch> BatchMailbox::try_take() {
  std::lock_guard lock(mu_);
  auto out = std::move(slot_);
  slot_.reset();
  return out;
}

std::optional<TripleBatch> BatchMailbox::wait_take(std::stop_token stop) {
  std::unique_lock lock(mu_);
  if (!cv_.wait(lock, stop, [&] { return slot_.has_value(); })) return std::nullopt;
  auto out = std::move(slot_);
  slot_.reset();
  return out;
}

std::size_t BatchMailbox::deposits() const {
  std::lock_guard lock(mu_);
  return deposits_;
}

TrainResult async_train(const Dataset& dataset, const EncoderConfig& encoder,
                        const TrainConfig& config) {
  config.validate();
  auto t_start = Clock::now();
  TrainingSet set(dataset.passages, dataset.train_queries, encoder);
  TrainResult res{init_params(encoder, config.seed), {}};
  auto& h = res.history;
  h.strategy = "async";

  CheckpointStore store(std::make_shared<const EncoderParams>(res.params));
  BatchMailbox mailbox;
  std::stop_source stop;
  std::exception_ptr sampler_error;

  std::jthread sampler_thread([&, stop_token = stop.get_token()] {
    try {
      if (config.sampler_nice > 0) {
        // Per-thread on Linux; failure only costs scheduling preference.
        static_cast<void>(setpriority(PRIO_PROCESS, static_cast<id_t>(syscall(SYS_gettid)),
                                      config.sampler_nice));
      }
      Sampler sampler(set, config, config.seed ^ kSamplerSalt);
      std::optional<std::uint64_t> last;
      while (!stop_token.stop_requested()) {
        auto ckpt = last ? store.wait_newer(*last, stop_token) : store.latest();
        if (!ckpt) break;
        auto batch = sampler.curate(*ckpt, stop_token);
        if (!batch) break;
        if (config.sampler_delay.count() > 0) {
          std::mutex m;
          std::condition_variable_any cv;
          std::unique_lock lock(m);
          cv.wait_for(lock, stop_token, config.sampler_delay, [] { return false; });
          if (stop_token.stop_requested()) break;
        }
        mailbox.deposit(std::move(*batch));
        last = ckpt->version;
      }
    } catch (...) {
      sampler_error = std::current_exception();
      stop.request_stop();
    }
  });

  auto shutdown = [&] {
    stop.request_stop();
    if (sampler_thread.joinable()) sampler_thread.join();
  };
  auto rethrow_sampler = [&] {
    if (!sampler_error) return;
    try {
      std::rethrow_exception(sampler_error);
    } catch (const std::exception& e) {
      throw Error(Errc::role_failure, std::string("sampler role failed: ") + e.what());
    }
  };

  try {
    Rng rng(config.seed ^ kShuffleSalt);
    std::vector<TrainingSet::Resolved> current;
    std::uint64_t current_version = 0;
    bool have_batch = false;

    // Nothing to train on until the first batch arrives.
    auto first = mailbox.wait_take(stop.get_token());
    if (!first) {
      shutdown();
      rethrow_sampler();
      throw Error(Errc::role_failure, "sampler role stopped before producing a batch");
    }
    if (!first->empty()) {
      current = resolve_all(*first, set);
      current_version = first->curated_by_version;
      have_batch = true;
      ++h.batches_adopted;
    }

    const std::uint32_t total_epochs = config.max_rounds * config.epochs_per_round;
    auto round_start = Clock::now();
    double round_loss = 0.0;
    std::size_t round_updates = 0;
    std::size_t round_triples = 0;
    for (std::uint32_t epoch = 1; epoch <= total_epochs; ++epoch) {
      if (sampler_error) break;
      auto te = Clock::now();
      if (auto next = mailbox.try_take(); next && !next->empty() &&
                                          (!have_batch || next->curated_by_version > current_version)) {
        current = resolve_all(*next, set);
        current_version = next->curated_by_version;
        have_batch = true;
        ++h.batches_adopted;
      }
      double loss = 0.0;
      if (have_batch) {
        loss = run_epoch(res.params, current, set, config, rng);
      } else {
        ++res.params.version;  // epoch boundary without a batch still yields a new checkpoint
      }
      store.publish(std::make_shared<const EncoderParams>(res.params));
      h.epochs.push_back({epoch, current_version, current.size(), loss, seconds_since(te),
                          res.params.version});
      round_loss += loss;
      round_updates += current.size();
      round_triples = std::max(round_triples, current.size());

      if (epoch % config.epochs_per_round == 0) {
        RoundRecord r;
        r.round = epoch / config.epochs_per_round;
        r.triples = round_triples;
        r.triple_updates = round_updates;
        r.loss_mean = round_loss / config.epochs_per_round;
        r.train_match1 = train_match_at_1(res.params, set);
        r.version = res.params.version;
        r.wall_seconds = seconds_since(round_start);
        h.rounds.push_back(r);
        h.total_triple_updates += round_updates;
        round_start = Clock::now();
        round_loss = 0.0;
        round_updates = 0;
        round_triples = 0;
        if (r.train_match1 >= config.target_train_match1) {
          h.reached_target = true;
          break;
        }
      }
    }
  } catch (const Error& e) {
    shutdown();
    rethrow_sampler();
    if (e.code() == Errc::role_failure) throw;
    throw Error(Errc::role_failure, std::string("trainer role failed: ") + e.what());
  } catch (const std::exception& e) {
    shutdown();
    rethrow_sampler();
    throw Error(Errc::role_failure, std::string("trainer role failed: ") + e.what());
  }
  shutdown();
  rethrow_sampler();
  h.total_seconds = seconds_since(t_start);
  return res;
}

TrainResult train(Strategy strategy, const Dataset& dataset, const EncoderConfig& encoder,
                  const TrainConfig& config) {
  switch (strategy) {
    case Strategy::iterative:
      return iterative_train(dataset, encoder, config);
    case Strategy::async:
      return async_train(dataset, encoder, config);
    case Strategy::all_negatives: {
      std::vector<std::string> ids;
      for (const auto& p : dataset.passages) ids.push_back(p.id);
      return train_one_pass(dataset, encoder, config,
                            all_negatives_triples(dataset.train_queries, ids), "allneg");
    }
    case Strategy::bm25_guided: {
      auto bm25 = Bm25Index::build(dataset.passages, TokenizerConfig::sparse_default());
      Rng rng(config.seed ^ kBm25Salt);
      return train_one_pass(
          dataset, encoder, config,
          bm25_guided_triples(bm25, dataset.train_queries, config.m, config.r_rand, rng),
          "bm25guided");
    }
  }
  throw Error(Errc::invalid_argument, "unknown strategy");
}

}  // namespace liri
