#include "liri/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "liri/error.hpp"
#include "liri/kernels.hpp"
#include "liri/random.hpp"

namespace liri {

void EnsembleWeights::validate() const {
  if (!(w_a >= 0.0) || !(w_b >= 0.0) || !std::isfinite(w_a) || !std::isfinite(w_b)) {
    throw Error(Errc::invalid_argument, "ensemble weights must be finite and >= 0");
  }
  if (w_a == 0.0 && w_b == 0.0) {
    throw Error(Errc::invalid_argument, "ensemble weights must not both be zero");
  }
}

EnsembleWeights EnsembleWeights::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos || text.find(':', colon + 1) != std::string_view::npos) {
    throw Error(Errc::invalid_argument, "weights must look like A:B, got '" + std::string(text) + "'");
  }
  auto number = [&](std::string_view s) {
    std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (str.empty() || used != str.size()) {
      throw Error(Errc::invalid_argument, "bad weight '" + str + "'");
    }
    return v;
  };
  EnsembleWeights w{number(text.substr(0, colon)), number(text.substr(colon + 1))};
  w.validate();
  return w;
}

RankedResult ensemble_scores(const ScoreMap& a, const ScoreMap& b, const EnsembleWeights& w) {
  w.validate();
  std::vector<std::string> only_a;
  std::vector<std::string> only_b;
  for (const auto& [id, _] : a) {
    if (!b.contains(id)) only_a.push_back(id);
  }
  for (const auto& [id, _] : b) {
    if (!a.contains(id)) only_b.push_back(id);
  }
  if (!only_a.empty() || !only_b.empty()) {
    std::string msg = "ensemble: passage id sets differ; only in a: {";
    for (std::size_t i = 0; i < only_a.size(); ++i) msg += (i ? ", " : "") + only_a[i];
    msg += "}; only in b: {";
    for (std::size_t i = 0; i < only_b.size(); ++i) msg += (i ? ", " : "") + only_b[i];
    msg += "}";
    throw Error(Errc::invalid_argument, msg);
  }
  std::vector<ScoredPassage> scored;
  scored.reserve(a.size());
  for (const auto& [id, sa] : a) scored.push_back({id, w.w_a * sa + w.w_b * b.at(id)});
  return make_ranking(std::move(scored), scored.size());
}

// ---------------------------------------------------------------- systems

RankedResult Bm25System::search(std::string_view query, std::size_t k) const {
  return index_.search(query, k);
}

ScoreMap Bm25System::score_all(std::string_view query) const { return index_.score_all(query); }

std::size_t Bm25System::index_bytes() const { return index_.serialize().size(); }

DenseSystem::DenseSystem(EncoderParams params, TokenVectorIndex index, DenseSearchOptions options)
    : params_(std::move(params)), index_(std::move(index)), options_(options) {}

std::string DenseSystem::name() const {
  return options_.mode == DenseMode::single_vector ? "dense-single" : "dense-late";
}

RankedResult DenseSystem::search(std::string_view query, std::size_t k) const {
  auto options = options_;
  options.k = k;
  return dense_search(index_, params_, query, options);
}

ScoreMap DenseSystem::score_all(std::string_view query) const {
  return dense_score_all(index_, params_, query, options_.mode);
}

std::size_t DenseSystem::index_bytes() const {
  return index_.serialize().size() + serialize_checkpoint(params_).size();
}

EnsembleSystem::EnsembleSystem(std::unique_ptr<RetrievalSystem> a,
                               std::unique_ptr<RetrievalSystem> b, EnsembleWeights weights)
    : a_(std::move(a)), b_(std::move(b)), weights_(weights) {
  if (!a_ || !b_) throw Error(Errc::invalid_argument, "ensemble: null system");
  weights_.validate();
}

std::string EnsembleSystem::name() const { return a_->name() + "+" + b_->name(); }

RankedResult EnsembleSystem::search(std::string_view query, std::size_t k) const {
  if (k == 0) throw Error(Errc::invalid_argument, "k must be >= 1");
  auto r = ensemble_scores(a_->score_all(query), b_->score_all(query), weights_);
  if (r.items.size() > k) r.items.resize(k);
  return r;
}

ScoreMap EnsembleSystem::score_all(std::string_view query) const {
  auto a = a_->score_all(query);
  auto b = b_->score_all(query);
  ScoreMap out;
  for (const auto& item : ensemble_scores(a, b, weights_).items) out[item.id] = item.score;
  return out;
}

std::size_t EnsembleSystem::index_bytes() const { return a_->index_bytes() + b_->index_bytes(); }

std::map<std::string, RankedResult> rank_queries(const RetrievalSystem& system,
                                                 std::span<const Query> queries, std::size_t k) {
  std::map<std::string, RankedResult> out;
  for (const auto& q : queries) out[q.id] = system.search(q.text, k);
  return out;
}

// ---------------------------------------------------------------- protocol

Dataset sample_training_view(const Dataset& dataset, std::uint32_t k_ex_per_doc,
                             std::uint64_t seed) {
  Dataset view;
  view.name = dataset.name;
  view.passages = dataset.passages;
  if (k_ex_per_doc == 0) return view;

  std::map<std::string, std::vector<std::size_t>> by_gold;
  for (std::size_t i = 0; i < dataset.train_queries.size(); ++i) {
    by_gold[dataset.train_queries[i].gold].push_back(i);
  }
  Rng rng(seed);
  for (const auto& p : dataset.passages) {
    auto it = by_gold.find(p.id);
    const std::size_t have = it == by_gold.end() ? 0 : it->second.size();
    if (have < k_ex_per_doc) {
      throw Error(Errc::insufficient_queries,
                  "passage '" + p.id + "' has " + std::to_string(have) +
                      " training queries, need " + std::to_string(k_ex_per_doc));
    }
    for (auto pick : sample_indices(rng, have, k_ex_per_doc)) {
      view.train_queries.push_back(dataset.train_queries[it->second[pick]]);
    }
  }
  return view;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

void aggregate(EvalReport& report) {
  std::vector<double> m1;
  std::vector<double> m3;
  for (const auto& s : report.per_seed) {
    m1.push_back(s.match1);
    m3.push_back(s.match3);
  }
  auto a = mean_std(m1);
  auto b = mean_std(m3);
  report.match1 = a.mean;
  report.match1_std = a.std;
  report.match3 = b.mean;
  report.match3_std = b.std;
}

std::vector<std::uint64_t> default_seeds(std::size_t n) {
  std::vector<std::uint64_t> seeds(n);
  std::iota(seeds.begin(), seeds.end(), 0u);
  return seeds;
}

EvalReport run_protocol(const Dataset& dataset, std::uint32_t k_ex_per_doc,
                        std::span<const std::uint64_t> seeds, const SystemFactory& factory) {
  if (seeds.empty()) throw Error(Errc::invalid_argument, "run_protocol: need at least one seed");
  if (dataset.test_queries.empty()) {
    throw Error(Errc::invalid_argument, "run_protocol: dataset has no test queries");
  }
  EvalReport report;
  report.dataset = dataset.name;
  report.k_ex_per_doc = k_ex_per_doc;
  const auto qrels = qrels_of(dataset.test_queries);
  for (auto seed : seeds) {
    auto view = sample_training_view(dataset, k_ex_per_doc, seed);
    auto system = factory(view, seed);
    if (!system) throw Error(Errc::invalid_argument, "run_protocol: factory returned no system");
    auto rankings = rank_queries(*system, dataset.test_queries, 3);
    report.system = system->name();
    report.index_bytes = system->index_bytes();
    report.per_seed.push_back({seed, match_at_k(rankings, qrels, 1), match_at_k(rankings, qrels, 3)});
  }
  aggregate(report);
  return report;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(Errc::invalid_argument, "percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

LatencyStats benchmark_latency(const RetrievalSystem& system, std::span<const std::string> queries,
                               std::size_t warmup, std::size_t reps, std::size_t k) {
  if (reps == 0) throw Error(Errc::invalid_argument, "benchmark: reps must be >= 1");
  if (queries.empty()) throw Error(Errc::invalid_argument, "benchmark: no queries");
  kernels::ScopedThreads single(1);
  using clock = std::chrono::steady_clock;
  std::size_t sink = 0;
  for (std::size_t w = 0; w < warmup; ++w) {
    for (const auto& q : queries) sink += system.search(q, k).size();
  }
  std::vector<double> ms;
  ms.reserve(reps * queries.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (const auto& q : queries) {
      auto t0 = clock::now();
      auto res = system.search(q, k);
      auto t1 = clock::now();
      sink += res.size();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }
  static_cast<void>(sink);
  LatencyStats stats;
  stats.samples = ms.size();
  stats.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  stats.p50_ms = percentile(ms, 50.0);
  stats.p95_ms = percentile(ms, 95.0);
  stats.index_bytes = system.index_bytes();
  return stats;
}

// ---------------------------------------------------------------- reports

std::string format_report(const EvalReport& report) {
  std::string out;
  for (const auto& s : report.per_seed) {
    nlohmann::json j = {{"record", "seed"},
                        {"system", report.system},
                        {"dataset", report.dataset},
                        {"k_ex_per_doc", report.k_ex_per_doc},
                        {"seed", s.seed},
                        {"match1", s.match1},
                        {"match3", s.match3}};
    out += j.dump() + "\n";
  }
  nlohmann::json agg = {{"record", "aggregate"},
                        {"system", report.system},
                        {"dataset", report.dataset},
                        {"k_ex_per_doc", report.k_ex_per_doc},
                        {"seeds", report.per_seed.size()},
                        {"match1_mean", report.match1},
                        {"match1_std", report.match1_std},
                        {"match3_mean", report.match3},
                        {"match3_std", report.match3_std},
                        {"index_bytes", report.index_bytes}};
  if (report.latency.samples > 0) {
    agg["latency_ms"] = {{"mean", report.latency.mean_ms},
                         {"p50", report.latency.p50_ms},
                         {"p95", report.latency.p95_ms},
                         {"samples", report.latency.samples}};
  }
  out += agg.dump() + "\n";
  return out;
}

std::string summary_header() { return "system\t0-shot\t1 ex/doc\t3 ex/doc"; }

std::string summary_row(std::string_view system, std::span<const EvalReport> reports) {
  auto cell = [&](std::uint32_t k) -> std::string {
    for (const auto& r : reports) {
      if (r.k_ex_per_doc != k) continue;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.1f(%.1f)", 100.0 * r.match1, 100.0 * r.match1_std);
      return buf;
    }
    return "-";
  };
  return std::string(system) + "\t" + cell(0) + "\t" + cell(1) + "\t" + cell(3);
}

// ---------------------------------------------------------------- factories

SystemFactory dense_factory(Strategy strategy, const EncoderConfig& encoder,
                            const TrainConfig& train_config, const DenseSearchOptions& search,
                            std::optional<std::uint32_t> ivf_clusters) {
  return [=](const Dataset& view, std::uint64_t seed) -> std::unique_ptr<RetrievalSystem> {
    TrainConfig cfg = train_config;
    cfg.seed = seed;
    EncoderParams params = view.train_queries.empty()
                               ? init_params(encoder, seed)
                               : train(strategy, view, encoder, cfg).params;
    IndexBuildOptions build;
    build.ivf_clusters = ivf_clusters;
    build.seed = seed;
    auto index = build_token_index(params, std::span<const Passage>(view.passages),
                                   TokenizerConfig::dense_default(), build);
    return std::make_unique<DenseSystem>(std::move(params), std::move(index), search);
  };
}

SystemFactory bm25_factory(const Bm25Params& params) {
  return [=](const Dataset& view, std::uint64_t) -> std::unique_ptr<RetrievalSystem> {
    return std::make_unique<Bm25System>(
        Bm25Index::build(view.passages, TokenizerConfig::sparse_default(), params));
  };
}

}  // namespace liri
