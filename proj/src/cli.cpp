#include "liri/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "liri/dataset.hpp"
#include "liri/error.hpp"
#include "liri/evalbench.hpp"
#include "liri/io.hpp"

namespace liri {

namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;

struct EncoderFlags {
  std::string similarity = "neg_l2";
  std::uint32_t dim = 32;
  std::uint32_t buckets = 1u << 15;
  std::uint32_t query_maxlen = 32;
  std::uint32_t doc_maxlen = 128;

  void attach(CLI::App& app) {
    app.add_option("--similarity", similarity, "Token similarity")
        ->check(CLI::IsMember({"neg_l2", "dot"}))
        ->capture_default_str();
    app.add_option("--dim", dim, "Embedding dimension")->capture_default_str();
    app.add_option("--buckets", buckets, "Hash buckets")->capture_default_str();
    app.add_option("--query-maxlen", query_maxlen, "Query token limit")->capture_default_str();
    app.add_option("--doc-maxlen", doc_maxlen, "Passage token limit")->capture_default_str();
  }

  [[nodiscard]] EncoderConfig config() const {
    EncoderConfig c;
    c.similarity = parse_similarity(similarity);
    c.dim = dim;
    c.buckets = buckets;
    c.query_maxlen = query_maxlen;
    c.doc_maxlen = doc_maxlen;
    c.validate();
    return c;
  }
};

struct TrainFlags {
  TrainConfig c;
  std::int64_t ivf_clusters = 0;  // -1: exact sampler index
  std::uint32_t delay_ms = 0;

  void attach(CLI::App& app) {
    app.add_option("--m", c.m, "Sampler ranking depth")->capture_default_str();
    app.add_option("--r-rand", c.r_rand, "Random negatives when gold ranks first")
        ->capture_default_str();
    app.add_option("--rounds", c.max_rounds, "Maximum rounds")->capture_default_str();
    app.add_option("--epochs", c.epochs_per_round, "Epochs per round")->capture_default_str();
    app.add_option("--one-pass-epochs", c.one_pass_epochs, "Epochs for allneg and bm25guided")
        ->capture_default_str();
    app.add_option("--lr", c.learning_rate, "Learning rate")->capture_default_str();
    app.add_option("--minibatch", c.minibatch_size, "Triples per gradient step")
        ->capture_default_str();
    app.add_option("--target", c.target_train_match1, "Stop at this train Match@1")
        ->capture_default_str();
    app.add_option("--k-tok", c.k_tok, "Sampler entries per query token")->capture_default_str();
    app.add_option("--nprobe", c.nprobe, "Sampler IVF lists probed")->capture_default_str();
    app.add_option("--ivf-clusters", ivf_clusters, "Sampler IVF lists (0 auto, -1 exact)")
        ->capture_default_str();
    app.add_option("--sampler-nice", c.sampler_nice, "Async sampler nice value")
        ->capture_default_str();
    app.add_option("--sampler-delay-ms", delay_ms, "Async sampler extra latency")
        ->capture_default_str();
  }

  [[nodiscard]] TrainConfig config(std::uint64_t seed) const {
    TrainConfig out = c;
    out.seed = seed;
    if (ivf_clusters < 0) {
      out.ivf_clusters.reset();
    } else {
      out.ivf_clusters = static_cast<std::uint32_t>(ivf_clusters);
    }
    out.sampler_delay = std::chrono::milliseconds(delay_ms);
    out.validate();
    return out;
  }
};

struct SearchFlags {
  std::size_t k = 10;
  std::size_t k_tok = 8;
  std::size_t nprobe = 4;
  bool exact = false;
  bool single_vector = false;

  void attach(CLI::App& app) {
    app.add_option("-k,--k", k, "Results to return")->capture_default_str();
    app.add_option("--k-tok", k_tok, "Entries per query token")->capture_default_str();
    app.add_option("--nprobe", nprobe, "IVF lists probed")->capture_default_str();
    app.add_flag("--exact", exact, "Rerank every passage");
    app.add_flag("--single-vector", single_vector, "Mean-pooled dot product scoring");
  }

  [[nodiscard]] DenseSearchOptions options() const {
    DenseSearchOptions o;
    o.k = k;
    o.k_tok = k_tok;
    o.nprobe = nprobe;
    o.exhaustive = exact;
    o.mode = single_vector ? DenseMode::single_vector : DenseMode::late_interaction;
    return o;
  }
};

void print_ranking(std::ostream& out, const RankedResult& r) {
  out << "rank\tid\tscore\n";
  for (std::size_t i = 0; i < r.items.size(); ++i) {
    out << (i + 1) << '\t' << r.items[i].id << '\t' << r.items[i].score << '\n';
  }
}

std::string dump_scores(std::string_view query, const ScoreMap& scores) {
  nlohmann::json j;
  j["query"] = query;
  j["scores"] = nlohmann::json::object();
  for (const auto& [id, s] : scores) j["scores"][id] = s;
  return j.dump(2) + "\n";
}

ScoreMap load_scores(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, path.string() + ": " + e.what());
  }
  const auto& s = j.contains("scores") ? j["scores"] : j;
  if (!s.is_object()) throw Error(Errc::malformed, path.string() + ": expected a score object");
  ScoreMap out;
  for (const auto& [id, v] : s.items()) {
    if (!v.is_number()) throw Error(Errc::malformed, path.string() + ": score for '" + id + "' is not a number");
    out[id] = v.get<double>();
  }
  return out;
}

EncoderParams load_or_init_checkpoint(const fs::path& path, const EncoderFlags& enc,
                                      std::uint64_t seed, std::ostream& out) {
  if (fs::exists(path)) return load_checkpoint(path);
  auto params = init_params(enc.config(), seed);
  save_checkpoint(params, path);
  out << "initialized checkpoint " << path.string() << " (version 0)\n";
  return params;
}

std::vector<std::string> test_query_texts(const Dataset& ds, std::size_t limit) {
  std::vector<std::string> out;
  for (const auto& q : ds.test_queries) {
    if (out.size() == limit) break;
    out.push_back(q.text);
  }
  if (out.empty()) {
    for (const auto& q : ds.train_queries) {
      if (out.size() == limit) break;
      out.push_back(q.text);
    }
  }
  if (out.empty()) throw Error(Errc::invalid_argument, "dataset has no queries to benchmark");
  return out;
}

nlohmann::json latency_json(std::string_view system, const LatencyStats& s) {
  return {{"system", system}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms},
          {"p95_ms", s.p95_ms}, {"samples", s.samples}, {"index_bytes", s.index_bytes}};
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Late-interaction and BM25 retrieval for small FAQ corpora", "liri"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic FAQ dataset");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Dataset directory")->required();
  synth->add_option("--name", sc.name)->capture_default_str();
  synth->add_option("--n-passages", sc.n_passages)->capture_default_str();
  synth->add_option("--keywords-per-passage", sc.keywords_per_passage)->capture_default_str();
  synth->add_option("--keywords-per-query", sc.keywords_per_query)->capture_default_str();
  synth->add_option("--filler-per-passage", sc.filler_per_passage)->capture_default_str();
  synth->add_option("--shared-vocab", sc.shared_vocab_size)->capture_default_str();
  synth->add_option("--queries-per-passage", sc.queries_per_passage)->capture_default_str();
  synth->add_option("--test-queries-per-passage", sc.test_queries_per_passage)
      ->capture_default_str();
  synth->add_option("--noise", sc.paraphrase_noise, "Noisy query slot probability")
      ->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();

  // index
  auto* index = app.add_subcommand("index", "Build and save BM25 and token indexes");
  std::string data_dir;
  std::string index_dir;
  std::string checkpoint_path;
  EncoderFlags enc;
  std::int64_t index_ivf = -1;
  std::string kind = "both";
  index->add_option("--data", data_dir, "Dataset directory")->required();
  index->add_option("--out", index_dir, "Index directory")->required();
  index->add_option("--checkpoint", checkpoint_path,
                    "Checkpoint to encode with; created from --seed if missing");
  index->add_option("--kind", kind)->check(CLI::IsMember({"sparse", "dense", "both"}))
      ->capture_default_str();
  index->add_option("--ivf-clusters", index_ivf, "IVF lists (0 auto, -1 exact)")
      ->capture_default_str();
  index->add_option("--seed", seed)->capture_default_str();
  enc.attach(*index);

  // search
  auto* search = app.add_subcommand("search", "Query a saved index");
  std::string query;
  std::string dump_path;
  std::string search_kind = "sparse";
  SearchFlags sf;
  search->add_option("--index", index_dir, "Index directory")->required();
  search->add_option("--query", query, "Query text")->required();
  search->add_option("--kind", search_kind, "sparse or dense")
      ->check(CLI::IsMember({"sparse", "dense"}))
      ->capture_default_str();
  search->add_option("--checkpoint", checkpoint_path, "Checkpoint for dense search");
  search->add_option("--dump", dump_path, "Write every passage score as JSON");
  sf.attach(*search);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the token encoder");
  std::string strategy = "iterative";
  std::string history_path;
  TrainFlags tf;
  train_cmd->add_option("--data", data_dir, "Dataset directory")->required();
  train_cmd->add_option("--strategy", strategy)
      ->check(CLI::IsMember({"allneg", "bm25guided", "iterative", "async"}))
      ->capture_default_str();
  train_cmd->add_option("--checkpoint", checkpoint_path, "Output checkpoint")->required();
  train_cmd->add_option("--history", history_path, "Output history (JSON lines)");
  train_cmd->add_option("--seed", seed)->capture_default_str();
  enc.attach(*train_cmd);
  tf.attach(*train_cmd);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Run the seeded k-examples-per-doc protocol");
  std::string system = "dense";
  std::vector<std::uint32_t> k_ex{0, 1, 3};
  std::size_t n_seeds = 10;
  std::string report_path;
  std::string summary_path;
  std::string weights_text = "0.3:1";
  std::int64_t eval_ivf = -1;
  SearchFlags ef;
  evaluate->add_option("--data", data_dir, "Dataset directory")->required();
  evaluate->add_option("--system", system)
      ->check(CLI::IsMember({"bm25", "dense", "ensemble"}))
      ->capture_default_str();
  evaluate->add_option("--strategy", strategy)
      ->check(CLI::IsMember({"allneg", "bm25guided", "iterative", "async"}))
      ->capture_default_str();
  evaluate->add_option("--k-ex", k_ex, "Training examples per passage")->delimiter(',')
      ->capture_default_str();
  evaluate->add_option("--seeds", n_seeds, "Number of seeds (0..n-1)")->capture_default_str();
  evaluate->add_option("--out", report_path, "Report (JSON lines)")->required();
  evaluate->add_option("--summary", summary_path, "Summary row (TSV)");
  evaluate->add_option("--weights", weights_text, "Ensemble weights BM25:dense")
      ->capture_default_str();
  evaluate->add_option("--index-ivf-clusters", eval_ivf, "Evaluated index IVF lists (0 auto, -1 exact)")
      ->capture_default_str();
  enc.attach(*evaluate);
  tf.attach(*evaluate);
  evaluate->add_option("-k,--k", ef.k)->capture_default_str();
  evaluate->add_flag("--exact", ef.exact, "Rerank every passage");
  evaluate->add_flag("--single-vector", ef.single_vector, "Mean-pooled dot product scoring");

  // ensemble
  auto* ensemble = app.add_subcommand("ensemble", "Combine two score dumps");
  std::string a_path;
  std::string b_path;
  std::size_t ens_k = 10;
  ensemble->add_option("a", a_path, "First score dump")->required();
  ensemble->add_option("b", b_path, "Second score dump")->required();
  ensemble->add_option("--weights", weights_text, "A:B")->capture_default_str();
  ensemble->add_option("-k,--k", ens_k)->capture_default_str();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Measure per-query latency");
  std::size_t warmup = 1;
  std::size_t reps = 5;
  std::size_t max_queries = 100;
  SearchFlags bf;
  bench->add_option("--data", data_dir, "Dataset directory")->required();
  bench->add_option("--checkpoint", checkpoint_path, "Checkpoint (fresh from --seed if omitted)");
  bench->add_option("--out", report_path, "Report (JSON lines)");
  bench->add_option("--warmup", warmup)->capture_default_str();
  bench->add_option("--reps", reps)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--queries", max_queries, "Queries to time")->capture_default_str();
  bench->add_option("--ivf-clusters", index_ivf, "IVF lists (0 auto, -1 exact)")
      ->capture_default_str();
  bench->add_option("--seed", seed)->capture_default_str();
  enc.attach(*bench);
  bf.attach(*bench);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  auto optional_ivf = [](std::int64_t v) -> std::optional<std::uint32_t> {
    if (v < 0) return std::nullopt;
    return static_cast<std::uint32_t>(v);
  };

  try {
    if (synth->parsed()) {
      sc.seed = seed;
      auto ds = generate_synthetic(sc);
      save_dataset(ds, synth_out);
      out << "wrote " << ds.passages.size() << " passages, " << ds.train_queries.size()
          << " train and " << ds.test_queries.size() << " test queries to " << synth_out << "\n";
    } else if (index->parsed()) {
      auto ds = load_dataset(data_dir);
      fs::create_directories(index_dir);
      if (kind != "dense") {
        auto bm25 = Bm25Index::build(ds.passages, TokenizerConfig::sparse_default());
        bm25.save(fs::path(index_dir) / "bm25.idx");
        out << "bm25: " << bm25.n_docs() << " passages\n";
      }
      if (kind != "sparse") {
        if (checkpoint_path.empty()) checkpoint_path = (fs::path(index_dir) / "checkpoint.ckpt").string();
        auto params = load_or_init_checkpoint(checkpoint_path, enc, seed, out);
        IndexBuildOptions opts;
        opts.ivf_clusters = optional_ivf(index_ivf);
        opts.seed = seed;
        auto tvi = build_token_index(params, std::span<const Passage>(ds.passages),
                                     TokenizerConfig::dense_default(), opts);
        tvi.save(fs::path(index_dir) / "dense.idx");
        out << "dense: " << tvi.n_passages() << " passages, " << tvi.n_entries()
            << " token vectors, checkpoint version " << tvi.built_from_version << "\n";
      }
    } else if (search->parsed()) {
      if (search_kind == "sparse") {
        auto bm25 = Bm25Index::load(fs::path(index_dir) / "bm25.idx");
        print_ranking(out, bm25.search(query, sf.k));
        if (!dump_path.empty()) io::write_file_atomic(dump_path, dump_scores(query, bm25.score_all(query)));
      } else {
        if (checkpoint_path.empty()) checkpoint_path = (fs::path(index_dir) / "checkpoint.ckpt").string();
        auto params = load_checkpoint(checkpoint_path);
        auto tvi = TokenVectorIndex::load(fs::path(index_dir) / "dense.idx");
        auto opts = sf.options();
        print_ranking(out, dense_search(tvi, params, query, opts));
        if (!dump_path.empty()) {
          io::write_file_atomic(dump_path, dump_scores(query, dense_score_all(tvi, params, query, opts.mode)));
        }
      }
    } else if (train_cmd->parsed()) {
      auto ds = load_dataset(data_dir);
      auto result = train(parse_strategy(strategy), ds, enc.config(), tf.config(seed));
      save_checkpoint(result.params, checkpoint_path);
      if (!history_path.empty()) save_history(result.history, history_path);
      out << strategy << ": " << result.history.rounds.size() << " round(s), "
          << result.history.epochs.size() << " epoch(s), train Match@1 "
          << result.history.final_train_match1() << ", version " << result.params.version
          << ", " << result.history.total_seconds << " s\n";
    } else if (evaluate->parsed()) {
      auto ds = load_dataset(data_dir);
      auto seeds = default_seeds(n_seeds);
      DenseSearchOptions dopts = ef.options();
      auto dense = dense_factory(parse_strategy(strategy), enc.config(), tf.config(0), dopts,
                                 optional_ivf(eval_ivf));
      auto sparse = bm25_factory();
      SystemFactory factory;
      if (system == "bm25") {
        factory = sparse;
      } else if (system == "dense") {
        factory = dense;
      } else {
        auto w = EnsembleWeights::parse(weights_text);
        // BM25 stays 0-shot: it does not learn from examples.
        factory = [=](const Dataset& view, std::uint64_t s) -> std::unique_ptr<RetrievalSystem> {
          Dataset zero = view;
          zero.train_queries.clear();
          return std::make_unique<EnsembleSystem>(sparse(zero, s), dense(view, s), w);
        };
      }
      std::string report;
      std::vector<EvalReport> reports;
      for (auto k : k_ex) {
        auto r = run_protocol(ds, k, seeds, factory);
        report += format_report(r);
        out << r.system << " k=" << k << ": Match@1 " << r.match1 << " (" << r.match1_std
            << "), Match@3 " << r.match3 << " (" << r.match3_std << ")\n";
        reports.push_back(std::move(r));
      }
      io::write_file_atomic(report_path, report);
      auto row = summary_row(reports.front().system, reports);
      if (!summary_path.empty()) io::write_file_atomic(summary_path, summary_header() + "\n" + row + "\n");
      out << summary_header() << "\n" << row << "\n";
    } else if (ensemble->parsed()) {
      auto w = EnsembleWeights::parse(weights_text);
      auto r = ensemble_scores(load_scores(a_path), load_scores(b_path), w);
      if (ens_k == 0) throw Error(Errc::invalid_argument, "k must be >= 1");
      if (r.items.size() > ens_k) r.items.resize(ens_k);
      print_ranking(out, r);
    } else if (bench->parsed()) {
      auto ds = load_dataset(data_dir);
      auto queries = test_query_texts(ds, max_queries);
      EncoderParams params = checkpoint_path.empty() ? init_params(enc.config(), seed)
                                                     : load_checkpoint(checkpoint_path);
      IndexBuildOptions opts;
      opts.ivf_clusters = optional_ivf(index_ivf);
      opts.seed = seed;
      auto tvi = build_token_index(params, std::span<const Passage>(ds.passages),
                                   TokenizerConfig::dense_default(), opts);
      Bm25System bm25(Bm25Index::build(ds.passages, TokenizerConfig::sparse_default()));
      DenseSystem dense(params, std::move(tvi), bf.options());
      std::string report;
      for (const RetrievalSystem* s : {static_cast<const RetrievalSystem*>(&bm25),
                                       static_cast<const RetrievalSystem*>(&dense)}) {
        auto stats = benchmark_latency(*s, queries, warmup, reps, bf.k);
        auto j = latency_json(s->name(), stats);
        report += j.dump() + "\n";
        out << s->name() << ": mean " << stats.mean_ms << " ms, p50 " << stats.p50_ms
            << " ms, p95 " << stats.p95_ms << " ms, " << stats.index_bytes << " bytes\n";
      }
      if (!report_path.empty()) io::write_file_atomic(report_path, report);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::invalid_argument ? kUsage : kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace liri
