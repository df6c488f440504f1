#include <random>

#include "doctest.h"
#include "liri/dataset.hpp"
#include "liri/error.hpp"
#include "liri/evalbench.hpp"
#include "oracles.hpp"

using namespace liri;

namespace {

RankedResult ranking_of(const std::vector<std::string>& ids) {
  RankedResult r;
  double s = static_cast<double>(ids.size());
  for (const auto& id : ids) r.items.push_back({id, s--});
  return r;
}

Dataset small_dataset() {
  SynthConfig s;
  s.n_passages = 10;
  s.seed = 2;
  return generate_synthetic(s);
}

}  // namespace

TEST_CASE("match_at_k") {
  std::map<std::string, RankedResult> first = {{"q1", ranking_of({"a", "b", "c"})},
                                               {"q2", ranking_of({"b", "a", "c"})}};
  Qrels qr = {{"q1", "a"}, {"q2", "b"}};
  CHECK(match_at_k(first, qr, 1) == 1.0);

  std::map<std::string, RankedResult> second = {{"q1", ranking_of({"b", "a", "c"})},
                                                {"q2", ranking_of({"a", "b", "c"})}};
  CHECK(match_at_k(second, qr, 1) == 0.0);
  CHECK(match_at_k(second, qr, 3) == 1.0);

  std::map<std::string, RankedResult> mixed = {{"q1", ranking_of({"a", "x", "y", "z", "w"})},
                                               {"q2", ranking_of({"x", "b", "y", "z", "w"})},
                                               {"q3", ranking_of({"x", "y", "z", "w", "c"})}};
  Qrels q3 = {{"q1", "a"}, {"q2", "b"}, {"q3", "c"}};
  CHECK(match_at_k(mixed, q3, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(match_at_k(mixed, q3, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(match_at_k(mixed, q3, 5) == 1.0);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 6; ++k) {
    const double m = match_at_k(mixed, q3, k);
    CHECK(m >= prev);
    prev = m;
  }
  try {
    static_cast<void>(match_at_k(first, {{"q9", "a"}}, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_id);
    CHECK(std::string(e.what()).find("q9") != std::string::npos);
  }
}

TEST_CASE("ensemble weights") {
  CHECK(EnsembleWeights::parse("0.3:1") == EnsembleWeights{0.3, 1.0});
  CHECK(EnsembleWeights::parse("10:1") == EnsembleWeights{10.0, 1.0});
  for (const char* bad : {"", "1", "a:b", "-1:1", "0:0", "1:2:3", "1:"}) {
    CHECK_THROWS_AS(EnsembleWeights::parse(bad), Error);
  }
}

TEST_CASE("ensemble_scores") {
  ScoreMap a = {{"p1", 1.0}, {"p2", 0.0}};
  ScoreMap b = {{"p1", 0.0}, {"p2", 2.0}};
  auto r = ensemble_scores(a, b, {1.0, 1.0});
  REQUIRE(r.size() == 2);
  CHECK(r.items[0].id == "p2");
  CHECK(r.items[0].score == 2.0);
  CHECK(r.items[1].score == 1.0);

  // w_b = 0 reproduces system A's full order.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreMap x;
    ScoreMap y;
    for (int i = 0; i < 20; ++i) {
      x["d" + std::to_string(i)] = std::round(u(rng));
      y["d" + std::to_string(i)] = u(rng);
    }
    CHECK(ensemble_scores(x, y, {0.7, 0.0}).items.size() == 20);
    auto only_a = ensemble_scores(x, y, {0.7, 0.0});
    auto ranked_a = make_ranking(x, 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(only_a.items[i].id == ranked_a.items[i].id);
    // Positive scaling leaves the ranking unchanged.
    auto base = ensemble_scores(x, y, {0.3, 1.0});
    auto scaled = ensemble_scores(x, y, {0.3 * 4.0, 1.0 * 4.0});
    for (std::size_t i = 0; i < 20; ++i) CHECK(base.items[i].id == scaled.items[i].id);
  }

  ScoreMap c = {{"p1", 0.0}, {"p3", 0.0}};
  try {
    static_cast<void>(ensemble_scores(a, c, {}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_argument);
    const std::string msg = e.what();
    CHECK(msg.find("p2") != std::string::npos);
    CHECK(msg.find("p3") != std::string::npos);
  }
}

TEST_CASE("mean_std and aggregate") {
  std::vector<double> one = {0.4};
  CHECK(mean_std(one).mean == 0.4);
  CHECK(mean_std(one).std == 0.0);
  std::vector<double> v = {0.5, 0.7, 0.9, 0.6};
  auto [m, s] = oracle::mean_sample_std(v);
  CHECK(mean_std(v).mean == doctest::Approx(m).epsilon(1e-12));
  CHECK(mean_std(v).std == doctest::Approx(s).epsilon(1e-12));

  EvalReport r;
  r.per_seed = {{0, 0.5, 0.8}, {1, 0.7, 0.9}, {2, 0.6, 1.0}};
  aggregate(r);
  CHECK(std::abs(r.match1 - 0.6) < 1e-12);
  CHECK(std::abs(r.match3 - 0.9) < 1e-12);
  CHECK(std::abs(r.match1_std - 0.1) < 1e-12);
}

TEST_CASE("percentile") {
  CHECK(percentile({3.0}, 50) == 3.0);
  CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(percentile({4, 1, 3, 2, 5}, 50) == 3.0);
  CHECK(percentile({1, 2, 3, 4, 5}, 95) == doctest::Approx(4.8));
  CHECK(percentile({1, 2, 3}, 0) == 1.0);
  CHECK(percentile({1, 2, 3}, 100) == 3.0);
  CHECK_THROWS_AS(percentile({}, 50), Error);
}

TEST_CASE("sample_training_view") {
  auto d = small_dataset();
  auto view = sample_training_view(d, 2, 5);
  CHECK(view.train_queries.size() == 2 * d.passages.size());
  CHECK(view.passages == d.passages);
  CHECK(view.test_queries.empty());
  std::map<std::string, int> per_gold;
  for (const auto& q : view.train_queries) {
    ++per_gold[q.gold];
    CHECK(std::find(d.train_queries.begin(), d.train_queries.end(), q) != d.train_queries.end());
  }
  for (const auto& [gold, n] : per_gold) CHECK(n == 2);
  CHECK(sample_training_view(d, 2, 5) == view);
  CHECK(sample_training_view(d, 0, 5).train_queries.empty());
  try {
    static_cast<void>(sample_training_view(d, 4, 5));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_queries);
    CHECK(std::string(e.what()).find("p0") != std::string::npos);
  }
}

TEST_CASE("run_protocol") {
  auto d = small_dataset();
  SUBCASE("zero-shot BM25 does not depend on the seed") {
    auto seeds = default_seeds(3);
    auto r = run_protocol(d, 0, seeds, bm25_factory());
    REQUIRE(r.per_seed.size() == 3);
    CHECK(r.per_seed[0].match1 == r.per_seed[1].match1);
    CHECK(r.per_seed[1].match1 == r.per_seed[2].match1);
    CHECK(r.match1_std == 0.0);
    CHECK(r.system == "bm25");
    for (const auto& s : r.per_seed) CHECK(s.match3 >= s.match1);
    CHECK(r.index_bytes > 0);
  }
  SUBCASE("one seed gives zero spread") {
    std::vector<std::uint64_t> seeds = {7};
    EncoderConfig enc;
    enc.dim = 8;
    enc.buckets = 2048;
    TrainConfig t;
    t.max_rounds = 1;
    t.epochs_per_round = 1;
    auto r = run_protocol(d, 1, seeds, dense_factory(Strategy::iterative, enc, t, {}));
    CHECK(r.match1_std == 0.0);
    CHECK(r.k_ex_per_doc == 1);
    auto again = run_protocol(d, 1, seeds, dense_factory(Strategy::iterative, enc, t, {}));
    CHECK(again.per_seed[0].match1 == r.per_seed[0].match1);
  }
  SUBCASE("ten seeds fill the report") {
    auto r = run_protocol(d, 1, default_seeds(), bm25_factory());
    CHECK(r.per_seed.size() == 10);
    std::vector<double> m1;
    for (const auto& s : r.per_seed) m1.push_back(s.match1);
    auto [mean, sd] = oracle::mean_sample_std(m1);
    CHECK(std::abs(r.match1 - mean) < 1e-12);
    CHECK(std::abs(r.match1_std - sd) < 1e-12);
    auto text = format_report(r);
    std::size_t lines = 0;
    for (char ch : text) lines += ch == '\n';
    CHECK(lines == 11);
  }
}

TEST_CASE("summary rows") {
  CHECK(summary_header() == "system\t0-shot\t1 ex/doc\t3 ex/doc");
  std::vector<EvalReport> reports(3);
  reports[0].match1 = 0.5;
  reports[1].k_ex_per_doc = 1;
  reports[2].k_ex_per_doc = 3;
  reports[1].match1 = 0.612;
  reports[1].match1_std = 0.031;
  reports[2].match1 = 0.9;
  CHECK(summary_row("bm25", reports) == "bm25\t50.0(0.0)\t61.2(3.1)\t90.0(0.0)");
  CHECK(summary_row("x", std::span(reports).first(1)) == "x\t50.0(0.0)\t-\t-");
}

TEST_CASE("benchmark_latency") {
  auto d = small_dataset();
  Bm25System bm25(Bm25Index::build(d.passages, TokenizerConfig::sparse_default()));
  std::vector<std::string> one = {d.test_queries[0].text};
  auto s = benchmark_latency(bm25, one, 0, 1);
  CHECK(s.samples == 1);
  CHECK(s.p50_ms == s.mean_ms);
  CHECK(s.index_bytes == bm25.index().serialize().size());
  std::vector<std::string> all;
  for (const auto& q : d.test_queries) all.push_back(q.text);
  auto many = benchmark_latency(bm25, all, 2, 3);
  CHECK(many.samples == 3 * all.size());
  CHECK(many.p50_ms <= many.p95_ms);
  CHECK(many.mean_ms > 0.0);
}

TEST_CASE("systems agree with their components") {
  auto d = small_dataset();
  auto index = Bm25Index::build(d.passages, TokenizerConfig::sparse_default());
  EncoderConfig enc;
  enc.dim = 8;
  auto params = init_params(enc, 1);
  auto tv = build_token_index(params, d.passages, TokenizerConfig::dense_default(), {});
  DenseSearchOptions o;
  o.exhaustive = true;
  auto a = std::make_unique<Bm25System>(index);
  auto b = std::make_unique<DenseSystem>(params, tv, o);
  const std::string q = d.test_queries[0].text;
  CHECK(b->name() == "dense-late");
  CHECK(a->search(q, 3) == index.search(q, 3));
  auto sa = a->score_all(q);
  auto sb = b->score_all(q);
  CHECK(sb.size() == d.passages.size());
  EnsembleSystem e(std::move(a), std::move(b), {0.3, 1.0});
  CHECK(e.search(q, 5) == [&] {
    auto r = ensemble_scores(sa, sb, {0.3, 1.0});
    r.items.resize(5);
    return r;
  }());
}
