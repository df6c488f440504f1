#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "liri/error.hpp"
#include "liri/io.hpp"
#include "liri/learn.hpp"
#include "oracles.hpp"

using namespace liri;

namespace {

RankedResult ranking_of(const std::vector<std::string>& ids) {
  RankedResult r;
  double s = static_cast<double>(ids.size());
  for (const auto& id : ids) r.items.push_back({id, s--});
  return r;
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

// Max relative error between analytic and finite-difference gradients.
double gradient_error(const EncoderParams& p, const std::vector<std::uint32_t>& q,
                      const std::vector<std::uint32_t>& pos, const std::vector<std::uint32_t>& neg) {
  const bool dot = p.config.similarity == Similarity::dot;
  SparseGradient g;
  g.dim = p.config.dim;
  const double loss = triple_loss_grad(p, q, pos, neg, 1.0, &g);
  const auto table = widen(p.table);
  CHECK(loss == doctest::Approx(oracle::triple_loss(table, p.config.dim, q, pos, neg, dot)).epsilon(1e-12));
  const auto analytic = g.dense(p.config.buckets);
  const auto fd = oracle::fd_gradient(table, p.config.dim, q, pos, neg, dot, 1e-4);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-3});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("pairwise_loss values") {
  CHECK(pairwise_loss(0.0, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(pairwise_loss(-7.5, -7.5) == doctest::Approx(std::log(2.0)));
  CHECK(pairwise_loss(50.0, 0.0) < 1e-9);
  CHECK(pairwise_loss(1.0, 0.0) == doctest::Approx(std::log1p(std::exp(-1.0))));
  CHECK(pairwise_loss(1.0, 0.0) == doctest::Approx(0.3133).epsilon(1e-4));
  CHECK(pairwise_loss(0.0, 1000.0) == doctest::Approx(1000.0));
  CHECK(std::isfinite(pairwise_loss(-1e300, 1e300)));
  for (double bad : {NAN, INFINITY, -INFINITY}) {
    try {
      static_cast<void>(pairwise_loss(bad, 0.0));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::non_finite);
    }
    CHECK_THROWS_AS(static_cast<void>(pairwise_loss(0.0, bad)), Error);
  }
}

TEST_CASE("pairwise_loss is monotone") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    const double d = 0.01 + std::abs(u(rng)) * 0.1;
    CHECK(pairwise_loss(a + d, b) < pairwise_loss(a, b));
    CHECK(pairwise_loss(a, b + d) > pairwise_loss(a, b));
    CHECK(pairwise_loss(a, a) == doctest::Approx(std::log(2.0)));
  }
}

TEST_CASE("analytic gradient matches finite differences on a 5-bucket toy") {
  EncoderConfig c;
  c.dim = 3;
  c.buckets = 5;
  auto p = init_params(c, 11);
  const std::vector<std::uint32_t> q = {0, 1};
  const std::vector<std::uint32_t> pos = {0, 2, 2};
  const std::vector<std::uint32_t> neg = {3, 4};
  REQUIRE(oracle::argmax_margin(widen(p.table), 3, q, {pos, neg}, false) > 2e-4);
  CHECK(gradient_error(p, q, pos, neg) < 1e-4);
  p = init_params(c, 12);
  p.config.similarity = Similarity::dot;
  REQUIRE(oracle::argmax_margin(widen(p.table), 3, q, {pos, neg}, true) > 2e-4);
  CHECK(gradient_error(p, q, pos, neg) < 1e-4);
}

TEST_CASE("analytic gradient matches finite differences on random toys") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 40; ++seed) {
    EncoderConfig c;
    c.dim = 2 + rng() % 3;
    c.buckets = 2 + rng() % 7;
    c.similarity = checked % 2 ? Similarity::dot : Similarity::neg_l2;
    auto p = init_params(c, seed);
    auto draw = [&](std::size_t n) {
      std::vector<std::uint32_t> v;
      for (std::size_t i = 0; i < n; ++i) v.push_back(static_cast<std::uint32_t>(rng() % c.buckets));
      return v;
    };
    auto q = draw(1 + rng() % 4);
    auto pos = draw(1 + rng() % 5);
    auto neg = draw(1 + rng() % 5);
    if (oracle::argmax_margin(widen(p.table), c.dim, q, {pos, neg}, c.similarity == Similarity::dot) < 2e-4) {
      continue;
    }
    CHECK(gradient_error(p, q, pos, neg) < 1e-4);
    ++checked;
  }
}

TEST_CASE("empty passages are rejected by the loss") {
  EncoderConfig c;
  c.dim = 2;
  c.buckets = 4;
  auto p = init_params(c, 1);
  std::vector<std::uint32_t> q = {0};
  std::vector<std::uint32_t> none;
  try {
    static_cast<void>(triple_loss_grad(p, q, none, q, 1.0, nullptr));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_passage);
  }
}

TEST_CASE("grad_step") {
  EncoderConfig c;
  c.dim = 8;
  c.buckets = 1024;
  auto p = init_params(c, 3);
  std::vector<Passage> ps = {{"pos", "reset password"}, {"neg", "parking garage"}};
  std::vector<Query> qs = {{"q", "reset password", "pos"}};
  TrainingSet set(ps, qs, c);
  std::vector<TrainingTriple> batch = {{"q", "pos", "neg"}};

  SUBCASE("lr = 0 leaves the table alone and bumps the version") {
    auto r = grad_step(p, batch, set, 0.0);
    CHECK(r.params.table == p.table);
    CHECK(r.params.version == p.version + 1);
  }
  SUBCASE("a step lowers the loss") {
    auto before = grad_step(p, batch, set, 0.0).mean_loss;
    auto r = grad_step(p, batch, set, 0.05);
    CHECK(r.mean_loss == doctest::Approx(before));
    auto after = grad_step(r.params, batch, set, 0.0).mean_loss;
    CHECK(after < before);
    CHECK(r.params.version == 1);
    CHECK(p.version == 0);
  }
  SUBCASE("versions increase step by step") {
    auto cur = p;
    for (std::uint64_t i = 1; i <= 5; ++i) {
      cur = grad_step(cur, batch, set, 0.05).params;
      CHECK(cur.version == i);
    }
  }
  SUBCASE("errors") {
    std::vector<TrainingTriple> bad = {{"q", "pos", "nowhere"}};
    try {
      static_cast<void>(grad_step(p, bad, set, 0.05));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_id);
      CHECK(std::string(e.what()).find("nowhere") != std::string::npos);
    }
    CHECK_THROWS_AS(static_cast<void>(grad_step(p, std::vector<TrainingTriple>{}, set, 0.05)), Error);
  }
}

TEST_CASE("minibatch gradient is the mean of per-triple gradients") {
  EncoderConfig c;
  c.dim = 4;
  c.buckets = 64;
  auto p = init_params(c, 5);
  std::vector<Passage> ps = {{"a", "x y"}, {"b", "z w"}, {"c", "x v"}};
  std::vector<Query> qs = {{"q1", "x", "a"}, {"q2", "z", "b"}};
  TrainingSet set(ps, qs, c);
  std::vector<TrainingSet::Resolved> batch = {set.resolve({"q1", "a", "b"}), set.resolve({"q2", "b", "c"})};
  SparseGradient mean;
  mean.dim = 4;
  const double loss = minibatch_loss_grad(p, batch, set, &mean);
  SparseGradient sum;
  sum.dim = 4;
  double total = 0.0;
  for (const auto& t : batch) {
    total += triple_loss_grad(p, set.query_buckets(t.query), set.passage_buckets(t.pos),
                              set.passage_buckets(t.neg), 0.5, &sum);
  }
  CHECK(loss == doctest::Approx(total / 2.0));
  auto a = mean.dense(64);
  auto b = sum.dense(64);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]));
}

TEST_CASE("curate_triples examples") {
  std::vector<std::string> corpus = {"p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9"};
  Rng rng(1);
  SUBCASE("negatives are the passages ranked above gold") {
    std::map<std::string, RankedResult> rankings = {{"q", ranking_of({"p9", "p4", "p7", "p2", "p8"})}};
    auto batch = curate_triples(rankings, {{"q", "p7"}}, corpus, 5, 3, rng, 4);
    CHECK(batch.curated_by_version == 4);
    CHECK(batch.triples == std::vector<TrainingTriple>{{"q", "p7", "p9"}, {"q", "p7", "p4"}});
  }
  SUBCASE("rank 1 emits r_rand random negatives") {
    std::map<std::string, RankedResult> rankings = {{"q", ranking_of({"p3", "p1", "p2"})}};
    auto batch = curate_triples(rankings, {{"q", "p3"}}, corpus, 5, 3, rng);
    REQUIRE(batch.size() == 3);
    std::set<std::string> negs;
    for (const auto& t : batch.triples) {
      CHECK(t.pos_id == "p3");
      CHECK(t.neg_id != "p3");
      negs.insert(t.neg_id);
    }
    CHECK(negs.size() == 3);
    // r_rand beyond the corpus is capped at the non-gold passages.
    auto capped = curate_triples(rankings, {{"q", "p3"}}, std::vector<std::string>{"p3", "p1"}, 5, 3, rng);
    CHECK(capped.triples == std::vector<TrainingTriple>{{"q", "p3", "p1"}});
  }
  SUBCASE("gold outside the top m uses all of them") {
    std::map<std::string, RankedResult> rankings = {{"q", ranking_of({"p1", "p2", "p3", "p4", "p5", "p6"})}};
    auto batch = curate_triples(rankings, {{"q", "p6"}}, corpus, 5, 3, rng);
    REQUIRE(batch.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(batch.triples[i].neg_id == corpus[i]);
  }
  SUBCASE("a query without a ranking is an error") {
    try {
      static_cast<void>(curate_triples({}, {{"lost", "p1"}}, corpus, 5, 3, rng));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_id);
      CHECK(std::string(e.what()).find("lost") != std::string::npos);
    }
  }
}

TEST_CASE("triple-count law on random rankings") {
  std::mt19937_64 gen(99);
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + gen() % 40;
    std::vector<std::string> corpus;
    for (std::size_t i = 0; i < n; ++i) corpus.push_back("d" + std::to_string(i));
    auto order = corpus;
    std::shuffle(order.begin(), order.end(), gen);
    const std::size_t m = 1 + gen() % n;
    const std::string gold = corpus[gen() % n];
    const std::size_t r_rand = gen() % 5;
    std::map<std::string, RankedResult> rankings = {{"q", ranking_of(order)}};
    auto batch = curate_triples(rankings, {{"q", gold}}, corpus, m, r_rand, rng);
    const auto rank = static_cast<std::size_t>(std::find(order.begin(), order.end(), gold) - order.begin()) + 1;
    std::set<std::string> negs;
    for (const auto& t : batch.triples) {
      CHECK(t.query_id == "q");
      CHECK(t.pos_id == gold);
      CHECK(t.neg_id != gold);
      negs.insert(t.neg_id);
    }
    CHECK(negs.size() == batch.size());
    if (rank == 1) {
      CHECK(batch.size() == std::min(r_rand, n - 1));
    } else {
      CHECK(negs == oracle::expected_negatives(order, gold, m));
      CHECK(batch.size() == (rank <= m ? rank - 1 : m));
    }
  }
}

TEST_CASE("all_negatives_triples") {
  std::vector<std::string> corpus = {"a", "b", "c"};
  std::vector<Query> qs = {{"q1", "", "a"}, {"q2", "", "c"}};
  auto batch = all_negatives_triples(qs, corpus);
  CHECK(batch.size() == 4);
  for (const auto& t : batch.triples) {
    CHECK(t.neg_id != t.pos_id);
  }
  std::vector<std::string> one = {"a"};
  std::vector<Query> q1 = {{"q1", "", "a"}};
  CHECK(all_negatives_triples(q1, one).empty());
}

TEST_CASE("bm25_guided_triples") {
  std::vector<Passage> ps = {{"p1", "reset password account"},
                             {"p2", "password policy rules"},
                             {"p3", "office parking"},
                             {"p4", "holiday calendar"}};
  auto bm25 = Bm25Index::build(ps, TokenizerConfig::sparse_default());
  std::vector<Query> qs = {{"q1", "password policy", "p1"}, {"q2", "parking", "p3"}};
  Rng a(7);
  Rng b(7);
  auto first = bm25_guided_triples(bm25, qs, 3, 2, a);
  auto second = bm25_guided_triples(bm25, qs, 3, 2, b);
  CHECK(first.triples == second.triples);
  std::vector<TrainingTriple> q1;
  std::size_t q2 = 0;
  for (const auto& t : first.triples) {
    if (t.query_id == "q1") q1.push_back(t);
    if (t.query_id == "q2") {
      ++q2;
      CHECK(t.neg_id != "p3");
    }
  }
  CHECK(q1 == std::vector<TrainingTriple>{{"q1", "p1", "p2"}});
  CHECK(q2 == 2);
}

TEST_CASE("triples file roundtrip") {
  TripleBatch batch;
  batch.triples = {{"q1", "a", "b"}, {"q 2", "c", "d"}};
  auto text = format_triples(batch);
  CHECK(text == "q1\ta\tb\nq 2\tc\td\n");
  CHECK(parse_triples(text).triples == batch.triples);
  testing::TempDir dir("triples");
  save_triples(batch, dir / "t.tsv");
  CHECK(parse_triples(io::read_file(dir / "t.tsv")).triples == batch.triples);
  CHECK(parse_triples("").empty());
  try {
    static_cast<void>(parse_triples("q1\ta\tb\nq2\ta\n"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(static_cast<void>(parse_triples("q1\ta\ta\n")), Error);
}
