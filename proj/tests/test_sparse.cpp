#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "liri/error.hpp"
#include "liri/sparse.hpp"
#include "oracles.hpp"

using namespace liri;

namespace {

std::vector<Passage> cat_dog() { return {{"d1", "cat sat"}, {"d2", "dog sat"}}; }
TokenizerConfig plain() { return TokenizerConfig{}; }

}  // namespace

TEST_CASE("bm25 build on two documents") {
  auto idx = Bm25Index::build(cat_dog(), plain());
  CHECK(idx.n_docs() == 2);
  CHECK(idx.avgdl() == doctest::Approx(2.0));
  std::vector<std::string> keys;
  for (const auto& [t, _] : idx.postings()) keys.push_back(t);
  CHECK(keys == std::vector<std::string>{"cat", "dog", "sat"});
  CHECK(idx.postings().at("sat").size() == 2);
}

TEST_CASE("bm25 term frequency and document length") {
  auto idx = Bm25Index::build(std::vector<Passage>{{"d", "a a a"}}, plain());
  REQUIRE(idx.postings().size() == 1);
  CHECK(idx.postings().at("a") == std::vector<Posting>{{0, 3}});
  CHECK(idx.doc_len("d") == 3);
}

TEST_CASE("bm25 keeps empty documents in the length statistics") {
  auto idx = Bm25Index::build(std::vector<Passage>{{"d1", "cat sat"}, {"d2", ""}}, plain());
  CHECK(idx.n_docs() == 2);
  CHECK(idx.doc_len("d2") == 0);
  CHECK(idx.avgdl() == doctest::Approx(1.0));
}

TEST_CASE("bm25 score matches the hand computation") {
  auto idx = Bm25Index::build(cat_dog(), plain());
  CHECK(idx.score({"cat"}, "d1") == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(idx.score({"cat"}, "d1") - 0.6931) < 1e-4);
  CHECK(idx.score({"bird"}, "d1") == 0.0);
  CHECK(idx.score({"sat"}, "d1") == idx.score({"sat"}, "d2"));
  CHECK(idx.score({"cat", "cat"}, "d1") == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("bm25 errors") {
  CHECK_THROWS_AS(Bm25Index::build(std::vector<Passage>{}, plain()), Error);
  try {
    Bm25Index::build(std::vector<Passage>{{"x", "a"}, {"x", "b"}}, plain());
    FAIL("expected duplicate id");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duplicate_id);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
  auto idx = Bm25Index::build(cat_dog(), plain());
  try {
    static_cast<void>(idx.score({"cat"}, "nope"));
    FAIL("expected unknown id");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_id);
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
  CHECK_THROWS_AS(static_cast<void>(idx.search("cat", 0)), Error);
  Bm25Params bad;
  bad.b = 1.5;
  CHECK_THROWS_AS(Bm25Index::build(cat_dog(), plain(), bad), Error);
}

TEST_CASE("bm25 search") {
  auto idx = Bm25Index::build(cat_dog(), plain());
  auto r = idx.search("cat", 2);
  REQUIRE(r.size() == 1);
  CHECK(r.items[0].id == "d1");
  CHECK(r.items[0].score == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(idx.search("sat", 10).size() == 2);
  CHECK(idx.search("sat", 10).items[0].id == "d1");  // tie broken by id
  CHECK(idx.search("", 5).empty());
  CHECK(idx.search("the", 5).empty());
}

TEST_CASE("idf decreases with document frequency") {
  std::vector<Passage> ps;
  for (int i = 0; i < 10; ++i) {
    std::string text;
    for (int t = 0; t <= i; ++t) text += "t" + std::to_string(t) + " ";
    ps.push_back({"p" + std::to_string(i), text});
  }
  // Term t_k occurs in 10-k documents.
  auto idx = Bm25Index::build(ps, plain());
  for (int k = 1; k < 10; ++k) {
    CHECK(idx.idf("t" + std::to_string(k)) > idx.idf("t" + std::to_string(k - 1)));
  }
  CHECK(idx.idf("t0") > 0.0);
}

TEST_CASE("with b = 0 scores do not depend on document length") {
  Bm25Params p;
  p.b = 0.0;
  auto idx = Bm25Index::build(
      std::vector<Passage>{{"short", "cat"}, {"long", "cat x y z w v u"}, {"other", "dog"}}, plain(), p);
  CHECK(idx.score({"cat"}, "short") == idx.score({"cat"}, "long"));
}

TEST_CASE("bm25 search equals exhaustive oracle scoring on random corpora") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    const std::size_t vocab = 3 + rng() % 25;
    std::vector<Passage> ps;
    std::vector<std::vector<std::string>> docs;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> words;
      std::string text;
      for (std::size_t w = 0, len = rng() % 12; w < len; ++w) {
        words.push_back(testing::random_word(rng, vocab));
        text += words.back() + " ";
      }
      docs.push_back(words);
      ps.push_back({"doc" + std::to_string(i), text});
    }
    Bm25Params params{0.5 + (rng() % 100) / 50.0, (rng() % 101) / 100.0};
    auto idx = Bm25Index::build(ps, plain(), params);
    std::vector<std::string> query;
    std::string qtext;
    for (std::size_t w = 0, len = 1 + rng() % 5; w < len; ++w) {
      query.push_back(testing::random_word(rng, vocab));
      qtext += query.back() + " ";
    }
    std::vector<ScoredPassage> expected;
    for (std::size_t i = 0; i < n; ++i) {
      double s = oracle::bm25(docs, query, i, params.k1, params.b);
      CHECK(idx.score(query, ps[i].id) == doctest::Approx(s).epsilon(1e-9));
      if (s > 0.0) expected.push_back({ps[i].id, s});
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
      return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    auto got = idx.search(qtext, n);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got.items[i].id == expected[i].id);
    }
  }
}

TEST_CASE("score_all covers every passage") {
  auto idx = Bm25Index::build(cat_dog(), plain());
  auto all = idx.score_all("cat");
  CHECK(all.size() == 2);
  CHECK(all.at("d2") == 0.0);
  CHECK(all.at("d1") == doctest::Approx(std::log(2.0)));
}

TEST_CASE("bm25 index serialization roundtrip") {
  auto idx = Bm25Index::build(std::vector<Passage>{{"a", "The running dogs"}, {"b", "a cat, running"}},
                              TokenizerConfig::sparse_default(), Bm25Params{1.5, 0.6});
  auto bytes = idx.serialize();
  auto back = Bm25Index::deserialize(bytes);
  CHECK(back == idx);
  CHECK(back.serialize() == bytes);
  CHECK(back.search("dog running", 5) == idx.search("dog running", 5));

  testing::TempDir dir("bm25");
  idx.save(dir / "x.idx");
  CHECK(Bm25Index::load(dir / "x.idx") == idx);

  auto corrupt = bytes;
  corrupt[0] = 'X';
  try {
    Bm25Index::deserialize(corrupt);
    FAIL("expected bad magic");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_magic);
  }
  try {
    Bm25Index::deserialize(bytes.substr(0, bytes.size() - 3));
    FAIL("expected truncation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::truncated);
  }
}
