#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "liri/io.hpp"
#include "liri/text.hpp"

using namespace liri;

namespace {
TokenizerConfig plain() { return TokenizerConfig{}; }
}  // namespace

TEST_CASE("tokenize lowercases, strips punctuation and drops stopwords") {
  TokenizerConfig c;
  c.stopwords = {"the"};
  CHECK(tokenize(c, "The cat sat.") == TokenSeq{"cat", "sat"});
}

TEST_CASE("tokenize of empty or blank text is empty") {
  CHECK(tokenize(plain(), "").empty());
  CHECK(tokenize(TokenizerConfig::sparse_default(), "").empty());
  CHECK(tokenize(plain(), " \t\n  ").empty());
  CHECK(tokenize(TokenizerConfig::sparse_default(), "the of and").empty());
}

TEST_CASE("tokenize with stemming") {
  TokenizerConfig c;
  c.stem = true;
  CHECK(tokenize(c, "running runs") == TokenSeq{"run", "run"});
}

TEST_CASE("punctuation is stripped only at token edges") {
  CHECK(tokenize(plain(), "hello, world!") == TokenSeq{"hello", "world"});
  CHECK(tokenize(plain(), "don't e-mail") == TokenSeq{"don't", "e-mail"});
  CHECK(tokenize(plain(), "-- ... !!") == TokenSeq{});
  CHECK(tokenize(plain(), "(x)") == TokenSeq{"x"});
  CHECK(tokenize(plain(), "$100 50%") == TokenSeq{"100", "50"});
  CHECK(tokenize(plain(), "\xC2\xAB" "bonjour" "\xC2\xBB") == TokenSeq{"bonjour"});
  CHECK(tokenize(plain(), "\xE2\x80\x9Cquoted\xE2\x80\x9D") == TokenSeq{"quoted"});
}

TEST_CASE("options can be switched off") {
  TokenizerConfig c;
  c.lowercase = false;
  c.strip_punctuation = false;
  CHECK(tokenize(c, "Hello, World!") == TokenSeq{"Hello,", "World!"});
}

TEST_CASE("lowercasing covers Latin-1 capitals") {
  CHECK(tokenize(plain(), "CAF\xC3\x89") == TokenSeq{"caf\xC3\xA9"});
}

TEST_CASE("tokens never contain whitespace and are never empty") {
  std::mt19937_64 rng(3);
  const std::string alphabet = "aB ,.!?\t\n-'x\"Z";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int i = 0; i < 40; ++i) text += alphabet[rng() % alphabet.size()];
    for (const auto& cfg : {plain(), TokenizerConfig::sparse_default()}) {
      for (const auto& t : tokenize(cfg, text)) {
        CHECK_FALSE(t.empty());
        CHECK(t.find_first_of(" \t\n") == std::string::npos);
      }
    }
  }
}

TEST_CASE("casing is idempotent and stopword removal keeps order") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"The", "Cat", "and", "DOG", "of", "Zebra!", "a", "Quick,"};
  TokenizerConfig c;
  c.stopwords = default_stopwords();
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    for (int i = 0; i < 12; ++i) text += words[rng() % words.size()] + " ";
    auto once = tokenize(c, text);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    CHECK(tokenize(c, joined) == once);
    CHECK(tokenize(c, text) == once);

    auto all = tokenize(plain(), text);
    std::vector<std::string> filtered;
    for (const auto& t : all) {
      if (!c.stopwords.contains(t)) filtered.push_back(t);
    }
    CHECK(filtered == once);
  }
}

TEST_CASE("Porter stemmer reference vocabulary") {
  const std::vector<std::pair<const char*, const char*>> cases = {
      {"caresses", "caress"},     {"ponies", "poni"},          {"ties", "ti"},
      {"caress", "caress"},       {"cats", "cat"},             {"feed", "feed"},
      {"agreed", "agre"},         {"plastered", "plaster"},    {"bled", "bled"},
      {"motoring", "motor"},      {"sing", "sing"},            {"conflated", "conflat"},
      {"troubled", "troubl"},     {"sized", "size"},           {"hopping", "hop"},
      {"tanned", "tan"},          {"falling", "fall"},         {"hissing", "hiss"},
      {"fizzed", "fizz"},         {"failing", "fail"},         {"filing", "file"},
      {"happy", "happi"},         {"sky", "sky"},              {"relational", "relat"},
      {"conditional", "condit"},  {"rational", "ration"},      {"valenci", "valenc"},
      {"hesitanci", "hesit"},     {"digitizer", "digit"},      {"conformabli", "conform"},
      {"radicalli", "radic"},     {"differentli", "differ"},   {"vileli", "vile"},
      {"analogousli", "analog"},  {"vietnamization", "vietnam"}, {"predication", "predic"},
      {"operator", "oper"},       {"feudalism", "feudal"},     {"decisiveness", "decis"},
      {"hopefulness", "hope"},    {"callousness", "callous"},  {"formaliti", "formal"},
      {"sensitiviti", "sensit"},  {"sensibiliti", "sensibl"},  {"triplicate", "triplic"},
      {"formative", "form"},      {"formalize", "formal"},     {"electriciti", "electr"},
      {"electrical", "electr"},   {"hopeful", "hope"},         {"goodness", "good"},
      {"revival", "reviv"},       {"allowance", "allow"},      {"inference", "infer"},
      {"airliner", "airlin"},     {"gyroscopic", "gyroscop"},  {"adjustable", "adjust"},
      {"defensible", "defens"},   {"irritant", "irrit"},       {"replacement", "replac"},
      {"adjustment", "adjust"},   {"dependent", "depend"},     {"adoption", "adopt"},
      {"homologou", "homolog"},   {"communism", "commun"},     {"activate", "activ"},
      {"angulariti", "angular"},  {"homologous", "homolog"},   {"effective", "effect"},
      {"bowdlerize", "bowdler"},  {"probate", "probat"},       {"rate", "rate"},
      {"cease", "ceas"},          {"controll", "control"},     {"roll", "roll"},
      {"generalizations", "gener"}, {"oscillators", "oscil"},  {"running", "run"},
      {"runs", "run"},            {"is", "is"},                {"a", "a"},
  };
  for (const auto& [in, out] : cases) {
    CAPTURE(in);
    CHECK(porter_stem(in) == out);
  }
}

TEST_CASE("Porter stemmer leaves non-alphabetic words alone") {
  CHECK(porter_stem("x86s") == "x86s");
  CHECK(porter_stem("caf\xC3\xA9s") == "caf\xC3\xA9s");
  CHECK(porter_stem("") == "");
}

TEST_CASE("stopword files allow comments and blank lines") {
  auto words = parse_stopwords("# header\nthe\n\n  of  \n# and\nAnd\n");
  CHECK(words == std::set<std::string, std::less<>>{"the", "of", "and"});

  testing::TempDir dir("stop");
  io::write_file_atomic(dir / "stop.txt", "foo\nbar # trailing\n");
  auto loaded = load_stopwords(dir / "stop.txt");
  CHECK(loaded.contains("foo"));
  CHECK(loaded.contains("bar"));
}

TEST_CASE("built-in stopword list is a reasonable size") {
  CHECK(default_stopwords().size() >= 100);
  CHECK(default_stopwords().contains("the"));
  CHECK_FALSE(default_stopwords().contains("password"));
}

TEST_CASE("punctuation classification") {
  CHECK(is_punct_or_symbol(U'.'));
  CHECK(is_punct_or_symbol(U'$'));
  CHECK(is_punct_or_symbol(U'“'));
  CHECK(is_punct_or_symbol(U'¿'));
  CHECK_FALSE(is_punct_or_symbol(U'a'));
  CHECK_FALSE(is_punct_or_symbol(U'7'));
  CHECK_FALSE(is_punct_or_symbol(U'é'));
}
