#include "liri/dataset.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "json.hpp"

#include "liri/error.hpp"
#include "liri/io.hpp"
#include "liri/random.hpp"
#include "liri/text.hpp"

namespace liri {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::invalid_argument, "synth: " + what); };
  if (n_passages < 2) fail("n_passages must be >= 2");
  if (keywords_per_passage < 1) fail("keywords_per_passage must be >= 1");
  if (keywords_per_query < 1 || keywords_per_query > keywords_per_passage) {
    fail("keywords_per_query must be in [1, keywords_per_passage]");
  }
  if (filler_per_passage > shared_vocab_size) {
    fail("filler_per_passage exceeds shared_vocab_size");
  }
  if (!(paraphrase_noise >= 0.0 && paraphrase_noise < 1.0)) {
    fail("paraphrase_noise must be in [0, 1)");
  }
}

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::uint32_t kSyllables = 3;

// Distinct CV-syllable pseudo-words that survive stemming and are not stopwords.
class WordMint {
 public:
  explicit WordMint(Rng& rng) : rng_(rng) {}

  static std::uint64_t capacity() {
    std::uint64_t per = kConsonants.size() * kVowels.size();
    std::uint64_t c = 1;
    for (std::uint32_t i = 0; i < kSyllables; ++i) c *= per;
    return c;
  }

  std::string next() {
    for (;;) {
      std::string w;
      for (std::uint32_t s = 0; s < kSyllables; ++s) {
        w += kConsonants[uniform_below(rng_, kConsonants.size())];
        w += kVowels[uniform_below(rng_, kVowels.size())];
      }
      if (porter_stem(w) != w || default_stopwords().contains(w)) continue;
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string pad3(std::uint32_t i) {
  auto s = std::to_string(i);
  return s.size() < 3 ? std::string(3 - s.size(), '0') + s : s;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  const std::uint64_t demand =
      2ull * config.n_passages * config.keywords_per_passage + config.shared_vocab_size;
  // Rejection sampling slows sharply near capacity; keep well below it.
  if (demand > WordMint::capacity() / 4) {
    throw Error(Errc::invalid_argument,
                "synth: keyword demand " + std::to_string(demand) + " exceeds vocabulary (" +
                    std::to_string(WordMint::capacity() / 4) + ")");
  }

  Rng rng(config.seed);
  WordMint mint(rng);
  std::vector<std::string> filler(config.shared_vocab_size);
  for (auto& w : filler) w = mint.next();

  Dataset ds;
  ds.name = config.name;
  std::vector<std::vector<std::string>> keywords(config.n_passages);
  std::vector<std::vector<std::string>> paraphrase(config.n_passages);
  std::map<std::string, std::vector<std::string>> keyword_sets;
  for (std::uint32_t p = 0; p < config.n_passages; ++p) {
    for (std::uint32_t k = 0; k < config.keywords_per_passage; ++k) {
      keywords[p].push_back(mint.next());
      paraphrase[p].push_back(mint.next());
    }
    std::vector<std::string> words = keywords[p];
    for (auto f : sample_indices(rng, config.shared_vocab_size, config.filler_per_passage)) {
      words.push_back(filler[f]);
    }
    shuffle_in_place(words, rng);
    Passage passage{"p" + pad3(p), join(words)};
    keyword_sets[passage.id] = keywords[p];
    ds.passages.push_back(std::move(passage));
  }

  auto make_query = [&](std::uint32_t p) {
    auto picks = sample_indices(rng, config.keywords_per_passage, config.keywords_per_query);
    std::vector<std::string> words;
    bool kept = false;
    for (auto k : picks) {
      if (uniform_unit(rng) < config.paraphrase_noise) {
        if (uniform_unit(rng) < 0.5) {
          words.push_back(paraphrase[p][k]);
        } else {
          words.push_back(filler[uniform_below(rng, filler.size())]);
        }
      } else {
        words.push_back(keywords[p][k]);
        kept = true;
      }
    }
    if (!kept) {
      // Separability: one true keyword must survive.
      auto slot = uniform_below(rng, picks.size());
      words[slot] = keywords[p][picks[slot]];
    }
    shuffle_in_place(words, rng);
    return join(words);
  };

  for (std::uint32_t p = 0; p < config.n_passages; ++p) {
    for (std::uint32_t j = 0; j < config.queries_per_passage; ++j) {
      ds.train_queries.push_back({"q" + pad3(p) + "_" + std::to_string(j), make_query(p),
                                  ds.passages[p].id});
    }
    for (std::uint32_t j = 0; j < config.test_queries_per_passage; ++j) {
      ds.test_queries.push_back({"t" + pad3(p) + "_" + std::to_string(j), make_query(p),
                                 ds.passages[p].id});
    }
  }
  audit_separability(ds, keyword_sets);
  return ds;
}

void audit_separability(const Dataset& dataset,
                        const std::map<std::string, std::vector<std::string>>& keywords) {
  auto audit = [&](const std::vector<Query>& queries) {
    for (const auto& q : queries) {
      std::set<std::string> words;
      for (auto& t : tokenize(TokenizerConfig::dense_default(), q.text)) words.insert(t);
      std::size_t best = 0;
      std::size_t best_count = 0;
      std::string best_id;
      for (const auto& [pid, kws] : keywords) {
        std::size_t overlap = 0;
        for (const auto& k : kws) overlap += words.count(k);
        if (overlap > best) {
          best = overlap;
          best_count = 1;
          best_id = pid;
        } else if (overlap == best && overlap > 0) {
          ++best_count;
        }
      }
      if (best == 0 || best_count != 1 || best_id != q.gold) {
        throw Error(Errc::malformed, "synth: separability audit failed for query '" + q.id + "'");
      }
    }
  };
  audit(dataset.train_queries);
  audit(dataset.test_queries);
}

std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default:
        out += '\\';
        out += s[i];
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view contents) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    auto line = contents.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

[[noreturn]] void fail_at(Errc code, const fs::path& file, std::size_t line, const std::string& msg) {
  throw Error(code, file.filename().string() + ":" + std::to_string(line) + ": " + msg);
}

std::pair<std::string_view, std::string_view> split_tab(std::string_view line, const fs::path& file,
                                                        std::size_t line_no) {
  auto tab = line.find('\t');
  if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
    fail_at(Errc::malformed, file, line_no, "expected 2 tab-separated fields");
  }
  if (tab == 0) fail_at(Errc::malformed, file, line_no, "empty id");
  return {line.substr(0, tab), line.substr(tab + 1)};
}

std::vector<Query> load_queries(const fs::path& queries_path, const fs::path& qrels_path,
                                const std::unordered_set<std::string>& passage_ids) {
  std::vector<Query> queries;
  std::map<std::string, std::size_t> index;
  const auto contents = io::read_file(queries_path);
  auto lines = split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto [id, text] = split_tab(lines[i], queries_path, i + 1);
    if (!index.emplace(std::string(id), queries.size()).second) {
      fail_at(Errc::duplicate_id, queries_path, i + 1, "duplicate query id '" + std::string(id) + "'");
    }
    queries.push_back({std::string(id), unescape_field(text), ""});
  }
  const auto qrels_contents = io::read_file(qrels_path);
  auto qlines = split_lines(qrels_contents);
  for (std::size_t i = 0; i < qlines.size(); ++i) {
    if (qlines[i].empty()) continue;
    auto [qid, pid] = split_tab(qlines[i], qrels_path, i + 1);
    auto it = index.find(std::string(qid));
    if (it == index.end()) {
      fail_at(Errc::unknown_id, qrels_path, i + 1, "qrels for unknown query '" + std::string(qid) + "'");
    }
    auto& q = queries[it->second];
    if (!q.gold.empty()) {
      fail_at(Errc::duplicate_id, qrels_path, i + 1,
              "query '" + q.id + "' has more than one gold passage");
    }
    if (!passage_ids.contains(std::string(pid))) {
      fail_at(Errc::dangling_gold, qrels_path, i + 1,
              "dangling gold '" + std::string(pid) + "' for query '" + q.id + "'");
    }
    q.gold = std::string(pid);
  }
  for (const auto& q : queries) {
    if (q.gold.empty()) {
      throw Error(Errc::malformed, qrels_path.filename().string() + ": query '" + q.id +
                                       "' has no gold passage");
    }
  }
  return queries;
}

std::string format_queries(const std::vector<Query>& queries) {
  std::string out;
  for (const auto& q : queries) out += q.id + "\t" + escape_field(q.text) + "\n";
  return out;
}

std::string format_qrels(const std::vector<Query>& queries) {
  std::string out;
  for (const auto& q : queries) out += q.id + "\t" + q.gold + "\n";
  return out;
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  std::string corpus;
  for (const auto& p : dataset.passages) {
    corpus += nlohmann::json{{"id", p.id}, {"text", p.text}}.dump() + "\n";
  }
  io::write_file_atomic(dir / "corpus.jsonl", corpus);
  io::write_file_atomic(dir / "train_queries.tsv", format_queries(dataset.train_queries));
  io::write_file_atomic(dir / "train_qrels.tsv", format_qrels(dataset.train_queries));
  io::write_file_atomic(dir / "test_queries.tsv", format_queries(dataset.test_queries));
  io::write_file_atomic(dir / "test_qrels.tsv", format_qrels(dataset.test_queries));
  nlohmann::json meta = {{"name", dataset.name},
                         {"n_passages", dataset.passages.size()},
                         {"n_train_queries", dataset.train_queries.size()},
                         {"n_test_queries", dataset.test_queries.size()}};
  io::write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  const auto corpus_path = dir / "corpus.jsonl";
  const auto contents = io::read_file(corpus_path);
  auto lines = split_lines(contents);
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception&) {
      fail_at(Errc::malformed, corpus_path, i + 1, "invalid JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
        !j["text"].is_string()) {
      fail_at(Errc::malformed, corpus_path, i + 1, "expected {\"id\": string, \"text\": string}");
    }
    Passage p{j["id"].get<std::string>(), j["text"].get<std::string>()};
    if (p.id.empty()) fail_at(Errc::malformed, corpus_path, i + 1, "empty id");
    if (!ids.insert(p.id).second) {
      fail_at(Errc::duplicate_id, corpus_path, i + 1, "duplicate passage id '" + p.id + "'");
    }
    ds.passages.push_back(std::move(p));
  }
  if (ds.passages.empty()) throw Error(Errc::empty_corpus, corpus_path.string() + ": empty corpus");

  ds.train_queries = load_queries(dir / "train_queries.tsv", dir / "train_qrels.tsv", ids);
  ds.test_queries = load_queries(dir / "test_queries.tsv", dir / "test_qrels.tsv", ids);

  if (fs::exists(dir / "meta.json")) {
    try {
      auto meta = nlohmann::json::parse(io::read_file(dir / "meta.json"));
      ds.name = meta.value("name", std::string{});
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::malformed, (dir / "meta.json").string() + ": invalid JSON");
    }
  }
  return ds;
}

}  // namespace liri
