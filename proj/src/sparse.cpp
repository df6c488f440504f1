#include "liri/sparse.hpp"

#include <cmath>
#include <unordered_set>

#include "liri/error.hpp"
#include "liri/io.hpp"
#include "liri/serialize_util.hpp"

namespace liri {

void Bm25Params::validate() const {
  if (!(k1 >= 0.0) || !std::isfinite(k1)) {
    throw Error(Errc::invalid_argument, "bm25: k1 must be >= 0");
  }
  if (!(b >= 0.0 && b <= 1.0)) throw Error(Errc::invalid_argument, "bm25: b must be in [0,1]");
}

Bm25Index Bm25Index::build(std::span<const Passage> passages, TokenizerConfig tokenizer,
                           Bm25Params params) {
  params.validate();
  if (passages.empty()) throw Error(Errc::empty_corpus, "bm25: empty corpus");

  Bm25Index index;
  index.params_ = params;
  index.tokenizer_ = std::move(tokenizer);

  std::unordered_set<std::string> seen;
  std::uint64_t total_len = 0;
  for (const auto& p : passages) {
    if (!seen.insert(p.id).second) {
      throw Error(Errc::duplicate_id, "bm25: duplicate passage id '" + p.id + "'");
    }
    auto doc = static_cast<std::uint32_t>(index.ids_.size());
    index.ids_.push_back(p.id);

    auto tokens = tokenize(index.tokenizer_, p.text);
    index.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_len += tokens.size();

    std::map<std::string_view, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      auto it = index.postings_.find(term);
      if (it == index.postings_.end()) it = index.postings_.emplace(std::string(term), std::vector<Posting>{}).first;
      it->second.push_back({doc, count});
    }
  }
  index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(index.ids_.size());
  index.rebuild_lookup();
  return index;
}

void Bm25Index::rebuild_lookup() {
  id_lookup_.clear();
  for (std::uint32_t i = 0; i < ids_.size(); ++i) id_lookup_.emplace(ids_[i], i);
}

std::uint32_t Bm25Index::doc_index(std::string_view passage_id) const {
  auto it = id_lookup_.find(std::string(passage_id));
  if (it == id_lookup_.end()) {
    throw Error(Errc::unknown_id, "bm25: unknown passage id '" + std::string(passage_id) + "'");
  }
  return it->second;
}

std::uint32_t Bm25Index::doc_len(std::string_view passage_id) const {
  return doc_len_[doc_index(passage_id)];
}

double Bm25Index::idf(std::string_view term) const {
  auto it = postings_.find(term);
  double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  double n = static_cast<double>(ids_.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::term_weight(double idf, std::uint32_t tf, std::uint32_t dl) const {
  double f = tf;
  // avgdl is 0 only when every passage is empty, in which case no term matches.
  double norm = avgdl_ > 0.0 ? static_cast<double>(dl) / avgdl_ : 0.0;
  return idf * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

double Bm25Index::score(const TokenSeq& query, std::string_view passage_id) const {
  auto doc = doc_index(passage_id);
  double total = 0.0;
  for (const auto& term : query) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& list = it->second;
    auto pos = std::lower_bound(list.begin(), list.end(), doc,
                                [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    if (pos == list.end() || pos->doc != doc) continue;
    total += term_weight(idf(term), pos->tf, doc_len_[doc]);
  }
  return total;
}

std::vector<double> Bm25Index::score_all_tokens(const TokenSeq& query) const {
  std::vector<double> acc(ids_.size(), 0.0);
  for (const auto& term : query) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    double w = idf(term);
    for (const auto& p : it->second) acc[p.doc] += term_weight(w, p.tf, doc_len_[p.doc]);
  }
  return acc;
}

RankedResult Bm25Index::search(std::string_view query_text, std::size_t k) const {
  if (k == 0) throw Error(Errc::invalid_argument, "bm25: k must be >= 1");
  auto acc = score_all_tokens(tokenize(tokenizer_, query_text));
  std::vector<ScoredPassage> scored;
  for (std::uint32_t d = 0; d < acc.size(); ++d) {
    if (acc[d] > 0.0) scored.push_back({ids_[d], acc[d]});
  }
  return make_ranking(std::move(scored), k);
}

ScoreMap Bm25Index::score_all(std::string_view query_text) const {
  auto acc = score_all_tokens(tokenize(tokenizer_, query_text));
  ScoreMap out;
  for (std::uint32_t d = 0; d < acc.size(); ++d) out.emplace(ids_[d], acc[d]);
  return out;
}

std::string Bm25Index::serialize() const {
  io::BinaryWriter w;
  w.magic(kMagic);
  w.f64(params_.k1);
  w.f64(params_.b);
  w.u32(static_cast<std::uint32_t>(ids_.size()));
  w.f64(avgdl_);
  detail::write_tokenizer(w, tokenizer_);
  for (std::size_t d = 0; d < ids_.size(); ++d) {
    w.str(ids_[d]);
    w.u32(doc_len_[d]);
  }
  w.u32(static_cast<std::uint32_t>(postings_.size()));
  for (const auto& [term, list] : postings_) {
    w.str(term);
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      w.u32(p.doc);
      w.u32(p.tf);
    }
  }
  return w.take();
}

Bm25Index Bm25Index::deserialize(std::string_view bytes) {
  io::BinaryReader r(bytes, "bm25 index");
  r.expect_magic(kMagic);
  Bm25Index index;
  index.params_.k1 = r.f64();
  index.params_.b = r.f64();
  auto n = r.u32();
  index.avgdl_ = r.f64();
  index.tokenizer_ = detail::read_tokenizer(r);
  index.ids_.resize(n);
  index.doc_len_.resize(n);
  for (std::uint32_t d = 0; d < n; ++d) {
    index.ids_[d] = r.str();
    index.doc_len_[d] = r.u32();
  }
  auto n_terms = r.u32();
  for (std::uint32_t t = 0; t < n_terms; ++t) {
    auto term = r.str();
    auto len = r.u32();
    std::vector<Posting> list(len);
    for (auto& p : list) {
      p.doc = r.u32();
      p.tf = r.u32();
      if (p.doc >= n || p.tf == 0) {
        throw Error(Errc::malformed, "bm25 index: bad posting for term '" + term + "'");
      }
    }
    index.postings_.emplace(std::move(term), std::move(list));
  }
  r.expect_end();
  index.rebuild_lookup();
  return index;
}

void Bm25Index::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, serialize());
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

}  // namespace liri
