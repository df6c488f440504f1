#include "liri/types.hpp"

#include <algorithm>

#include "liri/error.hpp"

namespace liri {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::duplicate_id: return "duplicate id";
    case Errc::empty_corpus: return "empty corpus";
    case Errc::unknown_id: return "unknown id";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::empty_passage: return "empty passage";
    case Errc::empty_sequence: return "empty sequence";
    case Errc::bad_magic: return "bad magic";
    case Errc::truncated: return "truncated";
    case Errc::non_finite: return "non-finite value";
    case Errc::stale_index: return "stale index";
    case Errc::dangling_gold: return "dangling gold";
    case Errc::malformed: return "malformed";
    case Errc::insufficient_queries: return "insufficient queries";
    case Errc::io: return "io";
    case Errc::role_failure: return "role failure";
    case Errc::cancelled: return "cancelled";
  }
  return "unknown";
}

std::size_t RankedResult::rank_of(const std::string& id) const noexcept {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id == id) return i + 1;
  }
  return 0;
}

RankedResult make_ranking(std::vector<ScoredPassage> scored, std::size_t k) {
  auto better = [](const ScoredPassage& a, const ScoredPassage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  if (k < scored.size()) {
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                      scored.end(), better);
    scored.resize(k);
  } else {
    std::sort(scored.begin(), scored.end(), better);
  }
  return RankedResult{std::move(scored)};
}

RankedResult make_ranking(const ScoreMap& scores, std::size_t k) {
  std::vector<ScoredPassage> scored;
  scored.reserve(scores.size());
  for (const auto& [id, s] : scores) scored.push_back({id, s});
  return make_ranking(std::move(scored), k);
}

Qrels qrels_of(std::span<const Query> queries) {
  Qrels qrels;
  for (const auto& q : queries) qrels[q.id] = q.gold;
  return qrels;
}

}  // namespace liri
