#include "liri/metrics.hpp"

#include "liri/error.hpp"

namespace liri {

double match_at_k(const std::map<std::string, RankedResult>& rankings, const Qrels& qrels,
                  std::size_t k) {
  if (qrels.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [qid, gold] : qrels) {
    auto it = rankings.find(qid);
    if (it == rankings.end()) {
      throw Error(Errc::unknown_id, "match_at_k: no ranking for query '" + qid + "'");
    }
    auto rank = it->second.rank_of(gold);
    if (rank != 0 && rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(qrels.size());
}

}  // namespace liri
