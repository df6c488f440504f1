#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace liri {

struct Passage {
  std::string id;
  std::string text;

  friend bool operator==(const Passage&, const Passage&) = default;
};

/// A query paired with the id of its single gold passage.
struct Query {
  std::string id;
  std::string text;
  std::string gold;

  friend bool operator==(const Query&, const Query&) = default;
};

struct Dataset {
  std::string name;
  std::vector<Passage> passages;
  std::vector<Query> train_queries;
  std::vector<Query> test_queries;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// query id -> gold passage id.
using Qrels = std::map<std::string, std::string>;

/// passage id -> score, covering a whole corpus.
using ScoreMap = std::map<std::string, double>;

struct ScoredPassage {
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredPassage&, const ScoredPassage&) = default;
};

/// Passages ordered by descending score, ties by ascending id. No duplicate ids.
struct RankedResult {
  std::vector<ScoredPassage> items;

  [[nodiscard]] std::size_t size() const noexcept { return items.size(); }
  [[nodiscard]] bool empty() const noexcept { return items.empty(); }

  /// 1-based rank of `id`, or 0 when absent.
  [[nodiscard]] std::size_t rank_of(const std::string& id) const noexcept;

  friend bool operator==(const RankedResult&, const RankedResult&) = default;
};

/// Sorts by (score desc, id asc) and keeps the first `k`.
RankedResult make_ranking(std::vector<ScoredPassage> scored, std::size_t k);

/// Ranks a full score map.
RankedResult make_ranking(const ScoreMap& scores, std::size_t k);

Qrels qrels_of(std::span<const Query> queries);

}  // namespace liri
