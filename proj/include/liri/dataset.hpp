#pragma once

/** \file dataset.hpp
 *  \brief Dataset files and the synthetic FAQ generator.
 *
 * On disk a dataset is a directory:
 *
 *     corpus.jsonl        {"id": ..., "text": ...} per line
 *     train_queries.tsv   query_id <TAB> text
 *     train_qrels.tsv     query_id <TAB> passage_id
 *     test_queries.tsv
 *     test_qrels.tsv
 *     meta.json           {"name", "n_passages", "n_train_queries", "n_test_queries"}
 *
 * Query text escapes backslash, tab, CR and LF as \\, \t, \r, \n.
 */

#include <cstdint>
#include <filesystem>
#include <string>

#include "liri/types.hpp"

namespace liri {

struct SynthConfig {
  std::string name = "synthetic";
  std::uint32_t n_passages = 50;
  std::uint32_t keywords_per_passage = 6;
  std::uint32_t filler_per_passage = 8;
  std::uint32_t shared_vocab_size = 120;
  std::uint32_t keywords_per_query = 3;
  std::uint32_t queries_per_passage = 3;       // training pool
  std::uint32_t test_queries_per_passage = 2;  // held out
  double paraphrase_noise = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Passages get disjoint keyword sets plus shared filler words. A query picks
/// keywords of its passage; each slot, with probability paraphrase_noise,
/// becomes noise instead: the keyword's fixed paraphrase (a word no passage
/// contains) or a random filler word. At least one true keyword always
/// survives, so the gold passage is the unique keyword-overlap maximizer;
/// this is audited before returning.
Dataset generate_synthetic(const SynthConfig& config);

/// Throws Errc::malformed if some query's gold is not the unique passage
/// with the largest keyword overlap. `keywords` maps passage id -> keyword set.
void audit_separability(const Dataset& dataset,
                        const std::map<std::string, std::vector<std::string>>& keywords);

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Throws Errc::empty_corpus, Errc::duplicate_id, Errc::dangling_gold or
/// Errc::malformed, with file name and line number.
Dataset load_dataset(const std::filesystem::path& dir);

std::string escape_field(std::string_view s);
std::string unescape_field(std::string_view s);

}  // namespace liri
