#include "liri/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "liri/error.hpp"
#include "liri/io.hpp"
#include "liri/kernels.hpp"
#include "liri/random.hpp"
#include "liri/serialize_util.hpp"

namespace liri {

double sim(std::span<const float> u, std::span<const float> v, Similarity mode) {
  if (u.size() != v.size()) {
    throw Error(Errc::dimension_mismatch, "sim: dimension mismatch (" + std::to_string(u.size()) +
                                              " vs " + std::to_string(v.size()) + ")");
  }
  return kernels::sim(u, v, mode);
}

double summaxsim(const TokenMatrix& q, const TokenMatrix& p, Similarity mode) {
  if (p.empty()) throw Error(Errc::empty_passage, "summaxsim: empty passage");
  if (!q.empty() && q.dim != p.dim) {
    throw Error(Errc::dimension_mismatch, "summaxsim: dimension mismatch");
  }
  return kernels::summaxsim(q, p, mode);
}

double single_vector_score(std::span<const double> qv, std::span<const double> pv) {
  if (qv.size() != pv.size()) {
    throw Error(Errc::dimension_mismatch, "single_vector_score: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t d = 0; d < qv.size(); ++d) acc += qv[d] * pv[d];
  return acc;
}

KMeansResult kmeans(std::span<const float> vectors, std::uint32_t dim, std::uint32_t k,
                    std::uint64_t seed, int max_iters, std::stop_token stop) {
  const auto n = static_cast<std::uint32_t>(vectors.size() / dim);
  if (k == 0 || k > n) {
    throw Error(Errc::invalid_argument, "kmeans: " + std::to_string(k) +
                                            " clusters requested for " + std::to_string(n) +
                                            " vectors");
  }
  KMeansResult res;
  res.centroids.resize(static_cast<std::size_t>(k) * dim);
  res.assignments.assign(n, 0);

  Rng rng(seed);
  auto init = sample_indices(rng, n, k);
  for (std::uint32_t c = 0; c < k; ++c) {
    std::copy_n(vectors.begin() + static_cast<std::ptrdiff_t>(init[c]) * dim, dim,
                res.centroids.begin() + static_cast<std::ptrdiff_t>(c) * dim);
  }

  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<std::uint32_t> counts(k);
  for (int it = 0; it < max_iters; ++it) {
    if (stop.stop_requested()) throw Error(Errc::cancelled, "kmeans: cancelled");
    res.iterations = it + 1;
    kernels::assign_nearest(vectors, res.centroids, dim, res.assignments);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0u);
    for (std::uint32_t i = 0; i < n; ++i) {
      auto c = res.assignments[i];
      ++counts[c];
      for (std::uint32_t d = 0; d < dim; ++d) {
        sums[static_cast<std::size_t>(c) * dim + d] += vectors[static_cast<std::size_t>(i) * dim + d];
      }
    }

    std::vector<float> next(res.centroids.size());
    std::vector<bool> taken(n, false);
    for (std::uint32_t c = 0; c < k; ++c) {
      auto dst = std::span<float>(next).subspan(static_cast<std::size_t>(c) * dim, dim);
      if (counts[c] > 0) {
        for (std::uint32_t d = 0; d < dim; ++d) {
          dst[d] = static_cast<float>(sums[static_cast<std::size_t>(c) * dim + d] / counts[c]);
        }
        continue;
      }
      // Empty cluster: reseed from the row farthest from its current centroid.
      double far_d = -1.0;
      std::uint32_t far_i = 0;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        auto a = res.assignments[i];
        double dd = kernels::l2sq(vectors.subspan(static_cast<std::size_t>(i) * dim, dim),
                                  std::span<const float>(res.centroids)
                                      .subspan(static_cast<std::size_t>(a) * dim, dim));
        if (dd > far_d) {
          far_d = dd;
          far_i = i;
        }
      }
      taken[far_i] = true;
      std::copy_n(vectors.begin() + static_cast<std::ptrdiff_t>(far_i) * dim, dim, dst.begin());
    }

    double max_move = 0.0;
    for (std::uint32_t c = 0; c < k; ++c) {
      auto off = static_cast<std::size_t>(c) * dim;
      max_move = std::max(max_move, std::sqrt(kernels::l2sq(
                                        std::span<const float>(next).subspan(off, dim),
                                        std::span<const float>(res.centroids).subspan(off, dim))));
    }
    res.centroids = std::move(next);
    if (max_move < 1e-6) break;
  }
  kernels::assign_nearest(vectors, res.centroids, dim, res.assignments);
  return res;
}

namespace {

IvfLists make_ivf(std::span<const float> entries, std::uint32_t dim, std::uint32_t clusters,
                  std::uint64_t seed, std::stop_token stop) {
  auto km = kmeans(entries, dim, clusters, seed, 25, std::move(stop));
  IvfLists ivf;
  ivf.centroids = std::move(km.centroids);
  ivf.assignments = std::move(km.assignments);
  ivf.lists.resize(clusters);
  for (std::uint32_t i = 0; i < ivf.assignments.size(); ++i) ivf.lists[ivf.assignments[i]].push_back(i);
  return ivf;
}

std::uint32_t resolve_clusters(std::uint32_t requested, std::size_t n_entries) {
  if (requested != 0) return requested;
  auto c = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(n_entries))));
  return std::max<std::uint32_t>(1, c);
}

void require_fresh(const TokenVectorIndex& index, const EncoderParams& params) {
  if (index.built_from_version != params.version) {
    throw Error(Errc::stale_index, "stale index: built from checkpoint version " +
                                       std::to_string(index.built_from_version) +
                                       ", searching with version " +
                                       std::to_string(params.version) + "; refresh the index");
  }
  if (index.config.dim != params.config.dim) {
    throw Error(Errc::dimension_mismatch, "index and checkpoint dimensions differ");
  }
}

std::vector<TokenizedPassage> tokenize_all(std::span<const Passage> passages,
                                           const TokenizerConfig& tokenizer) {
  std::vector<TokenizedPassage> out;
  out.reserve(passages.size());
  for (const auto& p : passages) out.push_back({p.id, tokenize(tokenizer, p.text)});
  return out;
}

}  // namespace

TokenVectorIndex build_token_index(const EncoderParams& params,
                                   std::span<const TokenizedPassage> passages,
                                   TokenizerConfig tokenizer, const IndexBuildOptions& options) {
  if (passages.empty()) throw Error(Errc::empty_corpus, "token index: empty corpus");
  const auto dim = params.config.dim;

  TokenVectorIndex index;
  index.built_from_version = params.version;
  index.config = params.config;
  index.tokenizer = std::move(tokenizer);
  index.seed = options.seed;

  std::unordered_set<std::string> seen;
  for (std::uint32_t p = 0; p < passages.size(); ++p) {
    if (options.stop.stop_requested()) throw Error(Errc::cancelled, "token index: cancelled");
    const auto& tp = passages[p];
    if (!seen.insert(tp.id).second) {
      throw Error(Errc::duplicate_id, "token index: duplicate passage id '" + tp.id + "'");
    }
    auto m = encode(params, tp.tokens, Role::doc);
    if (m.empty()) {
      throw Error(Errc::empty_passage, "token index: passage '" + tp.id + "' has no tokens");
    }
    for (std::uint32_t off = 0; off < m.rows(); ++off) {
      auto r = m.row(off);
      index.entries.insert(index.entries.end(), r.begin(), r.end());
      index.entry_passage.push_back(p);
      index.entry_offset.push_back(off);
    }
    index.pooled.push_back(mean_pool(m));
    index.passage_ids.push_back(tp.id);
    index.passage_matrices.push_back(std::move(m));
  }

  if (options.ivf_clusters) {
    auto clusters = resolve_clusters(*options.ivf_clusters, index.n_entries());
    if (clusters > index.n_entries()) {
      throw Error(Errc::invalid_argument,
                  "token index: ivf_clusters " + std::to_string(clusters) + " exceeds token count " +
                      std::to_string(index.n_entries()));
    }
    index.ivf = make_ivf(index.entries, dim, clusters, options.seed, options.stop);
  }
  return index;
}

TokenVectorIndex build_token_index(const EncoderParams& params, std::span<const Passage> passages,
                                   const TokenizerConfig& tokenizer,
                                   const IndexBuildOptions& options) {
  auto tp = tokenize_all(passages, tokenizer);
  return build_token_index(params, tp, tokenizer, options);
}

TokenVectorIndex refresh_index(const EncoderParams& params,
                               std::span<const TokenizedPassage> passages,
                               const TokenVectorIndex& prev, std::stop_token stop) {
  IndexBuildOptions opts;
  opts.seed = prev.seed;
  opts.stop = std::move(stop);
  if (prev.ivf) opts.ivf_clusters = prev.ivf->clusters(prev.config.dim);
  return build_token_index(params, passages, prev.tokenizer, opts);
}

TokenVectorIndex refresh_index(const EncoderParams& params, std::span<const Passage> passages,
                               const TokenVectorIndex& prev, std::stop_token stop) {
  auto tp = tokenize_all(passages, prev.tokenizer);
  return refresh_index(params, tp, prev, std::move(stop));
}

std::vector<std::uint32_t> ann_candidate_positions(const TokenVectorIndex& index,
                                                   const TokenMatrix& q, std::size_t k_tok,
                                                   std::size_t nprobe) {
  if (k_tok == 0) throw Error(Errc::invalid_argument, "ann: k_tok must be >= 1");
  if (q.empty() || index.n_entries() == 0) return {};
  const auto dim = index.config.dim;
  if (q.dim != dim) throw Error(Errc::dimension_mismatch, "ann: query dimension mismatch");

  std::vector<std::vector<std::uint32_t>> subsets;
  if (index.ivf) {
    if (nprobe == 0) throw Error(Errc::invalid_argument, "ann: nprobe must be >= 1");
    const auto& ivf = *index.ivf;
    const auto clusters = ivf.clusters(dim);
    std::vector<std::uint32_t> probe_all;
    subsets.resize(q.rows());
    std::vector<std::pair<double, std::uint32_t>> order(clusters);
    for (std::size_t r = 0; r < q.rows(); ++r) {
      for (std::uint32_t c = 0; c < clusters; ++c) {
        order[c] = {kernels::l2sq(q.row(r), std::span<const float>(ivf.centroids)
                                                 .subspan(static_cast<std::size_t>(c) * dim, dim)),
                    c};
      }
      auto probe = std::min<std::size_t>(nprobe, clusters);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(probe),
                        order.end());
      auto& subset = subsets[r];
      for (std::size_t i = 0; i < probe; ++i) {
        const auto& list = ivf.lists[order[i].second];
        subset.insert(subset.end(), list.begin(), list.end());
      }
      std::sort(subset.begin(), subset.end());
    }
  }

  auto hits = kernels::nearest_entries(q, index.entries, dim, subsets, k_tok,
                                       index.config.similarity);
  std::vector<bool> mark(index.n_passages(), false);
  for (const auto& row_hits : hits) {
    for (auto e : row_hits) mark[index.entry_passage[e]] = true;
  }
  std::vector<std::uint32_t> out;
  for (std::uint32_t p = 0; p < mark.size(); ++p) {
    if (mark[p]) out.push_back(p);
  }
  return out;
}

std::set<std::string> ann_candidates(const TokenVectorIndex& index, const TokenMatrix& q,
                                     std::size_t k_tok, std::size_t nprobe) {
  std::set<std::string> out;
  for (auto p : ann_candidate_positions(index, q, k_tok, nprobe)) out.insert(index.passage_ids[p]);
  return out;
}

std::vector<double> dense_score_all_tokens(const TokenVectorIndex& index,
                                           const EncoderParams& params, const TokenSeq& query,
                                           DenseMode mode) {
  require_fresh(index, params);
  std::vector<double> scores(index.n_passages(), 0.0);
  if (mode == DenseMode::single_vector) {
    auto qv = encode_single(params, query, Role::query);
    for (std::size_t p = 0; p < scores.size(); ++p) scores[p] = single_vector_score(qv, index.pooled[p]);
    return scores;
  }
  auto q = encode(params, query, Role::query);
  std::vector<std::uint32_t> all(index.n_passages());
  for (std::uint32_t p = 0; p < all.size(); ++p) all[p] = p;
  kernels::score_passages(q, index.passage_matrices, all, index.config.similarity, scores);
  return scores;
}

ScoreMap dense_score_all(const TokenVectorIndex& index, const EncoderParams& params,
                         std::string_view query_text, DenseMode mode) {
  auto scores = dense_score_all_tokens(index, params, tokenize(index.tokenizer, query_text), mode);
  ScoreMap out;
  for (std::size_t p = 0; p < scores.size(); ++p) out.emplace(index.passage_ids[p], scores[p]);
  return out;
}

RankedResult dense_search_tokens(const TokenVectorIndex& index, const EncoderParams& params,
                                 const TokenSeq& query, const DenseSearchOptions& options) {
  require_fresh(index, params);
  if (options.k == 0) throw Error(Errc::invalid_argument, "dense_search: k must be >= 1");
  if (query.empty()) return {};

  std::vector<ScoredPassage> scored;
  if (options.mode == DenseMode::single_vector || options.exhaustive) {
    auto scores = dense_score_all_tokens(index, params, query, options.mode);
    scored.reserve(scores.size());
    for (std::size_t p = 0; p < scores.size(); ++p) scored.push_back({index.passage_ids[p], scores[p]});
    return make_ranking(std::move(scored), options.k);
  }

  auto q = encode(params, query, Role::query);
  auto candidates = ann_candidate_positions(index, q, options.k_tok, options.nprobe);
  std::vector<double> scores(candidates.size());
  kernels::score_passages(q, index.passage_matrices, candidates, index.config.similarity, scores);
  scored.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scored.push_back({index.passage_ids[candidates[i]], scores[i]});
  }
  return make_ranking(std::move(scored), options.k);
}

RankedResult dense_search(const TokenVectorIndex& index, const EncoderParams& params,
                          std::string_view query_text, const DenseSearchOptions& options) {
  return dense_search_tokens(index, params, tokenize(index.tokenizer, query_text), options);
}

void TokenVectorIndex::check() const {
  const auto dim = config.dim;
  auto fail = [](const std::string& what) { throw Error(Errc::malformed, "token index: " + what); };
  if (passage_matrices.size() != passage_ids.size() || pooled.size() != passage_ids.size()) {
    fail("passage table sizes differ");
  }
  if (entries.size() != n_entries() * dim || entry_offset.size() != n_entries()) {
    fail("entry table sizes differ");
  }
  for (std::size_t e = 0; e < n_entries(); ++e) {
    auto p = entry_passage[e];
    if (p >= n_passages() || entry_offset[e] >= passage_matrices[p].rows()) {
      fail("entry " + std::to_string(e) + " points outside its passage");
    }
  }
  if (ivf) {
    if (ivf->centroids.empty() || ivf->centroids.size() % dim != 0) fail("bad centroid table");
    if (ivf->assignments.size() != n_entries()) fail("ivf assignment count differs from entries");
    for (auto a : ivf->assignments) {
      if (a >= ivf->clusters(dim)) fail("ivf assignment out of range");
    }
  }
}

bool operator==(const TokenVectorIndex& a, const TokenVectorIndex& b) {
  auto ivf_eq = [&]() {
    if (a.ivf.has_value() != b.ivf.has_value()) return false;
    if (!a.ivf) return true;
    return a.ivf->centroids == b.ivf->centroids && a.ivf->assignments == b.ivf->assignments &&
           a.ivf->lists == b.ivf->lists;
  };
  return a.built_from_version == b.built_from_version && a.config == b.config &&
         a.tokenizer == b.tokenizer && a.seed == b.seed && a.passage_ids == b.passage_ids &&
         a.passage_matrices == b.passage_matrices && a.pooled == b.pooled &&
         a.entries == b.entries && a.entry_passage == b.entry_passage &&
         a.entry_offset == b.entry_offset && ivf_eq();
}

std::string TokenVectorIndex::serialize() const {
  const auto dim = config.dim;
  io::BinaryWriter w;
  w.magic(kMagic);
  w.u64(built_from_version);
  w.u32(dim);
  w.u32(config.buckets);
  w.u32(config.query_maxlen);
  w.u32(config.doc_maxlen);
  w.u8(static_cast<std::uint8_t>(config.similarity));
  w.u64(config.hash_seed);
  w.u64(seed);
  w.u32(static_cast<std::uint32_t>(n_passages()));
  w.u64(n_entries());
  w.u8(ivf ? 1 : 0);
  w.u32(ivf ? ivf->clusters(dim) : 0);
  detail::write_tokenizer(w, tokenizer);
  for (std::size_t p = 0; p < n_passages(); ++p) {
    w.str(passage_ids[p]);
    w.u32(static_cast<std::uint32_t>(passage_matrices[p].rows()));
    w.u32s(passage_matrices[p].bucket_ids);
  }
  w.f32s(entries);
  w.u32s(entry_passage);
  w.u32s(entry_offset);
  if (ivf) {
    w.f32s(ivf->centroids);
    w.u32s(ivf->assignments);
  }
  return w.take();
}

TokenVectorIndex TokenVectorIndex::deserialize(std::string_view bytes) {
  io::BinaryReader r(bytes, "token index");
  r.expect_magic(kMagic);
  TokenVectorIndex index;
  index.built_from_version = r.u64();
  auto& c = index.config;
  c.dim = r.u32();
  c.buckets = r.u32();
  c.query_maxlen = r.u32();
  c.doc_maxlen = r.u32();
  auto sim_tag = r.u8();
  if (sim_tag > 1) throw Error(Errc::malformed, "token index: bad similarity tag");
  c.similarity = static_cast<Similarity>(sim_tag);
  c.hash_seed = r.u64();
  c.validate();
  index.seed = r.u64();
  auto n_pass = r.u32();
  auto n_ent = r.u64();
  auto has_ivf = r.u8();
  auto clusters = r.u32();
  index.tokenizer = detail::read_tokenizer(r);
  const auto dim = c.dim;

  index.passage_ids.resize(n_pass);
  index.passage_matrices.resize(n_pass);
  std::vector<std::uint32_t> row_counts(n_pass);
  for (std::uint32_t p = 0; p < n_pass; ++p) {
    index.passage_ids[p] = r.str();
    row_counts[p] = r.u32();
    if (static_cast<std::size_t>(row_counts[p]) * 4 > r.remaining()) {
      throw Error(Errc::truncated, "token index: truncated passage table");
    }
    auto& m = index.passage_matrices[p];
    m.dim = dim;
    m.bucket_ids.resize(row_counts[p]);
    r.u32s(m.bucket_ids);
    m.data.resize(static_cast<std::size_t>(row_counts[p]) * dim);
  }
  std::uint64_t total_rows = 0;
  for (auto rc : row_counts) total_rows += rc;
  if (total_rows != n_ent) throw Error(Errc::malformed, "token index: entry count differs from token count");
  if (n_ent * (4ull * dim + 8) > r.remaining()) {
    throw Error(Errc::truncated, "token index: truncated entry table");
  }
  index.entries.resize(n_ent * dim);
  index.entry_passage.resize(n_ent);
  index.entry_offset.resize(n_ent);
  r.f32s(index.entries);
  r.u32s(index.entry_passage);
  r.u32s(index.entry_offset);
  if (has_ivf > 1) throw Error(Errc::malformed, "token index: bad ivf flag");
  if (has_ivf == 1) {
    IvfLists ivf;
    ivf.centroids.resize(static_cast<std::size_t>(clusters) * dim);
    ivf.assignments.resize(n_ent);
    r.f32s(ivf.centroids);
    r.u32s(ivf.assignments);
    ivf.lists.resize(clusters);
    for (std::uint32_t e = 0; e < n_ent; ++e) {
      if (ivf.assignments[e] >= clusters) throw Error(Errc::malformed, "token index: bad assignment");
      ivf.lists[ivf.assignments[e]].push_back(e);
    }
    index.ivf = std::move(ivf);
  }
  r.expect_end();

  for (std::size_t e = 0; e < n_ent; ++e) {
    auto p = index.entry_passage[e];
    auto off = index.entry_offset[e];
    if (p >= n_pass || off >= row_counts[p]) {
      throw Error(Errc::malformed, "token index: entry " + std::to_string(e) + " out of range");
    }
    std::copy_n(index.entries.begin() + static_cast<std::ptrdiff_t>(e * dim), dim,
                index.passage_matrices[p].data.begin() + static_cast<std::ptrdiff_t>(off) * dim);
  }
  for (float v : index.entries) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "token index: non-finite entry");
  }
  for (const auto& m : index.passage_matrices) {
    if (m.empty()) throw Error(Errc::malformed, "token index: passage without tokens");
    index.pooled.push_back(mean_pool(m));
  }
  index.check();
  return index;
}

void TokenVectorIndex::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, serialize());
}

TokenVectorIndex TokenVectorIndex::load(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

}  // namespace liri
