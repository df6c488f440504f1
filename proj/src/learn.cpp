#include "liri/learn.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "liri/error.hpp"
#include "liri/io.hpp"
#include "liri/kernels.hpp"

namespace liri {

double pairwise_loss(double s_pos, double s_neg) {
  if (!std::isfinite(s_pos) || !std::isfinite(s_neg)) {
    throw Error(Errc::non_finite, "pairwise_loss: non-finite score");
  }
  double x = s_neg - s_pos;
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

std::span<double> SparseGradient::row(std::uint32_t bucket) {
  auto [it, inserted] = rows.try_emplace(bucket);
  if (inserted) it->second.assign(dim, 0.0);
  return it->second;
}

std::vector<double> SparseGradient::dense(std::uint32_t buckets) const {
  std::vector<double> out(static_cast<std::size_t>(buckets) * dim, 0.0);
  for (const auto& [b, g] : rows) {
    std::copy(g.begin(), g.end(), out.begin() + static_cast<std::ptrdiff_t>(b) * dim);
  }
  return out;
}

namespace {

struct MaxSimTrace {
  double score = 0.0;
  std::vector<std::size_t> argmax;  // per query row
};

MaxSimTrace trace_summaxsim(const EncoderParams& params, std::span<const std::uint32_t> query,
                            std::span<const std::uint32_t> passage) {
  const auto mode = params.config.similarity;
  MaxSimTrace t;
  t.argmax.resize(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    auto qi = params.row(query[i]);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < passage.size(); ++j) {
      double s = kernels::sim(qi, params.row(passage[j]), mode);
      if (s > best) {
        best = s;
        best_j = j;
      }
    }
    t.score += best;
    t.argmax[i] = best_j;
  }
  return t;
}

// Adds coeff * d S(q,p) / d table into grad, following the recorded argmaxes.
void backprop_summaxsim(const EncoderParams& params, std::span<const std::uint32_t> query,
                        std::span<const std::uint32_t> passage, const MaxSimTrace& trace,
                        double coeff, SparseGradient& grad) {
  const auto dim = params.config.dim;
  const bool dot = params.config.similarity == Similarity::dot;
  std::vector<double> dq(dim);
  std::vector<double> dp(dim);
  for (std::size_t i = 0; i < query.size(); ++i) {
    auto qb = query[i];
    auto pb = passage[trace.argmax[i]];
    auto q = params.row(qb);
    auto p = params.row(pb);
    for (std::uint32_t d = 0; d < dim; ++d) {
      if (dot) {
        dq[d] = coeff * p[d];
        dp[d] = coeff * q[d];
      } else {
        double diff = static_cast<double>(q[d]) - static_cast<double>(p[d]);
        dq[d] = -2.0 * coeff * diff;
        dp[d] = 2.0 * coeff * diff;
      }
    }
    auto gq = grad.row(qb);
    for (std::uint32_t d = 0; d < dim; ++d) gq[d] += dq[d];
    auto gp = grad.row(pb);
    for (std::uint32_t d = 0; d < dim; ++d) gp[d] += dp[d];
  }
}

}  // namespace

double triple_loss_grad(const EncoderParams& params, std::span<const std::uint32_t> query,
                        std::span<const std::uint32_t> pos, std::span<const std::uint32_t> neg,
                        double weight, SparseGradient* grad) {
  if (pos.empty() || neg.empty()) throw Error(Errc::empty_passage, "triple: empty passage");
  auto tp = trace_summaxsim(params, query, pos);
  auto tn = trace_summaxsim(params, query, neg);
  double loss = pairwise_loss(tp.score, tn.score);
  if (grad != nullptr) {
    // dL/ds_neg = sigmoid(s_neg - s_pos) = -dL/ds_pos
    double x = tn.score - tp.score;
    double g = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    grad->dim = params.config.dim;
    backprop_summaxsim(params, query, pos, tp, -g * weight, *grad);
    backprop_summaxsim(params, query, neg, tn, g * weight, *grad);
  }
  return loss;
}

TrainingSet::TrainingSet(std::span<const Passage> passages, std::span<const Query> queries,
                         const EncoderConfig& config, TokenizerConfig tokenizer)
    : config_(config), tokenizer_(std::move(tokenizer)) {
  config_.validate();
  if (passages.empty()) throw Error(Errc::empty_corpus, "training set: empty corpus");
  for (const auto& p : passages) {
    auto pos = static_cast<std::uint32_t>(passages_.size());
    if (!passage_lookup_.emplace(p.id, pos).second) {
      throw Error(Errc::duplicate_id, "training set: duplicate passage id '" + p.id + "'");
    }
    auto tokens = tokenize(tokenizer_, p.text);
    passage_buckets_.push_back(bucket_ids(config_, tokens, Role::doc));
    passage_ids_.push_back(p.id);
    passages_.push_back({p.id, std::move(tokens)});
  }
  for (const auto& q : queries) {
    auto pos = static_cast<std::uint32_t>(queries_.size());
    if (!query_lookup_.emplace(q.id, pos).second) {
      throw Error(Errc::duplicate_id, "training set: duplicate query id '" + q.id + "'");
    }
    if (!passage_lookup_.contains(q.gold)) {
      throw Error(Errc::dangling_gold,
                  "training set: query '" + q.id + "' has dangling gold '" + q.gold + "'");
    }
    auto tokens = tokenize(tokenizer_, q.text);
    query_buckets_.push_back(bucket_ids(config_, tokens, Role::query));
    query_tokens_.push_back(std::move(tokens));
    queries_.push_back(q);
    qrels_[q.id] = q.gold;
  }
}

std::uint32_t TrainingSet::passage_pos(const std::string& id) const {
  auto it = passage_lookup_.find(id);
  if (it == passage_lookup_.end()) {
    throw Error(Errc::unknown_id, "unknown passage id '" + id + "'");
  }
  return it->second;
}

std::uint32_t TrainingSet::query_pos(const std::string& id) const {
  auto it = query_lookup_.find(id);
  if (it == query_lookup_.end()) throw Error(Errc::unknown_id, "unknown query id '" + id + "'");
  return it->second;
}

TrainingSet::Resolved TrainingSet::resolve(const TrainingTriple& t) const {
  return {query_pos(t.query_id), passage_pos(t.pos_id), passage_pos(t.neg_id)};
}

double minibatch_loss_grad(const EncoderParams& params,
                           std::span<const TrainingSet::Resolved> batch, const TrainingSet& set,
                           SparseGradient* grad) {
  if (batch.empty()) throw Error(Errc::invalid_argument, "minibatch is empty");
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& t : batch) {
    total += triple_loss_grad(params, set.query_buckets(t.query), set.passage_buckets(t.pos),
                              set.passage_buckets(t.neg), w, grad);
  }
  return total * w;
}

double apply_step(EncoderParams& params, std::span<const TrainingSet::Resolved> batch,
                  const TrainingSet& set, double lr) {
  SparseGradient grad;
  grad.dim = params.config.dim;
  double loss = minibatch_loss_grad(params, batch, set, &grad);
  if (lr != 0.0) {
    for (const auto& [bucket, g] : grad.rows) {
      auto row = params.row(bucket);
      for (std::uint32_t d = 0; d < grad.dim; ++d) {
        row[d] = static_cast<float>(static_cast<double>(row[d]) - lr * g[d]);
      }
    }
  }
  ++params.version;
  return loss;
}

StepResult grad_step(const EncoderParams& params, std::span<const TrainingTriple> minibatch,
                     const TrainingSet& set, double lr) {
  std::vector<TrainingSet::Resolved> resolved;
  resolved.reserve(minibatch.size());
  for (const auto& t : minibatch) resolved.push_back(set.resolve(t));
  StepResult out{params, 0.0};
  out.mean_loss = apply_step(out.params, resolved, set, lr);
  return out;
}

TripleBatch curate_triples(const std::map<std::string, RankedResult>& rankings,
                           const Qrels& qrels, std::span<const std::string> corpus_ids,
                           std::size_t m, std::size_t r_rand, Rng& rng, std::uint64_t version) {
  if (m == 0) throw Error(Errc::invalid_argument, "curate_triples: m must be >= 1");
  TripleBatch batch;
  batch.curated_by_version = version;
  for (const auto& [qid, gold] : qrels) {
    auto it = rankings.find(qid);
    if (it == rankings.end()) {
      throw Error(Errc::unknown_id, "curate_triples: query '" + qid + "' missing from rankings");
    }
    const auto& items = it->second.items;
    const auto top = std::min(m, items.size());
    std::size_t gold_rank = 0;
    for (std::size_t r = 0; r < top; ++r) {
      if (items[r].id == gold) {
        gold_rank = r + 1;
        break;
      }
    }
    if (gold_rank == 1) {
      std::vector<const std::string*> pool;
      pool.reserve(corpus_ids.size());
      for (const auto& id : corpus_ids) {
        if (id != gold) pool.push_back(&id);
      }
      auto picks = sample_indices(rng, static_cast<std::uint32_t>(pool.size()),
                                  static_cast<std::uint32_t>(r_rand));
      for (auto p : picks) batch.triples.push_back({qid, gold, *pool[p]});
      continue;
    }
    const auto negatives = gold_rank == 0 ? top : gold_rank - 1;
    for (std::size_t r = 0; r < negatives; ++r) batch.triples.push_back({qid, gold, items[r].id});
  }
  return batch;
}

TripleBatch all_negatives_triples(std::span<const Query> queries,
                                  std::span<const std::string> corpus_ids) {
  TripleBatch batch;
  for (const auto& q : queries) {
    for (const auto& id : corpus_ids) {
      if (id != q.gold) batch.triples.push_back({q.id, q.gold, id});
    }
  }
  return batch;
}

TripleBatch bm25_guided_triples(const Bm25Index& bm25, std::span<const Query> queries,
                                std::size_t m, std::size_t r_rand, Rng& rng) {
  std::map<std::string, RankedResult> rankings;
  for (const auto& q : queries) rankings[q.id] = bm25.search(q.text, m);
  return curate_triples(rankings, qrels_of(queries), bm25.passage_ids(), m, r_rand, rng, 0);
}

std::string format_triples(const TripleBatch& batch) {
  std::string out;
  for (const auto& t : batch.triples) {
    out += t.query_id;
    out += '\t';
    out += t.pos_id;
    out += '\t';
    out += t.neg_id;
    out += '\n';
  }
  return out;
}

TripleBatch parse_triples(std::string_view contents) {
  TripleBatch batch;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    auto line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw Error(Errc::malformed, "triples: line " + std::to_string(line_no) +
                                       ": expected 3 tab-separated fields");
    }
    TrainingTriple t{std::string(line.substr(0, t1)), std::string(line.substr(t1 + 1, t2 - t1 - 1)),
                     std::string(line.substr(t2 + 1))};
    if (t.query_id.empty() || t.pos_id.empty() || t.neg_id.empty()) {
      throw Error(Errc::malformed, "triples: line " + std::to_string(line_no) + ": empty field");
    }
    if (t.pos_id == t.neg_id) {
      throw Error(Errc::malformed, "triples: line " + std::to_string(line_no) +
                                       ": positive and negative are both " + t.pos_id);
    }
    batch.triples.push_back(std::move(t));
  }
  return batch;
}

void save_triples(const TripleBatch& batch, const std::filesystem::path& path) {
  io::write_file_atomic(path, format_triples(batch));
}

}  // namespace liri
