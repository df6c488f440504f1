#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double bm25(const std::vector<std::vector<std::string>>& docs,
                   const std::vector<std::string>& query, std::size_t doc, double k1, double b) {
  const double n = static_cast<double>(docs.size());
  double total_len = 0.0;
  for (const auto& d : docs) total_len += static_cast<double>(d.size());
  const double avgdl = total_len / n;
  const double dl = static_cast<double>(docs[doc].size());
  double score = 0.0;
  for (const auto& t : query) {
    double df = 0.0;
    for (const auto& d : docs) {
      if (std::find(d.begin(), d.end(), t) != d.end()) df += 1.0;
    }
    const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), t));
    if (tf == 0.0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    const double norm = avgdl > 0.0 ? dl / avgdl : 0.0;
    score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
  }
  return score;
}

inline double sim(const std::vector<double>& u, const std::vector<double>& v, bool dot) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    acc += dot ? u[i] * v[i] : -(u[i] - v[i]) * (u[i] - v[i]);
  }
  return acc;
}

inline double summaxsim(const Matrix& q, const Matrix& p, bool dot) {
  double total = 0.0;
  for (const auto& qi : q) {
    double best = -INFINITY;
    for (const auto& pj : p) best = std::max(best, sim(qi, pj, dot));
    total += best;
  }
  return total;
}

/// Rows of a row-major table (double) selected by bucket.
inline Matrix gather(const std::vector<double>& table, std::size_t dim,
                     const std::vector<std::uint32_t>& buckets) {
  Matrix m;
  for (auto b : buckets) {
    m.emplace_back(table.begin() + static_cast<std::ptrdiff_t>(b * dim),
                   table.begin() + static_cast<std::ptrdiff_t>((b + 1) * dim));
  }
  return m;
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double triple_loss(const std::vector<double>& table, std::size_t dim,
                          const std::vector<std::uint32_t>& q, const std::vector<std::uint32_t>& pos,
                          const std::vector<std::uint32_t>& neg, bool dot) {
  auto Q = gather(table, dim, q);
  return softplus(summaxsim(Q, gather(table, dim, neg), dot) - summaxsim(Q, gather(table, dim, pos), dot));
}

/// Central differences of triple_loss over every table entry.
inline std::vector<double> fd_gradient(std::vector<double> table, std::size_t dim,
                                       const std::vector<std::uint32_t>& q,
                                       const std::vector<std::uint32_t>& pos,
                                       const std::vector<std::uint32_t>& neg, bool dot,
                                       double eps) {
  std::vector<double> g(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double x = table[i];
    table[i] = x + eps;
    const double up = triple_loss(table, dim, q, pos, neg, dot);
    table[i] = x - eps;
    const double down = triple_loss(table, dim, q, pos, neg, dot);
    table[i] = x;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// Smallest gap between the best and second best similarity over every
/// (query row, passage) pair; FD is reliable only when this exceeds ~eps.
inline double argmax_margin(const std::vector<double>& table, std::size_t dim,
                            const std::vector<std::uint32_t>& q,
                            const std::vector<std::vector<std::uint32_t>>& passages, bool dot) {
  double margin = INFINITY;
  for (const auto& p : passages) {
    auto P = gather(table, dim, p);
    for (const auto& qi : gather(table, dim, q)) {
      std::vector<double> s;
      for (std::size_t j = 0; j < P.size(); ++j) {
        // Rows from the same bucket are identical and never a real tie.
        bool dup = false;
        for (std::size_t k = 0; k < j; ++k) dup = dup || p[k] == p[j];
        if (!dup) s.push_back(sim(qi, P[j], dot));
      }
      std::sort(s.rbegin(), s.rend());
      if (s.size() > 1) margin = std::min(margin, s[0] - s[1]);
    }
  }
  return margin;
}

/// Passages ranked strictly above `gold` within the first m, or all m when gold is absent.
inline std::set<std::string> expected_negatives(const std::vector<std::string>& ranking,
                                                const std::string& gold, std::size_t m) {
  std::set<std::string> out;
  for (std::size_t i = 0; i < std::min(m, ranking.size()); ++i) {
    if (ranking[i] == gold) return out;
    out.insert(ranking[i]);
  }
  return out;
}

inline std::pair<double, double> mean_sample_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace oracle
