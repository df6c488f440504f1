#include "liri/kernels.hpp"

#include <algorithm>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace liri::kernels {

namespace {

// Below this many units of work the OpenMP fork costs more than it saves.
constexpr std::size_t kMinParallelWork = 1u << 14;

struct Candidate {
  double score;
  std::uint32_t index;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

std::vector<std::uint32_t> top_k_for_row(std::span<const float> row,
                                         std::span<const float> entries, std::uint32_t dim,
                                         const std::vector<std::uint32_t>* subset, std::size_t k,
                                         Similarity mode) {
  std::vector<Candidate> heap;  // min-heap on `better`: worst kept candidate at front
  heap.reserve(k + 1);
  auto consider = [&](std::uint32_t idx) {
    Candidate c{sim(row, entries.subspan(static_cast<std::size_t>(idx) * dim, dim), mode), idx};
    if (heap.size() < k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  };
  if (subset != nullptr) {
    for (auto idx : *subset) consider(idx);
  } else {
    auto n = static_cast<std::uint32_t>(entries.size() / dim);
    for (std::uint32_t idx = 0; idx < n; ++idx) consider(idx);
  }
  std::sort(heap.begin(), heap.end(), better);
  std::vector<std::uint32_t> out;
  out.reserve(heap.size());
  for (const auto& c : heap) out.push_back(c.index);
  return out;
}

std::uint32_t nearest_centroid(std::span<const float> v, std::span<const float> centroids,
                               std::uint32_t dim) {
  auto c = static_cast<std::uint32_t>(centroids.size() / dim);
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t j = 0; j < c; ++j) {
    double d = l2sq(v, centroids.subspan(static_cast<std::size_t>(j) * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

double sim(std::span<const float> u, std::span<const float> v, Similarity mode) noexcept {
  double acc = 0.0;
  if (mode == Similarity::dot) {
    for (std::size_t d = 0; d < u.size(); ++d) acc += static_cast<double>(u[d]) * v[d];
    return acc;
  }
  return -l2sq(u, v);
}

double l2sq(std::span<const float> u, std::span<const float> v) noexcept {
  double acc = 0.0;
  for (std::size_t d = 0; d < u.size(); ++d) {
    double diff = static_cast<double>(u[d]) - static_cast<double>(v[d]);
    acc += diff * diff;
  }
  return acc;
}

double summaxsim(const TokenMatrix& q, const TokenMatrix& p, Similarity mode) noexcept {
  double total = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto qi = q.row(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.rows(); ++j) best = std::max(best, sim(qi, p.row(j), mode));
    total += best;
  }
  return total;
}

void score_passages(const TokenMatrix& q, std::span<const TokenMatrix> passages,
                    std::span<const std::uint32_t> candidates, Similarity mode,
                    std::span<double> out) {
  const auto n = static_cast<std::int64_t>(candidates.size());
  [[maybe_unused]] const std::size_t work = candidates.size() * q.rows() * q.dim * 16;
#pragma omp parallel for schedule(dynamic, 16) if (work >= kMinParallelWork)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        summaxsim(q, passages[candidates[static_cast<std::size_t>(i)]], mode);
  }
}

std::vector<std::vector<std::uint32_t>> nearest_entries(
    const TokenMatrix& q, std::span<const float> entries, std::uint32_t dim,
    std::span<const std::vector<std::uint32_t>> subsets, std::size_t k, Similarity mode) {
  std::vector<std::vector<std::uint32_t>> out(q.rows());
  const auto rows = static_cast<std::int64_t>(q.rows());
  [[maybe_unused]] const std::size_t work = q.rows() * entries.size();
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (std::int64_t r = 0; r < rows; ++r) {
    auto ri = static_cast<std::size_t>(r);
    out[ri] = top_k_for_row(q.row(ri), entries, dim, subsets.empty() ? nullptr : &subsets[ri], k,
                            mode);
  }
  return out;
}

void assign_nearest(std::span<const float> vectors, std::span<const float> centroids,
                    std::uint32_t dim, std::span<std::uint32_t> out) {
  const auto n = static_cast<std::int64_t>(vectors.size() / dim);
  [[maybe_unused]] const std::size_t work = vectors.size() * (centroids.size() / dim);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (std::int64_t i = 0; i < n; ++i) {
    auto ii = static_cast<std::size_t>(i);
    out[ii] = nearest_centroid(vectors.subspan(ii * dim, dim), centroids, dim);
  }
}

namespace reference {

void score_passages(const TokenMatrix& q, std::span<const TokenMatrix> passages,
                    std::span<const std::uint32_t> candidates, Similarity mode,
                    std::span<double> out) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out[i] = kernels::summaxsim(q, passages[candidates[i]], mode);
  }
}

std::vector<std::vector<std::uint32_t>> nearest_entries(
    const TokenMatrix& q, std::span<const float> entries, std::uint32_t dim,
    std::span<const std::vector<std::uint32_t>> subsets, std::size_t k, Similarity mode) {
  std::vector<std::vector<std::uint32_t>> out(q.rows());
  for (std::size_t r = 0; r < q.rows(); ++r) {
    out[r] = top_k_for_row(q.row(r), entries, dim, subsets.empty() ? nullptr : &subsets[r], k,
                           mode);
  }
  return out;
}

void assign_nearest(std::span<const float> vectors, std::span<const float> centroids,
                    std::uint32_t dim, std::span<std::uint32_t> out) {
  for (std::size_t i = 0; i < vectors.size() / dim; ++i) {
    out[i] = nearest_centroid(vectors.subspan(i * dim, dim), centroids, dim);
  }
}

}  // namespace reference

ScopedThreads::ScopedThreads(int n) : previous_(max_threads()) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

ScopedThreads::~ScopedThreads() {
#ifdef _OPENMP
  omp_set_num_threads(previous_);
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace liri::kernels
