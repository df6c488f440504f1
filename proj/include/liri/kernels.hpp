#pragma once

/** \file kernels.hpp
 *  \brief Data-parallel inner loops of dense retrieval.
 *
 * Every kernel in liri::kernels has a serial twin in liri::kernels::reference
 * with identical semantics. The parallel versions split work over independent
 * outputs only (no cross-thread reductions), so their results are
 * bit-identical to the references; tests and bench/ compare the two.
 *
 * Kernels skip argument validation; callers in dense.cpp check shapes.
 */

#include <cstdint>
#include <span>
#include <vector>

#include "liri/encoder.hpp"

namespace liri::kernels {

double sim(std::span<const float> u, std::span<const float> v, Similarity mode) noexcept;

/// Squared Euclidean distance.
double l2sq(std::span<const float> u, std::span<const float> v) noexcept;

/// Sum over query rows of the best passage-row similarity. `p` must be non-empty.
double summaxsim(const TokenMatrix& q, const TokenMatrix& p, Similarity mode) noexcept;

/// out[i] = summaxsim(q, passages[candidates[i]]).
void score_passages(const TokenMatrix& q, std::span<const TokenMatrix> passages,
                    std::span<const std::uint32_t> candidates, Similarity mode,
                    std::span<double> out);

/// For each query row r: indices of the k most similar entries among
/// subsets[r] (all entries when subsets is empty). Ties favour lower index.
std::vector<std::vector<std::uint32_t>> nearest_entries(
    const TokenMatrix& q, std::span<const float> entries, std::uint32_t dim,
    std::span<const std::vector<std::uint32_t>> subsets, std::size_t k, Similarity mode);

/// out[i] = index of the centroid closest (squared L2) to vectors[i]; ties favour lower index.
void assign_nearest(std::span<const float> vectors, std::span<const float> centroids,
                    std::uint32_t dim, std::span<std::uint32_t> out);

namespace reference {

void score_passages(const TokenMatrix& q, std::span<const TokenMatrix> passages,
                    std::span<const std::uint32_t> candidates, Similarity mode,
                    std::span<double> out);

std::vector<std::vector<std::uint32_t>> nearest_entries(
    const TokenMatrix& q, std::span<const float> entries, std::uint32_t dim,
    std::span<const std::vector<std::uint32_t>> subsets, std::size_t k, Similarity mode);

void assign_nearest(std::span<const float> vectors, std::span<const float> centroids,
                    std::uint32_t dim, std::span<std::uint32_t> out);

}  // namespace reference

/// Pins the OpenMP thread count for the lifetime of the guard.
class ScopedThreads {
 public:
  explicit ScopedThreads(int n);
  ~ScopedThreads();
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  int previous_;
};

int max_threads() noexcept;

}  // namespace liri::kernels
