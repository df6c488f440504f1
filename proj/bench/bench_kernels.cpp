// Serial reference vs OpenMP kernels. The thread count is the benchmark argument.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "liri/kernels.hpp"

using namespace liri;

namespace {

TokenMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::uint32_t dim) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  TokenMatrix m;
  m.dim = dim;
  m.data.resize(rows * dim);
  for (auto& x : m.data) x = u(rng);
  m.bucket_ids.resize(rows);
  std::iota(m.bucket_ids.begin(), m.bucket_ids.end(), 0u);
  return m;
}

struct Corpus {
  TokenMatrix query;
  std::vector<TokenMatrix> passages;
  std::vector<std::uint32_t> candidates;
  TokenMatrix entries;
  TokenMatrix centroids;

  Corpus() {
    std::mt19937_64 rng(1);
    constexpr std::uint32_t dim = 32;
    query = random_matrix(rng, 32, dim);
    for (int i = 0; i < 2000; ++i) passages.push_back(random_matrix(rng, 1 + rng() % 64, dim));
    candidates.resize(passages.size());
    std::iota(candidates.begin(), candidates.end(), 0u);
    entries = random_matrix(rng, 20000, dim);
    centroids = random_matrix(rng, 141, dim);
  }
};

const Corpus& corpus() {
  static const Corpus c;
  return c;
}

void BM_score_passages_serial(benchmark::State& state) {
  const auto& c = corpus();
  std::vector<double> out(c.candidates.size());
  for (auto _ : state) {
    kernels::reference::score_passages(c.query, c.passages, c.candidates, Similarity::neg_l2, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_score_passages_omp(benchmark::State& state) {
  const auto& c = corpus();
  kernels::ScopedThreads threads(static_cast<int>(state.range(0)));
  std::vector<double> out(c.candidates.size());
  for (auto _ : state) {
    kernels::score_passages(c.query, c.passages, c.candidates, Similarity::neg_l2, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_nearest_entries_serial(benchmark::State& state) {
  const auto& c = corpus();
  std::vector<std::vector<std::uint32_t>> all;
  for (auto _ : state) {
    auto r = kernels::reference::nearest_entries(c.query, c.entries.data, 32, all, 8, Similarity::neg_l2);
    benchmark::DoNotOptimize(r.data());
  }
}

void BM_nearest_entries_omp(benchmark::State& state) {
  const auto& c = corpus();
  kernels::ScopedThreads threads(static_cast<int>(state.range(0)));
  std::vector<std::vector<std::uint32_t>> all;
  for (auto _ : state) {
    auto r = kernels::nearest_entries(c.query, c.entries.data, 32, all, 8, Similarity::neg_l2);
    benchmark::DoNotOptimize(r.data());
  }
}

void BM_assign_nearest_serial(benchmark::State& state) {
  const auto& c = corpus();
  std::vector<std::uint32_t> out(c.entries.rows());
  for (auto _ : state) {
    kernels::reference::assign_nearest(c.entries.data, c.centroids.data, 32, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_assign_nearest_omp(benchmark::State& state) {
  const auto& c = corpus();
  kernels::ScopedThreads threads(static_cast<int>(state.range(0)));
  std::vector<std::uint32_t> out(c.entries.rows());
  for (auto _ : state) {
    kernels::assign_nearest(c.entries.data, c.centroids.data, 32, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_score_passages_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_score_passages_omp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_nearest_entries_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_nearest_entries_omp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assign_nearest_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assign_nearest_omp)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
