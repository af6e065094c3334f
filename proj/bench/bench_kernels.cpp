#include <benchmark/benchmark.h>

#include <map>

#include "corml/kernels.hpp"
#include "corml/sparse.hpp"
#include "synthetic.hpp"

namespace {

using namespace corml;

const InteractionMatrix& data(Index users, Index items) {
  static std::map<std::pair<Index, Index>, InteractionMatrix> cache;
  auto it = cache.find({users, items});
  if (it == cache.end()) {
    it = cache.emplace(std::pair{users, items},
                       testing::random_interactions(users, items, 0.02, 11)).first;
  }
  return it->second;
}

DenseMatrix dense_block(Index rows, Index cols) {
  return DenseMatrix::Random(rows, cols);
}

template <bool Parallel>
void BM_spmm(benchmark::State& state) {
  const auto& r = data(static_cast<Index>(state.range(0)), static_cast<Index>(state.range(1)));
  const DenseMatrix b = dense_block(r.n_items(), 64);
  for (auto _ : state) {
    DenseMatrix y = Parallel ? kernels::omp::spmm(r.csr(), b) : kernels::serial::spmm(r.csr(), b);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_spmm_transpose(benchmark::State& state) {
  const auto& r = data(static_cast<Index>(state.range(0)), static_cast<Index>(state.range(1)));
  const DenseMatrix b = dense_block(r.n_users(), 64);
  for (auto _ : state) {
    DenseMatrix y = Parallel ? kernels::omp::spmm_transpose(r.csc(), b)
                             : kernels::serial::spmm_transpose(r.csr(), b);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_gram(benchmark::State& state) {
  const auto& r = data(static_cast<Index>(state.range(0)), static_cast<Index>(state.range(1)));
  const std::vector<double> scale(r.n_users(), 1.0);
  for (auto _ : state) {
    DenseMatrix g = Parallel ? kernels::omp::gram(r.csr(), r.csc(), scale)
                             : kernels::serial::gram(r.csr(), scale);
    benchmark::DoNotOptimize(g.data());
  }
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const DenseMatrix a = dense_block(n, n);
  const DenseMatrix b = dense_block(n, n);
  for (auto _ : state) {
    DenseMatrix c = Parallel ? kernels::omp::gemm(a, b) : kernels::serial::gemm(a, b);
    benchmark::DoNotOptimize(c.data());
  }
}

}  // namespace

BENCHMARK(BM_spmm<false>)->Args({4000, 1000});
BENCHMARK(BM_spmm<true>)->Args({4000, 1000});
BENCHMARK(BM_spmm_transpose<false>)->Args({4000, 1000});
BENCHMARK(BM_spmm_transpose<true>)->Args({4000, 1000});
BENCHMARK(BM_gram<false>)->Args({4000, 1000});
BENCHMARK(BM_gram<true>)->Args({4000, 1000});
BENCHMARK(BM_gemm<false>)->Arg(256);
BENCHMARK(BM_gemm<true>)->Arg(256);

BENCHMARK_MAIN();
