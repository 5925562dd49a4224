#include <benchmark/benchmark.h>

#include <vector>

#include "ldoc/kernels.hpp"
#include "ldoc/rng.hpp"

namespace {

std::vector<double> random_matrix(std::size_t rows, std::size_t cols,
                                  std::uint64_t seed) {
  ldoc::Rng rng(seed);
  std::vector<double> m(rows * cols);
  for (double& v : m) v = rng.normal();
  return m;
}

void BM_matmul_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    ldoc::kernels::matmul_serial(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}

void BM_matmul_omp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    ldoc::kernels::matmul(a.data(), b.data(), c.data(), n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}

void BM_pairwise_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64;
  const auto pts = random_matrix(n, dim, 3);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    ldoc::kernels::pairwise_sq_dists_serial(pts.data(), out.data(), n, dim);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * dim));
}

void BM_pairwise_omp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64;
  const auto pts = random_matrix(n, dim, 3);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    ldoc::kernels::pairwise_sq_dists(pts.data(), out.data(), n, dim);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * dim));
}

}  // namespace

BENCHMARK(BM_matmul_serial)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_matmul_omp)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_pairwise_serial)->Arg(256)->Arg(1024);
BENCHMARK(BM_pairwise_omp)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
