#include <benchmark/benchmark.h>

#include <random>

#include "cmdsim/clustering.hpp"

namespace {

std::vector<cmdsim::EmbeddingVector> corpus(std::size_t n, std::size_t dim) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> centers(16, std::vector<double>(dim));
  for (auto& c : centers)
    for (auto& x : c) x = g(gen);
  std::vector<cmdsim::EmbeddingVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = centers[i % centers.size()];
    for (auto& x : v) x += 0.2 * g(gen);
    out.push_back(cmdsim::normalized(cmdsim::EmbeddingVector(v)));
  }
  return out;
}

void BM_Dbscan(benchmark::State& state) {
  auto pts = corpus(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(cmdsim::dbscan(pts, {0.08, 5}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dbscan)->RangeMultiplier(2)->Range(256, 4096)->Complexity(benchmark::oNSquared);

void BM_MineNegatives(benchmark::State& state) {
  auto pts = corpus(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(cmdsim::mine_negatives(0, pts, 1000, 1));
}
BENCHMARK(BM_MineNegatives)->Arg(2048)->Arg(8192);

}  // namespace
