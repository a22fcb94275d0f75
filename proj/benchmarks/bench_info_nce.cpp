#include <benchmark/benchmark.h>

#include <random>

#include "cmdsim/contrastive.hpp"

namespace {

void BM_InfoNceGradients(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 gen(2);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> a(k, std::vector<double>(d)), p(k, std::vector<double>(d));
  for (auto* m : {&a, &p})
    for (auto& v : *m)
      for (auto& x : v) x = g(gen);
  auto adapter = cmdsim::AdapterModel::identity(d);
  for (auto _ : state) benchmark::DoNotOptimize(cmdsim::info_nce_gradients(a, p, adapter, 0.05));
}
BENCHMARK(BM_InfoNceGradients)->Args({16, 64})->Args({64, 256})->Args({64, 768});

}  // namespace
