#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "cmdsim/analytics.hpp"
#include "cmdsim/embedding.hpp"

namespace {

const std::string kLong =
    "powershell -NoProfile -ExecutionPolicy Bypass -Command \"Get-ChildItem -Path C:\\Users -Recurse -Filter "
    "*.docx | Compress-Archive -DestinationPath C:\\Temp\\docs.zip\"";
const std::string kOther =
    "powershell -nop -c \"Get-ChildItem C:\\Users\\Public -Recurse -Include *.xlsx | Copy-Item -Destination "
    "\\\\fileserver\\share\\loot\"";

void BM_RougeL(benchmark::State& state) {
  auto a = cmdsim::tokenize(kLong), b = cmdsim::tokenize(kOther);
  for (auto _ : state) benchmark::DoNotOptimize(cmdsim::rouge_l(a, b));
}
BENCHMARK(BM_RougeL);

void BM_Tokenize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(cmdsim::tokenize(kLong));
}
BENCHMARK(BM_Tokenize);

void BM_LocalEmbed(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cmdsim::local_deterministic_embed(kLong, dim));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * kLong.size()));
}
BENCHMARK(BM_LocalEmbed)->Arg(256)->Arg(1024);

}  // namespace
