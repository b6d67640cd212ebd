#include <benchmark/benchmark.h>

#include "qforge/leakage.hpp"
#include "qforge/rng.hpp"

namespace {

std::u32string random_u32(qforge::Rng& rng, std::size_t n) {
  std::u32string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(U'a' + static_cast<char32_t>(rng.uniform_below(26)));
  return s;
}

void BM_BestWindowDistance(benchmark::State& state) {
  qforge::Rng rng(1);
  const auto pattern = random_u32(rng, static_cast<std::size_t>(state.range(0)));
  const auto text = random_u32(rng, static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(qforge::best_window_distance(pattern, text));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_BestWindowDistance)->Args({20, 300})->Args({100, 300})->Args({100, 3000});

void BM_CheckLeakHundredSnippets(benchmark::State& state) {
  qforge::Rng rng(2);
  std::string q;
  while (q.size() < 100) q += static_cast<char>('a' + rng.uniform_below(26));
  qforge::SnippetSet s;
  for (int i = 0; i < 100; ++i) {
    std::string sn;
    while (sn.size() < 300) sn += static_cast<char>('a' + rng.uniform_below(26));
    s.snippets.push_back(sn);
  }
  const qforge::PlatformConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(qforge::check_leak(q, s, cfg));
}
BENCHMARK(BM_CheckLeakHundredSnippets)->Unit(benchmark::kMillisecond);

}  // namespace
