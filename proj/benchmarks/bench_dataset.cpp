#include <benchmark/benchmark.h>

#include "qforge/dataset.hpp"
#include "qforge/rng.hpp"

namespace {

void BM_TopicSplit(benchmark::State& state) {
  qforge::Rng rng(3);
  std::vector<qforge::SplitItem> items;
  for (int i = 0; i < 14343; ++i) {
    items.push_back({"q" + std::to_string(i), "t" + std::to_string(i < 1868 ? i : rng.uniform_below(1868))});
  }
  for (auto _ : state) benchmark::DoNotOptimize(qforge::topic_split(items, {0.6472, 0.1774, 0.1754}, 7));
}
BENCHMARK(BM_TopicSplit)->Unit(benchmark::kMillisecond);

void BM_DatasetStats(benchmark::State& state) {
  std::vector<qforge::DatasetExample> ex;
  for (int i = 0; i < 14343; ++i) {
    ex.push_back({std::to_string(i), "Is a thing number " + std::to_string(i % 500) + " heavier than a car?",
                  i % 2 ? qforge::Answer::Yes : qforge::Answer::No, "thing", "is heavier than", true, false});
  }
  for (auto _ : state) benchmark::DoNotOptimize(qforge::dataset_stats(ex));
}
BENCHMARK(BM_DatasetStats)->Unit(benchmark::kMillisecond);

}  // namespace
