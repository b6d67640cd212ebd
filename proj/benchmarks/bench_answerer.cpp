#include <benchmark/benchmark.h>

#include "qforge/answer_loop.hpp"

namespace {

void BM_FeaturizeText(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(qforge::featurize_text("Can a playing card be used to cut soft cheese?", 18));
  }
}
BENCHMARK(BM_FeaturizeText);

void BM_Answer(benchmark::State& state) {
  const qforge::AnswerModel model(18);
  for (auto _ : state) benchmark::DoNotOptimize(model.answer("Can a playing card be used to cut soft cheese?"));
}
BENCHMARK(BM_Answer);

void BM_TrainAnswerer(benchmark::State& state) {
  std::vector<qforge::SeedExample> data;
  for (int i = 0; i < state.range(0); ++i) {
    data.push_back({"a thing" + std::to_string(i % 97) + " is part of a car" + std::to_string(i % 13),
                    i % 2 ? qforge::Answer::Yes : qforge::Answer::No, qforge::SeedSource::TripleTemplate});
  }
  qforge::PlatformConfig cfg;
  cfg.answerer_epochs = 5;
  for (auto _ : state) benchmark::DoNotOptimize(qforge::train_answerer(data, cfg, 1));
}
BENCHMARK(BM_TrainAnswerer)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
