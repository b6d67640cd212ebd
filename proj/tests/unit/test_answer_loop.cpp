#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <thread>

#include "oracles.hpp"
#include "qforge/answer_loop.hpp"
#include "qforge/error.hpp"
#include "qforge/json_io.hpp"

using namespace qforge;

namespace {

std::vector<SeedExample> separable_set() {
  std::vector<SeedExample> out;
  const char* nouns[] = {"rock", "tree", "cloud", "river", "lamp"};
  for (const char* n : nouns) {
    out.push_back({std::string("does a ") + n + " glorp", Answer::Yes, SeedSource::Collected});
    out.push_back({std::string("does a ") + n + " snarf", Answer::No, SeedSource::Collected});
  }
  return out;
}

ConceptBank bank_of(const std::vector<std::string>& names) {
  ConceptBank b;
  for (const auto& n : names) b.concepts.push_back(make_topic_prompt(n, 1.0));
  b.relational_prompts.push_back(make_relational_prompt("is part of", RelationCategory::TaxonomyOther));
  return b;
}

PlatformConfig small_cfg() {
  PlatformConfig cfg;
  cfg.hash_bits = 12;
  cfg.answerer_epochs = 60;
  return cfg;
}

}  // namespace

TEST(Templates, LiteralFill) {
  const auto ex = templated_assertion("wheel", "part-of", "car");
  EXPECT_EQ(ex.text, "a wheel is part of a car");
  EXPECT_EQ(ex.label, Answer::Yes);
  EXPECT_EQ(templated_assertion("bird", "capable-of", "fly").text, "a bird is capable of fly");
  EXPECT_EQ(templated_assertion("wheel", "/r/PartOf", "car").text, "a wheel is part of a car");
  EXPECT_TRUE(has_template("PartOf"));
  try {
    templated_assertion("wheel", "UNKNOWN", "car");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unknown_relation");
  }
}

TEST(Templates, CorruptionSubstitutesTail) {
  Rng rng(1);
  const auto ex = corrupt_triple({"wheel", "part-of", "car"}, bank_of({"car", "banana"}), rng);
  EXPECT_EQ(ex.text, "a wheel is part of a banana");
  EXPECT_EQ(ex.label, Answer::No);
  EXPECT_THROW(corrupt_triple({"wheel", "part-of", "car"}, bank_of({"car"}), rng), Error);
  EXPECT_THROW(corrupt_triple({"wheel", "part-of", "car"}, bank_of({"car", "bus"}), rng,
                              {{"wheel", "part-of", "bus"}}),
               Error);
}

TEST(Templates, CorruptionsNeverReproduceATrueAssertion) {
  std::vector<std::string> names;
  for (int i = 0; i < 20; ++i) names.push_back("n" + std::to_string(i));
  const auto bank = bank_of(names);
  std::vector<Triple> truth;
  Rng gen(9);
  for (int i = 0; i < 60; ++i) {
    truth.push_back({names[gen.uniform_below(20)], "part-of", names[gen.uniform_below(20)]});
  }
  const std::set<Triple> known(truth.begin(), truth.end());
  std::set<std::string> true_texts;
  for (const auto& t : truth) true_texts.insert(templated_assertion(t.head, t.relation, t.tail).text);

  Rng rng(10);
  int identical = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto ex = corrupt_triple(truth[i % truth.size()], bank, rng, known);
    identical += static_cast<int>(true_texts.count(ex.text));
  }
  EXPECT_EQ(identical, 0);
}

TEST(Templates, SeedCorpusPairsAndSkips) {
  Rng rng(2);
  const auto corpus = build_seed_corpus(
      {{"wheel", "part-of", "car"}, {"x", "unknown-rel", "y"}}, bank_of({"car", "banana", "pear"}), rng);
  EXPECT_EQ(corpus.examples.size(), 2u);
  EXPECT_EQ(corpus.skipped_unknown_relation, 1u);
}

TEST(Featurize, NormalizedSortedIndices) {
  const auto x = featurize_text("A wheel is part of a car", 12);
  ASSERT_FALSE(x.index.empty());
  double norm = 0.0;
  for (std::size_t i = 0; i < x.index.size(); ++i) {
    if (i > 0) EXPECT_LT(x.index[i - 1], x.index[i]);
    EXPECT_LT(x.index[i], 1u << 12);
    norm += x.value[i] * x.value[i];
  }
  EXPECT_NEAR(norm, 1.0, 1e-12);
  const auto y = featurize_text("  a WHEEL is part of a car ", 12);
  EXPECT_EQ(x.index, y.index);
}

TEST(Answerer, SeparableSetIsMemorized) {
  const auto data = separable_set();
  const auto model = train_answerer(data, small_cfg(), 5);
  for (const auto& ex : data) EXPECT_EQ(model.answer(ex.text).label, ex.label) << ex.text;
}

TEST(Answerer, TrainingIsDeterministic) {
  const auto a = train_answerer(separable_set(), small_cfg(), 5);
  const auto b = train_answerer(separable_set(), small_cfg(), 5);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(a.bias(), b.bias());
}

TEST(Answerer, LossIsNonIncreasing) {
  const auto t = train_answerer_detailed(separable_set(), small_cfg(), 5);
  ASSERT_GE(t.epoch_loss.size(), 2u);
  for (std::size_t i = 1; i < t.epoch_loss.size(); ++i) EXPECT_LE(t.epoch_loss[i], t.epoch_loss[i - 1]);
}

TEST(Answerer, SingleClassRejected) {
  std::vector<SeedExample> data{{"a", Answer::Yes, SeedSource::Collected}};
  try {
    train_answerer(data, small_cfg(), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "single_class");
  }
}

TEST(Answerer, GradientMatchesFiniteDifferences) {
  const int bits = 10;
  const auto data = featurize_examples(separable_set(), bits);
  Rng rng(3);
  std::vector<double> params((std::size_t{1} << bits) + 1);
  for (auto& p : params) p = rng.normal() * 0.5;
  const double l2 = 1e-2;
  auto f = [&](const std::vector<double>& p) {
    std::vector<double> w(p.begin(), p.end() - 1);
    return answerer_objective(w, p.back(), data, l2);
  };
  std::vector<double> w(params.begin(), params.end() - 1), gw;
  double gb = 0.0;
  answerer_objective(w, params.back(), data, l2, &gw, &gb);
  std::vector<double> grad = gw;
  grad.push_back(gb);

  std::set<std::size_t> coords{params.size() - 1};
  for (const auto& ex : data) coords.insert(ex.x.index.begin(), ex.x.index.end());
  for (int i = 0; i < 20; ++i) coords.insert(rng.uniform_below(params.size()));
  EXPECT_LT(oracle::gradient_relative_error(f, params, grad, {coords.begin(), coords.end()}), 1e-4);
}

TEST(Answerer, AnswerIsTotalAndConfident) {
  AnswerModel m(8);
  const auto r = m.answer("");
  EXPECT_GE(r.confidence, 0.5);
  EXPECT_LE(r.confidence, 1.0);
}

TEST(Answerer, NegatedModelFlipsEveryLabel) {
  const auto model = train_answerer(separable_set(), small_cfg(), 7);
  AnswerModel neg = model;
  for (auto& w : neg.mutable_weights()) w = -w;
  neg.set_bias(-model.bias());
  for (const char* q : {"does a rock glorp", "does a lamp snarf", "is the sky green", "tree snarf glorp"}) {
    if (model.score(q) == 0.0) continue;
    EXPECT_EQ(neg.answer(q).label, flip(model.answer(q).label)) << q;
    EXPECT_NEAR(neg.answer(q).confidence, model.answer(q).confidence, 1e-12);
  }
}

TEST(Answerer, JsonRoundTrip) {
  auto model = train_answerer(separable_set(), small_cfg(), 7, 4);
  const auto back = answer_model_from_json(answer_model_to_json(model));
  EXPECT_EQ(back.version(), 4);
  EXPECT_EQ(back.hash_bits(), model.hash_bits());
  EXPECT_EQ(back.weights(), model.weights());
  EXPECT_EQ(back.bias(), model.bias());
}

TEST(Retrain, BelowThresholdNothing) {
  PlatformConfig cfg;
  RetrainCounter c{999, {}};
  EXPECT_FALSE(retrain_check(c, cfg).has_value());
}

TEST(Retrain, JumpCrossesTwoThresholdsOneAtATime) {
  PlatformConfig cfg;
  RetrainCounter c{999, {}};
  c.unvalidated_count = 2001;
  auto first = retrain_check(c, cfg);
  ASSERT_TRUE(first);
  EXPECT_EQ(first->threshold, 1000);
  auto second = retrain_check(c, cfg);
  ASSERT_TRUE(second);
  EXPECT_EQ(second->threshold, 2000);
  EXPECT_FALSE(retrain_check(c, cfg).has_value());
}

TEST(Retrain, ExhaustedThresholds) {
  PlatformConfig cfg;
  RetrainCounter c{20000, {1000, 2000, 5000, 10000, 20000}};
  EXPECT_FALSE(retrain_check(c, cfg).has_value());
}

TEST(Retrain, SchedulerFiresEachThresholdOnceUnderContention) {
  PlatformConfig cfg;
  cfg.retrain_thresholds = {50, 100};
  RetrainScheduler sched(cfg);
  std::atomic<int> jobs{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        if (sched.record_question()) ++jobs;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(jobs.load(), 2);
  EXPECT_EQ(sched.snapshot().unvalidated_count, 400);
}
