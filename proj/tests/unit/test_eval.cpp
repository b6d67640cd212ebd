#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "qforge/error.hpp"
#include "qforge/eval.hpp"
#include "qforge/rng.hpp"

using namespace qforge;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<DatasetExample> pool(std::size_t n) {
  std::vector<DatasetExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"t" + std::to_string(i), "Question number " + std::to_string(i) + "?",
                   i % 2 ? Answer::No : Answer::Yes, "", "", false, false});
  }
  return out;
}

}  // namespace

TEST(Accuracy, AllCorrectAndHalf) {
  GoldAnswers gold{{"a", Answer::Yes}, {"b", Answer::No}, {"c", Answer::Yes}, {"d", Answer::No}};
  EXPECT_DOUBLE_EQ(accuracy(gold, gold).accuracy, 1.0);
  Predictions half{{"a", Answer::Yes}, {"b", Answer::No}, {"c", Answer::No}, {"d", Answer::Yes}};
  EXPECT_DOUBLE_EQ(accuracy(half, gold).accuracy, 0.5);
}

TEST(Accuracy, MissingCountsWrongWithWarning) {
  GoldAnswers gold;
  Predictions pred;
  for (int i = 0; i < 10; ++i) {
    gold["q" + std::to_string(i)] = Answer::Yes;
    if (i != 4) pred["q" + std::to_string(i)] = Answer::Yes;
  }
  const auto r = accuracy(pred, gold);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.9);
  EXPECT_EQ(r.missing, 1u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Accuracy, FlippedPredictionsComplement) {
  Rng rng(2);
  GoldAnswers gold;
  Predictions pred, flipped;
  for (int i = 0; i < 37; ++i) {
    const auto id = std::to_string(i);
    gold[id] = rng.bernoulli(0.5) ? Answer::Yes : Answer::No;
    pred[id] = rng.bernoulli(0.5) ? Answer::Yes : Answer::No;
    flipped[id] = flip(pred[id]);
  }
  EXPECT_NEAR(accuracy(pred, gold).accuracy + accuracy(flipped, gold).accuracy, 1.0, 1e-12);
}

TEST(Contrast, SingleGroupAllCorrect) {
  ContrastGroup g{"g", "a", {{"a", Answer::Yes}, {"b", Answer::No}, {"c", Answer::Yes}}};
  const auto r = contrast_metrics({g}, {{"a", Answer::Yes}, {"b", Answer::No}, {"c", Answer::Yes}});
  EXPECT_DOUBLE_EQ(r.avg, 1.0);
  EXPECT_DOUBLE_EQ(r.em, 1.0);
}

TEST(Contrast, HandComputedPair) {
  ContrastGroup g1{"g1", "a", {{"a", Answer::Yes}, {"b", Answer::No}}};
  ContrastGroup g2{"g2", "c", {{"c", Answer::Yes}, {"d", Answer::No}}};
  const Predictions p{{"a", Answer::Yes}, {"b", Answer::No}, {"c", Answer::Yes}, {"d", Answer::Yes}};
  const auto r = contrast_metrics({g1, g2}, p);
  EXPECT_DOUBLE_EQ(r.avg, 0.75);
  EXPECT_DOUBLE_EQ(r.em, 0.5);
}

TEST(Contrast, MacroDiffersFromMicro) {
  ContrastGroup g1{"g1", "a", {{"a", Answer::Yes}, {"b", Answer::Yes}}};
  ContrastGroup g2{"g2", "c", {{"c", Answer::Yes}, {"d", Answer::Yes}, {"e", Answer::Yes}, {"f", Answer::Yes}}};
  const Predictions p{{"a", Answer::Yes}, {"b", Answer::Yes}, {"c", Answer::No},
                      {"d", Answer::No},  {"e", Answer::No},  {"f", Answer::No}};
  EXPECT_DOUBLE_EQ(contrast_metrics({g1, g2}, p).avg, 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(contrast_metrics({g1, g2}, p, true).avg, 0.5);
}

TEST(Contrast, InvalidGroups) {
  EXPECT_THROW(validate_group({"g", "a", {{"a", Answer::Yes}}}), Error);
  EXPECT_THROW(validate_group({"g", "z", {{"a", Answer::Yes}, {"b", Answer::No}}}), Error);
  EXPECT_NO_THROW(validate_group({"g", "a", {{"a", Answer::Yes}, {"b", Answer::No}}}));
}

TEST(Contrast, ExactMatchNeverExceedsMacroAverage) {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ContrastGroup> groups;
    Predictions p;
    const std::size_t ng = 1 + rng.uniform_below(6);
    for (std::size_t g = 0; g < ng; ++g) {
      ContrastGroup grp;
      grp.group_id = "g" + std::to_string(g);
      const std::size_t nm = 2 + rng.uniform_below(5);
      for (std::size_t m = 0; m < nm; ++m) {
        const auto id = grp.group_id + "_" + std::to_string(m);
        const Answer gold = rng.bernoulli(0.5) ? Answer::Yes : Answer::No;
        grp.members.push_back({id, gold});
        if (rng.bernoulli(0.95)) p[id] = rng.bernoulli(0.7) ? gold : flip(gold);
      }
      grp.original_id = grp.members[0].id;
      groups.push_back(grp);
    }
    const auto micro = contrast_metrics(groups, p);
    const auto macro = contrast_metrics(groups, p, true);
    ASSERT_LE(macro.em, macro.avg + 1e-12);
    ASSERT_LE(micro.em, 1.0);
  }
}

TEST(Contrast, MicroAverageCanFallBelowExactMatch) {
  // One fully correct pair, one fully wrong triple.
  std::vector<ContrastGroup> groups(2);
  Predictions p;
  groups[0].group_id = "a";
  groups[1].group_id = "b";
  for (int m = 0; m < 2; ++m) {
    groups[0].members.push_back({"a" + std::to_string(m), Answer::Yes});
    p["a" + std::to_string(m)] = Answer::Yes;
  }
  for (int m = 0; m < 3; ++m) {
    groups[1].members.push_back({"b" + std::to_string(m), Answer::Yes});
    p["b" + std::to_string(m)] = Answer::No;
  }
  groups[0].original_id = "a0";
  groups[1].original_id = "b0";
  const auto micro = contrast_metrics(groups, p);
  EXPECT_DOUBLE_EQ(micro.em, 0.5);
  EXPECT_DOUBLE_EQ(micro.avg, 0.4);
  const auto macro = contrast_metrics(groups, p, true);
  EXPECT_DOUBLE_EQ(macro.avg, 0.5);
}

TEST(FewShot, ZeroShotIsStub) {
  Rng rng(1);
  EXPECT_EQ(build_fewshot_prompt(pool(3), 0, rng, "Can fish swim?"), "Q: Can fish swim?\nA:");
}

TEST(FewShot, FiveShotBlocksAndDeterminism) {
  Rng a(5), b(5);
  const auto p1 = build_fewshot_prompt(pool(40), 5, a, "Can fish swim?");
  const auto p2 = build_fewshot_prompt(pool(40), 5, b, "Can fish swim?");
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(count_of(p1, "Q: "), 6u);
  EXPECT_EQ(count_of(p1, "\nA: yes\n\n") + count_of(p1, "\nA: no\n\n"), 5u);
  EXPECT_TRUE(p1.ends_with("Q: Can fish swim?\nA:"));
}

TEST(FewShot, ExcludesTargetAndNeverRepeats) {
  auto pl = pool(6);
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto p = build_fewshot_prompt(pl, 5, rng, pl[2].question, pl[2].id);
    EXPECT_EQ(count_of(p, pl[2].question), 1u);
    for (std::size_t i = 0; i < pl.size(); ++i) {
      if (i != 2) EXPECT_EQ(count_of(p, "Q: " + pl[i].question + "\n"), 1u);
    }
  }
}

TEST(FewShot, PoolTooSmall) {
  Rng rng(1);
  try {
    build_fewshot_prompt(pool(3), 4, rng, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "pool_too_small");
  }
}

TEST(Augment, Rules) {
  SnippetSet s{"q", {"one", "two", "three"}, std::string("feat")};
  EXPECT_EQ(augment_with_snippets("Q?", s, 0), "Q?");
  EXPECT_EQ(augment_with_snippets("Q?", s, 1), "feat\nQ?");
  EXPECT_EQ(augment_with_snippets("Q?", s, 5), "feat\none\ntwo\nthree\nQ?");
  SnippetSet plain{"q", {"one", "two", "three"}, std::nullopt};
  EXPECT_EQ(augment_with_snippets("Q?", plain, 5), "one\ntwo\nthree\nQ?");
  // budget drops the oldest snippets first, never the question
  EXPECT_EQ(augment_with_snippets("Q?", plain, 5, 12), "two\nthree\nQ?");
  EXPECT_EQ(augment_with_snippets("Q?", plain, 5, 11), "three\nQ?");
  EXPECT_EQ(augment_with_snippets("Q?", plain, 5, 1), "Q?");
}

TEST(Evaluate, PerCategoryBreakdown) {
  std::vector<DatasetExample> gold{{"1", "x", Answer::Yes, "t", "is capable of", false, false},
                                   {"2", "y", Answer::No, "t", "is capable of", false, false},
                                   {"3", "z", Answer::Yes, "t", "no such prompt", false, false}};
  const Predictions p{{"1", Answer::Yes}, {"2", Answer::Yes}, {"3", Answer::Yes}};
  const auto r = evaluate(p, gold);
  EXPECT_NEAR(r.accuracy, 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.per_category.at("capable-of"), 0.5);
  EXPECT_DOUBLE_EQ(r.per_category.at("other"), 1.0);
  EXPECT_EQ(r.per_category_n.at("capable-of"), 2u);
  EXPECT_FALSE(format_eval_table(r).empty());
  EXPECT_EQ(eval_report_to_json(r)["n"], 3);
}

TEST(EvalFiles, ReadContrastAndPredictions) {
  const auto dir = std::filesystem::temp_directory_path();
  std::ofstream(dir / "qforge_groups.jsonl")
      << R"({"group_id":"g","original_id":"a","members":[{"id":"a","gold":"yes"},{"id":"b","gold":"no"}]})"
      << "\n";
  std::ofstream(dir / "qforge_preds.jsonl") << R"({"id":"a","prediction":"yes"})" << "\n"
                                            << R"({"id":"b","prediction":"no"})" << "\n";
  const auto groups = read_contrast_groups(dir / "qforge_groups.jsonl");
  const auto preds = read_predictions(dir / "qforge_preds.jsonl");
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].members.size(), 2u);
  EXPECT_DOUBLE_EQ(contrast_metrics(groups, preds).em, 1.0);
}
