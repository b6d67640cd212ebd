#include <gtest/gtest.h>

#include <thread>

#include "qforge/error.hpp"
#include "qforge/scoring.hpp"

using namespace qforge;

namespace {

ComposeOutcome outcome(bool ai_wrong, bool rel, bool topic) {
  ComposeOutcome o;
  o.ai_was_wrong = ai_wrong;
  o.usage.relational_used = rel;
  o.usage.topic_used = topic;
  return o;
}

}  // namespace

TEST(Scoring, ComposeMatrix) {
  const PlatformConfig cfg;
  EXPECT_EQ(score_compose(outcome(true, true, true), cfg), 13);
  EXPECT_EQ(score_compose(outcome(true, true, false), cfg), 9);
  EXPECT_EQ(score_compose(outcome(true, false, true), cfg), 9);
  EXPECT_EQ(score_compose(outcome(true, false, false), cfg), 5);
  for (bool rel : {false, true}) {
    for (bool topic : {false, true}) EXPECT_EQ(score_compose(outcome(false, rel, topic), cfg), 3);
  }
}

TEST(Scoring, ComposeFollowsConfig) {
  PlatformConfig cfg;
  cfg.beat_ai = 10;
  cfg.relational_bonus = 1;
  cfg.topic_bonus = 2;
  cfg.ai_correct_default = 0;
  EXPECT_EQ(score_compose(outcome(true, true, true), cfg), 13);
  EXPECT_EQ(score_compose(outcome(true, false, true), cfg), 12);
  EXPECT_EQ(score_compose(outcome(false, true, true), cfg), 0);
}

TEST(Scoring, Adjustments) {
  const PlatformConfig cfg;
  EXPECT_EQ(score_adjustment(Adjustment::Discarded, cfg), -3);
  EXPECT_EQ(score_adjustment(Adjustment::AnswerFlipped, cfg), -2);
}

TEST(Scoring, Validation) {
  const PlatformConfig cfg;
  EXPECT_EQ(score_validation(false, std::nullopt, cfg), 2);
  EXPECT_EQ(score_validation(true, true, cfg), 2);
  EXPECT_EQ(score_validation(true, false, cfg), -1);
  EXPECT_THROW(score_validation(true, std::nullopt, cfg), Error);
  EXPECT_THROW(score_validation(false, true, cfg), Error);
}

TEST(Scoring, Payouts) {
  const PlatformConfig cfg;
  EXPECT_EQ(payout_due(299, cfg).count, 0);
  EXPECT_EQ(payout_due(300, cfg).count, 1);
  EXPECT_EQ(payout_due(913, cfg).count, 913 / 300);
  EXPECT_EQ(payout_due(913, cfg).count, 3);
  EXPECT_EQ(payout_due(913, cfg).amount_cents, 3 * 440);
  EXPECT_EQ(payout_due(-50, cfg).count, 0);
  EXPECT_EQ(payout_due(-50, cfg).amount_cents, 0);
}

TEST(Ledger, SingleAdjustmentPerQuestion) {
  const PlatformConfig cfg;
  Ledger ledger;
  ledger.apply_adjustment("alice", "q1", Adjustment::AnswerFlipped, cfg, 1);
  EXPECT_TRUE(ledger.has_adjustment("q1"));
  try {
    ledger.apply_adjustment("alice", "q1", Adjustment::Discarded, cfg, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "double_adjustment");
  }
  EXPECT_EQ(ledger.total("alice"), -2);
  EXPECT_EQ(ledger.size(), 1u);
}

TEST(Ledger, TotalsEqualReplay) {
  Ledger ledger;
  ledger.append({"a", LedgerKind::ComposeOutcome, 13, std::string("q1"), 1});
  ledger.append({"b", LedgerKind::ValidationReward, 2, std::string("q1"), 2});
  ledger.append({"a", LedgerKind::ComposeOutcome, 3, std::string("q2"), 3});
  ledger.append({"b", LedgerKind::ExpertCheckPenalty, -1, std::nullopt, 4});
  ledger.apply_adjustment("a", "q2", Adjustment::Discarded, PlatformConfig{}, 5);
  const auto events = ledger.events();
  EXPECT_EQ(ledger.total("a"), 13 + 3 - 3);
  EXPECT_EQ(ledger.total("b"), 1);
  EXPECT_EQ(replay_total(events, "a"), ledger.total("a"));
  EXPECT_EQ(replay_total(events, "b"), ledger.total("b"));
  EXPECT_EQ(ledger.events_for("a").size(), 3u);
  EXPECT_EQ(ledger.totals().size(), 2u);
  EXPECT_EQ(ledger.total("nobody"), 0);
}

TEST(Ledger, ConcurrentAppendsAreSerialized) {
  Ledger ledger;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&ledger, t] {
      for (int i = 0; i < 500; ++i) {
        ledger.append({"p" + std::to_string(t % 2), LedgerKind::ValidationReward, 2, std::nullopt, i});
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(ledger.size(), 4000u);
  EXPECT_EQ(ledger.total("p0"), 4000);
  EXPECT_EQ(replay_total(ledger.events(), "p1"), 4000);
}
