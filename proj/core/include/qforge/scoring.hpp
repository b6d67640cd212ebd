#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qforge/config.hpp"
#include "qforge/prompts.hpp"
#include "qforge/types.hpp"

namespace qforge {

struct ComposeOutcome {
  bool ai_was_wrong = false;
  UsageFlags usage;
};

enum class Adjustment { Discarded, AnswerFlipped };

// beat: beat_ai + relational_bonus*[rel used] + topic_bonus*[topic used];
// AI correct: ai_correct_default regardless of usage.
int score_compose(const ComposeOutcome& outcome, const PlatformConfig& cfg);

// Negative delta: -discard_penalty or -flip_penalty.
int score_adjustment(Adjustment kind, const PlatformConfig& cfg);

// `matched_expert` must be present iff `is_expert_check`; otherwise throws
// Error("invalid_argument").
int score_validation(bool is_expert_check, std::optional<bool> matched_expert,
                     const PlatformConfig& cfg);

struct Payout {
  long long count = 0;
  long long amount_cents = 0;
};

// Negative totals owe nothing.
Payout payout_due(long long ledger_total, const PlatformConfig& cfg);

// Append-only point ledger. Appends are serialized by an internal mutex;
// readers get copies.
class Ledger {
 public:
  void append(LedgerEvent event);

  // Appends the discard/flip penalty for `question_id`. A question takes at
  // most one adjustment: a second call throws Error("double_adjustment").
  LedgerEvent apply_adjustment(const PlayerId& author, const QuestionId& question_id,
                               Adjustment kind, const PlatformConfig& cfg, TimestampMs at);

  bool has_adjustment(const QuestionId& question_id) const;

  long long total(const PlayerId& player) const;
  std::map<PlayerId, long long> totals() const;
  std::vector<LedgerEvent> events() const;
  std::vector<LedgerEvent> events_for(const PlayerId& player) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEvent> events_;
  std::map<PlayerId, long long> totals_;
  std::set<QuestionId> adjusted_;
};

// Fold of `events` for `player` in insertion order (independent of any
// running totals; used by audits).
long long replay_total(const std::vector<LedgerEvent>& events, const PlayerId& player);

}  // namespace qforge
