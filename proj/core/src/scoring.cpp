#include "qforge/scoring.hpp"

#include "qforge/error.hpp"

namespace qforge {

int score_compose(const ComposeOutcome& outcome, const PlatformConfig& cfg) {
  if (!outcome.ai_was_wrong) return cfg.ai_correct_default;
  return cfg.beat_ai + (outcome.usage.relational_used ? cfg.relational_bonus : 0) +
         (outcome.usage.topic_used ? cfg.topic_bonus : 0);
}

int score_adjustment(Adjustment kind, const PlatformConfig& cfg) {
  return kind == Adjustment::Discarded ? -cfg.discard_penalty : -cfg.flip_penalty;
}

int score_validation(bool is_expert_check, std::optional<bool> matched_expert,
                     const PlatformConfig& cfg) {
  if (!is_expert_check) {
    if (matched_expert) {
      throw Error("invalid_argument", "matched_expert given for a non-check validation");
    }
    return cfg.validation_reward;
  }
  if (!matched_expert) throw Error("invalid_argument", "expert check requires matched_expert");
  return *matched_expert ? cfg.validation_reward : -cfg.expert_check_penalty;
}

Payout payout_due(long long ledger_total, const PlatformConfig& cfg) {
  if (ledger_total <= 0) return {};
  const long long n = ledger_total / cfg.payout_points;
  return Payout{n, n * cfg.payout_amount_cents};
}

void Ledger::append(LedgerEvent event) {
  std::lock_guard lock(mu_);
  totals_[event.player_id] += event.delta;
  events_.push_back(std::move(event));
}

LedgerEvent Ledger::apply_adjustment(const PlayerId& author, const QuestionId& question_id,
                                     Adjustment kind, const PlatformConfig& cfg, TimestampMs at) {
  std::lock_guard lock(mu_);
  if (!adjusted_.insert(question_id).second) {
    throw Error("double_adjustment", "question " + question_id + " already carries an adjustment");
  }
  LedgerEvent e{author,
                kind == Adjustment::Discarded ? LedgerKind::DiscardPenalty : LedgerKind::FlipPenalty,
                score_adjustment(kind, cfg), question_id, at};
  totals_[author] += e.delta;
  events_.push_back(e);
  return e;
}

bool Ledger::has_adjustment(const QuestionId& question_id) const {
  std::lock_guard lock(mu_);
  return adjusted_.count(question_id) > 0;
}

long long Ledger::total(const PlayerId& player) const {
  std::lock_guard lock(mu_);
  auto it = totals_.find(player);
  return it == totals_.end() ? 0 : it->second;
}

std::map<PlayerId, long long> Ledger::totals() const {
  std::lock_guard lock(mu_);
  return totals_;
}

std::vector<LedgerEvent> Ledger::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<LedgerEvent> Ledger::events_for(const PlayerId& player) const {
  std::lock_guard lock(mu_);
  std::vector<LedgerEvent> out;
  for (const auto& e : events_) {
    if (e.player_id == player) out.push_back(e);
  }
  return out;
}

std::size_t Ledger::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

long long replay_total(const std::vector<LedgerEvent>& events, const PlayerId& player) {
  long long sum = 0;
  for (const auto& e : events) {
    if (e.player_id == player) sum += e.delta;
  }
  return sum;
}

}  // namespace qforge
