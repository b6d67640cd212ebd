#include "qforge/types.hpp"

#include <algorithm>
#include <array>

#include "qforge/error.hpp"
#include "qforge/text.hpp"

namespace qforge {
namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names,
             std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw Error("bad_enum", "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 8> kCategoryNames{
    "taxonomy-other", "capable-of",   "causality",   "plausibility",
    "always-never",   "sizes",        "conditional", "sequence"};
constexpr std::array<std::string_view, 2> kAnswerNames{"yes", "no"};
constexpr std::array<std::string_view, 5> kLabelNames{"true", "false", "dont_know",
                                                      "bad_question", "sensitive"};
constexpr std::array<std::string_view, 4> kStateNames{"pending", "validated", "discarded",
                                                      "exported"};
constexpr std::array<std::string_view, 5> kLedgerNames{
    "compose_outcome", "validation_reward", "expert_check_penalty", "discard_penalty",
    "flip_penalty"};
constexpr std::array<std::string_view, 3> kGoldNames{"true", "false", "bad_question"};
constexpr std::array<std::string_view, 2> kVerdictNames{"keep", "discard"};
constexpr std::array<std::string_view, 3> kSplitNames{"train", "dev", "test"};

}  // namespace

std::string_view to_string(RelationCategory c) { return kCategoryNames[static_cast<int>(c)]; }
std::string_view to_string(Answer a) { return kAnswerNames[static_cast<int>(a)]; }
std::string_view to_string(ValidationLabel l) { return kLabelNames[static_cast<int>(l)]; }
std::string_view to_string(QuestionState s) { return kStateNames[static_cast<int>(s)]; }
std::string_view to_string(LedgerKind k) { return kLedgerNames[static_cast<int>(k)]; }
std::string_view to_string(GoldLabel g) { return kGoldNames[static_cast<int>(g)]; }
std::string_view to_string(Verdict v) { return kVerdictNames[static_cast<int>(v)]; }
std::string_view to_string(Split s) { return kSplitNames[static_cast<int>(s)]; }

RelationCategory parse_relation_category(std::string_view s) {
  return parse_enum<RelationCategory>(s, kCategoryNames, "relation category");
}
Answer parse_answer(std::string_view s) { return parse_enum<Answer>(s, kAnswerNames, "answer"); }
ValidationLabel parse_validation_label(std::string_view s) {
  return parse_enum<ValidationLabel>(s, kLabelNames, "validation label");
}
QuestionState parse_question_state(std::string_view s) {
  return parse_enum<QuestionState>(s, kStateNames, "question state");
}
LedgerKind parse_ledger_kind(std::string_view s) {
  return parse_enum<LedgerKind>(s, kLedgerNames, "ledger event kind");
}
GoldLabel parse_gold_label(std::string_view s) {
  return parse_enum<GoldLabel>(s, kGoldNames, "gold label");
}
Verdict parse_verdict(std::string_view s) { return parse_enum<Verdict>(s, kVerdictNames, "verdict"); }
Split parse_split(std::string_view s) { return parse_enum<Split>(s, kSplitNames, "split"); }

GoldLabel collapse(ValidationLabel l) {
  switch (l) {
    case ValidationLabel::True: return GoldLabel::True;
    case ValidationLabel::False: return GoldLabel::False;
    default: return GoldLabel::BadQuestion;
  }
}

std::optional<Answer> to_answer(GoldLabel g) {
  switch (g) {
    case GoldLabel::True: return Answer::Yes;
    case GoldLabel::False: return Answer::No;
    default: return std::nullopt;
  }
}

GoldLabel to_gold(Answer a) { return a == Answer::Yes ? GoldLabel::True : GoldLabel::False; }

RelationalPrompt make_relational_prompt(std::string_view phrase, RelationCategory category) {
  RelationalPrompt p{text::canonical(phrase), category};
  if (p.phrase.empty()) throw Error("invalid_prompt", "relational prompt phrase is empty");
  return p;
}

TopicPrompt make_topic_prompt(std::string_view concept_text, double rank_score) {
  TopicPrompt t{text::canonical(concept_text), rank_score};
  if (t.concept_text.empty()) throw Error("invalid_prompt", "topic concept is empty");
  if (!(rank_score >= 0.0)) throw Error("invalid_prompt", "rank_score must be >= 0");
  return t;
}

std::optional<Answer> Question::gold() const {
  if (!decision || decision->verdict != Verdict::Keep) return std::nullopt;
  return to_answer(decision->label);
}

bool can_transition(QuestionState from, QuestionState to) {
  switch (from) {
    case QuestionState::Pending:
      return to == QuestionState::Validated || to == QuestionState::Discarded;
    case QuestionState::Validated:
      return to == QuestionState::Exported;
    default:
      return false;
  }
}

bool is_default_economy_delta(int delta) {
  static constexpr std::array<int, 8> kDeltas{-3, -2, -1, 2, 3, 5, 9, 13};
  return std::find(kDeltas.begin(), kDeltas.end(), delta) != kDeltas.end();
}

}  // namespace qforge
