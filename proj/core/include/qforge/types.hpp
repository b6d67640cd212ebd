#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qforge {

using TimestampMs = std::int64_t;  // milliseconds since epoch, UTC
using PlayerId = std::string;
using QuestionId = std::string;

enum class RelationCategory {
  TaxonomyOther,
  CapableOf,
  Causality,
  Plausibility,
  AlwaysNever,
  Sizes,
  Conditional,
  Sequence,
};

enum class Answer { Yes, No };

enum class ValidationLabel { True, False, DontKnow, BadQuestion, Sensitive };

enum class QuestionState { Pending, Validated, Discarded, Exported };

enum class LedgerKind {
  ComposeOutcome,
  ValidationReward,
  ExpertCheckPenalty,
  DiscardPenalty,
  FlipPenalty,
};

// Verifier classes. DontKnow and Sensitive collapse into BadQuestion.
enum class GoldLabel { True, False, BadQuestion };

enum class Verdict { Keep, Discard };

enum class Split { Train, Dev, Test };

std::string_view to_string(RelationCategory c);
std::string_view to_string(Answer a);
std::string_view to_string(ValidationLabel l);
std::string_view to_string(QuestionState s);
std::string_view to_string(LedgerKind k);
std::string_view to_string(GoldLabel g);
std::string_view to_string(Verdict v);
std::string_view to_string(Split s);

// Parsers throw qforge::Error("bad_enum", ...) on unknown input.
RelationCategory parse_relation_category(std::string_view s);
Answer parse_answer(std::string_view s);
ValidationLabel parse_validation_label(std::string_view s);
QuestionState parse_question_state(std::string_view s);
LedgerKind parse_ledger_kind(std::string_view s);
GoldLabel parse_gold_label(std::string_view s);
Verdict parse_verdict(std::string_view s);
Split parse_split(std::string_view s);

inline Answer flip(Answer a) { return a == Answer::Yes ? Answer::No : Answer::Yes; }

GoldLabel collapse(ValidationLabel l);

// Yes <-> True, No <-> False. BadQuestion has no answer.
std::optional<Answer> to_answer(GoldLabel g);
GoldLabel to_gold(Answer a);

struct RelationalPrompt {
  std::string phrase;  // lowercase, whitespace-normalized
  RelationCategory category = RelationCategory::TaxonomyOther;

  bool operator==(const RelationalPrompt&) const = default;
};

struct TopicPrompt {
  std::string concept_text;
  double rank_score = 0.0;

  bool operator==(const TopicPrompt&) const = default;
};

struct PromptPair {
  TopicPrompt topic;
  RelationalPrompt relational;

  bool operator==(const PromptPair&) const = default;
};

// Builds a validated RelationalPrompt (phrase normalized); throws on empty.
RelationalPrompt make_relational_prompt(std::string_view phrase, RelationCategory category);
TopicPrompt make_topic_prompt(std::string_view concept_text, double rank_score);

struct Validation {
  PlayerId validator_id;
  ValidationLabel label = ValidationLabel::DontKnow;
  bool is_expert_check = false;
  TimestampMs timestamp = 0;

  bool operator==(const Validation&) const = default;
};

struct GoldDecision {
  GoldLabel label = GoldLabel::BadQuestion;
  double confidence = 0.0;
  Verdict verdict = Verdict::Discard;

  bool operator==(const GoldDecision&) const = default;
};

struct Question {
  QuestionId id;
  std::string text;
  PromptPair prompt_pair;
  PlayerId author_id;
  Answer author_answer = Answer::Yes;
  Answer model_answer = Answer::Yes;
  double model_confidence = 0.5;
  int model_version = 0;
  bool feedback_given = false;
  bool author_marked_model_correct = false;
  std::vector<Validation> validations;
  QuestionState state = QuestionState::Pending;
  TimestampMs created_at = 0;
  std::optional<GoldDecision> decision;
  TimestampMs decided_at = 0;
  bool leaked = false;

  // Gold answer for kept questions.
  std::optional<Answer> gold() const;

  bool operator==(const Question&) const = default;
};

// Returns true iff `from -> to` is an allowed lifecycle transition.
bool can_transition(QuestionState from, QuestionState to);

struct LedgerEvent {
  PlayerId player_id;
  LedgerKind kind = LedgerKind::ComposeOutcome;
  int delta = 0;
  std::optional<QuestionId> question_id;
  TimestampMs at = 0;

  bool operator==(const LedgerEvent&) const = default;
};

// The closed set of deltas produced by the default point economy.
bool is_default_economy_delta(int delta);

struct DatasetExample {
  std::string id;
  std::string question;
  Answer answer = Answer::Yes;
  std::string topic_prompt;
  std::string relational_prompt;
  bool relational_used = false;
  bool topic_used = false;

  bool operator==(const DatasetExample&) const = default;
};

}  // namespace qforge
