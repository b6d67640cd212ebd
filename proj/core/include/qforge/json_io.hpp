#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qforge/answer_loop.hpp"
#include "qforge/leakage.hpp"
#include "qforge/types.hpp"
#include "qforge/verifier.hpp"

namespace qforge {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void to_json(json& j, const RelationalPrompt& p);
void from_json(const json& j, RelationalPrompt& p);
void to_json(json& j, const TopicPrompt& p);
void from_json(const json& j, TopicPrompt& p);
void to_json(json& j, const PromptPair& p);
void from_json(const json& j, PromptPair& p);
void to_json(json& j, const Validation& v);
void from_json(const json& j, Validation& v);
void to_json(json& j, const GoldDecision& d);
void from_json(const json& j, GoldDecision& d);
void to_json(json& j, const Question& q);
void from_json(const json& j, Question& q);
void to_json(json& j, const LedgerEvent& e);
void from_json(const json& j, LedgerEvent& e);
void to_json(json& j, const SnippetSet& s);
void from_json(const json& j, SnippetSet& s);
void to_json(json& j, const SeedExample& s);
void from_json(const json& j, SeedExample& s);
void to_json(json& j, const VerifierFeatureVector& fv);
void from_json(const json& j, VerifierFeatureVector& fv);
void to_json(json& j, const VerifierModel& m);
void from_json(const json& j, VerifierModel& m);
void to_json(json& j, const LeakReport& r);
void to_json(json& j, const AnnotatorStats& s);

// Dataset records keep the published key order:
// id, question, answer, topic_prompt, relational_prompt, relational_used, topic_used.
ordered_json dataset_record(const DatasetExample& ex, bool include_answer = true);
// Accepts the keys above plus the aliases `relational_prompt_used` /
// `topic_prompt_used`.
DatasetExample parse_dataset_record(const json& j);

// Sparse export: {"hash_bits","bias","version","weights":{"<index>":w}}.
json answer_model_to_json(const AnswerModel& m);
AnswerModel answer_model_from_json(const json& j);

// JSONL helpers. Blank lines are skipped; parse failures throw
// Error("parse_error") with file:line context.
std::vector<json> read_jsonl(const std::filesystem::path& path);
std::vector<json> parse_jsonl(const std::string& text, const std::string& origin = "<input>");
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace qforge
