#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qforge/leakage.hpp"
#include "qforge/prompts.hpp"
#include "qforge/rng.hpp"
#include "qforge/types.hpp"

namespace qforge {

using Predictions = std::map<std::string, Answer>;
using GoldAnswers = std::map<std::string, Answer>;

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t n = 0;
  std::size_t missing = 0;
  std::vector<std::string> warnings;
};

// Fraction of gold ids predicted correctly; missing predictions count as
// wrong and produce a warning.
AccuracyResult accuracy(const Predictions& predictions, const GoldAnswers& gold);

struct ContrastMember {
  std::string id;
  Answer gold = Answer::Yes;
};

struct ContrastGroup {
  std::string group_id;
  std::string original_id;
  std::vector<ContrastMember> members;
};

// Throws Error("invalid_argument") unless the group has >= 2 members and
// contains its original.
void validate_group(const ContrastGroup& g);

struct ContrastResult {
  double avg = 0.0;  // micro: over all member questions, originals included
  double em = 0.0;   // fraction of groups answered entirely correctly
  std::size_t n_groups = 0;
  std::size_t n_members = 0;
};

// `macro_avg` averages per-group accuracies instead of pooling members.
// Missing predictions count as wrong.
ContrastResult contrast_metrics(const std::vector<ContrastGroup>& groups,
                                const Predictions& predictions, bool macro_avg = false);

struct EvalReport {
  double accuracy = 0.0;
  std::size_t n = 0;
  std::map<std::string, double> per_category;  // keyed by relational category
  std::map<std::string, std::size_t> per_category_n;
  std::optional<ContrastResult> contrast;
  std::vector<std::string> warnings;
};

// Accuracy plus a per-category breakdown keyed on each gold record's
// relational prompt category (records with unknown prompts land in "other").
EvalReport evaluate(const Predictions& predictions, const std::vector<DatasetExample>& gold,
                    const std::vector<RelationalPrompt>& prompts = default_relational_prompts());

nlohmann::ordered_json eval_report_to_json(const EvalReport& r);
std::string format_eval_table(const EvalReport& r);

// Q/A rendering: k exemplar blocks `Q: <text>\nA: <yes|no>\n\n` followed by
// `Q: <question>\nA:`. Exemplars are sampled without replacement from
// `train_pool` (excluding `exclude_id`). Throws Error("pool_too_small").
std::string build_fewshot_prompt(const std::vector<DatasetExample>& train_pool, std::size_t k,
                                 Rng& rng, std::string_view question,
                                 std::string_view exclude_id = {});

// Featured snippet first, then regular snippets, first k overall, one per
// line, then the question. With a positive `char_budget`, whole snippets are
// dropped from the front until the text fits; the question is never cut.
std::string augment_with_snippets(std::string_view question, const SnippetSet& snippets,
                                  std::size_t k, std::size_t char_budget = 0);

std::vector<ContrastGroup> read_contrast_groups(const std::filesystem::path& path);
Predictions read_predictions(const std::filesystem::path& path);

}  // namespace qforge
