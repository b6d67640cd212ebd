#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "qforge/types.hpp"

namespace qforge {

struct SplitItem {
  std::string id;
  std::string topic;
};

struct SplitAssignment {
  std::map<std::string, Split> question_split;
  std::map<std::string, Split> topic_split;
  std::vector<std::string> warnings;

  std::array<std::size_t, 3> sizes() const;
};

// Groups items by topic, orders the groups by a seeded shuffle followed by a
// stable sort on descending group size, then hands each whole group to the
// split with the largest remaining deficit (ties go to the earlier split).
// Throws Error("invalid_argument") unless the ratios are in [0,1] and sum to 1.
SplitAssignment topic_split(const std::vector<SplitItem>& items, const std::array<double, 3>& ratios,
                            std::uint64_t seed);
SplitAssignment topic_split(const std::vector<Question>& questions,
                            const std::array<double, 3>& ratios, std::uint64_t seed);

// Kept question -> dataset record; usage flags come from detect_usage.
// Throws Error("missing_gold") for questions without a keep decision.
DatasetExample to_dataset_example(const Question& q);

struct ExportPaths {
  std::filesystem::path train;
  std::filesystem::path dev;
  std::filesystem::path test;
};

// Writes train/dev/test.jsonl. Every question must be validated with a keep
// verdict and appear in the assignment. Test answers are dropped when
// `withhold_test_answers` is set.
ExportPaths export_jsonl(const std::vector<Question>& questions, const SplitAssignment& assignment,
                         const std::filesystem::path& out_dir, bool withhold_test_answers = false);

std::vector<DatasetExample> read_dataset_jsonl(const std::filesystem::path& path);

struct StatsReport {
  std::size_t n_questions = 0;
  double pct_no_answer = 0.0;
  std::size_t n_distinct_words = 0;
  double avg_question_len_words = 0.0;
  double std_question_len_words = 0.0;  // population standard deviation
  std::size_t n_distinct_topic_prompts = 0;
  std::size_t n_distinct_relational_prompts = 0;
  double pct_majority_relational = 0.0;
  double pct_majority_topic = 0.0;
  double pct_relational_used = 0.0;
  double pct_topic_used = 0.0;

  bool operator==(const StatsReport&) const = default;
};

// Word counts use the game tokenizer. Empty input yields all zeros.
StatsReport dataset_stats(const std::vector<DatasetExample>& examples);

nlohmann::ordered_json stats_to_json(const StatsReport& r);
std::string format_stats_table(const StatsReport& r);

}  // namespace qforge
