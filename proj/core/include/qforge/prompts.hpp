#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qforge/config.hpp"
#include "qforge/rng.hpp"
#include "qforge/types.hpp"

namespace qforge {

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const Triple&) const = default;
};

// Parsed concept-graph TSV. Rows are either `node\tweight` or
// `head\trelation\ttail`; both kinds may be mixed in one file.
struct ConceptGraph {
  std::vector<std::pair<std::string, double>> weighted_nodes;
  std::vector<Triple> triples;
};

ConceptGraph parse_concept_graph(std::string_view tsv);
ConceptGraph load_concept_graph(const std::filesystem::path& path);

struct ConceptBank {
  std::vector<TopicPrompt> concepts;
  std::vector<RelationalPrompt> relational_prompts;
  std::vector<double> relational_weights;  // empty = uniform
};

struct BankBuild {
  ConceptBank bank;
  std::vector<std::string> warnings;
};

// The 32 relational prompts enumerated in the published prompt table.
const std::vector<RelationalPrompt>& default_relational_prompts();

// `phrase\tcategory` per line; blank lines and '#' comments skipped.
std::vector<RelationalPrompt> parse_relational_prompts(std::string_view tsv);
std::vector<RelationalPrompt> load_relational_prompts(const std::filesystem::path& path);

// Category of a phrase in `prompts`, or nullopt.
std::optional<RelationCategory> category_of(std::string_view phrase,
                                            const std::vector<RelationalPrompt>& prompts);

// Top `top_n` concepts by rank score (explicit weight, else undirected
// degree), ties broken lexicographically. Clamps `top_n` with a warning.
BankBuild build_bank(const ConceptGraph& graph, std::size_t top_n,
                     std::vector<RelationalPrompt> relational = default_relational_prompts(),
                     const PlatformConfig& cfg = {});

PromptPair sample_prompt_pair(const ConceptBank& bank, Rng& rng);

struct UsageFlags {
  bool topic_used = false;
  bool relational_used = false;

  bool operator==(const UsageFlags&) const = default;
};

// Token-boundary phrase match on the game tokenizer's output.
UsageFlags detect_usage(std::string_view question_text, const PromptPair& pair);
bool phrase_used(std::string_view question_text, std::string_view phrase);

}  // namespace qforge
