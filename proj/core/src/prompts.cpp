#include "qforge/prompts.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qforge/error.hpp"
#include "qforge/text.hpp"

namespace qforge {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  for (auto& c : cols) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cols;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ConceptGraph parse_concept_graph(std::string_view tsv) {
  ConceptGraph g;
  std::istringstream in{std::string(tsv)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_tabs(line);
    if (cols.size() == 2) {
      double w = 0.0;
      const std::string& ws = cols[1];
      auto [ptr, ec] = std::from_chars(ws.data(), ws.data() + ws.size(), w);
      if (ec != std::errc() || ptr != ws.data() + ws.size() || w < 0.0) {
        throw Error("parse_error", "line " + std::to_string(lineno) + ": bad weight '" + ws + "'");
      }
      g.weighted_nodes.emplace_back(text::canonical(cols[0]), w);
    } else if (cols.size() == 3) {
      g.triples.push_back(Triple{text::canonical(cols[0]), cols[1], text::canonical(cols[2])});
    } else {
      throw Error("parse_error", "line " + std::to_string(lineno) + ": expected 2 or 3 tab-separated columns");
    }
  }
  return g;
}

ConceptGraph load_concept_graph(const std::filesystem::path& path) {
  return parse_concept_graph(read_file(path));
}

const std::vector<RelationalPrompt>& default_relational_prompts() {
  static const std::vector<RelationalPrompt> kPrompts = [] {
    using C = RelationCategory;
    const std::vector<std::pair<const char*, C>> rows{
        {"is", C::TaxonomyOther},          {"part of", C::TaxonomyOther},
        {"has", C::TaxonomyOther},         {"have", C::TaxonomyOther},
        {"is a", C::TaxonomyOther},        {"is capable of", C::CapableOf},
        {"can", C::CapableOf},             {"cannot", C::CapableOf},
        {"before", C::Causality},          {"after", C::Causality},
        {"because", C::Causality},         {"causes", C::Causality},
        {"all", C::Plausibility},          {"some", C::Plausibility},
        {"at least one", C::Plausibility}, {"at least two", C::Plausibility},
        {"most", C::Plausibility},         {"none", C::Plausibility},
        {"exactly", C::Plausibility},      {"few", C::Plausibility},
        {"always", C::AlwaysNever},        {"almost always", C::AlwaysNever},
        {"sometimes", C::AlwaysNever},     {"almost never", C::AlwaysNever},
        {"never", C::AlwaysNever},         {"larger than", C::Sizes},
        {"smaller than", C::Sizes},        {"same size as", C::Sizes},
        {"if", C::Conditional},            {"only if", C::Conditional},
        {"done in this order", C::Sequence}, {"ordered like this", C::Sequence},
    };
    std::vector<RelationalPrompt> out;
    for (const auto& [phrase, cat] : rows) out.push_back(make_relational_prompt(phrase, cat));
    return out;
  }();
  return kPrompts;
}

std::vector<RelationalPrompt> parse_relational_prompts(std::string_view tsv) {
  std::vector<RelationalPrompt> out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2) {
      throw Error("parse_error", "line " + std::to_string(lineno) + ": expected phrase<TAB>category");
    }
    out.push_back(make_relational_prompt(cols[0], parse_relation_category(cols[1])));
  }
  if (out.empty()) throw Error("parse_error", "relational prompt list is empty");
  return out;
}

std::vector<RelationalPrompt> load_relational_prompts(const std::filesystem::path& path) {
  return parse_relational_prompts(read_file(path));
}

std::optional<RelationCategory> category_of(std::string_view phrase,
                                            const std::vector<RelationalPrompt>& prompts) {
  const std::string key = text::canonical(phrase);
  for (const auto& p : prompts) {
    if (p.phrase == key) return p.category;
  }
  return std::nullopt;
}

BankBuild build_bank(const ConceptGraph& graph, std::size_t top_n,
                     std::vector<RelationalPrompt> relational, const PlatformConfig& cfg) {
  if (graph.weighted_nodes.empty() && graph.triples.empty()) {
    throw Error("empty_graph", "concept graph has no rows");
  }
  if (top_n < 1) throw Error("invalid_argument", "top_n must be >= 1");
  if (relational.empty()) throw Error("invalid_argument", "relational prompt list is empty");

  std::map<std::string, double> degree;
  for (const Triple& t : graph.triples) {
    degree[t.head] += 1.0;
    degree[t.tail] += 1.0;
  }
  std::map<std::string, double> explicit_weight;
  for (const auto& [node, w] : graph.weighted_nodes) explicit_weight[node] = w;

  std::vector<TopicPrompt> all;
  std::set<std::string> names;
  for (const auto& [n, _] : degree) names.insert(n);
  for (const auto& [n, _] : explicit_weight) names.insert(n);
  for (const std::string& n : names) {
    if (n.empty()) continue;
    auto ew = explicit_weight.find(n);
    all.push_back(TopicPrompt{n, ew != explicit_weight.end() ? ew->second : degree[n]});
  }
  std::sort(all.begin(), all.end(), [](const TopicPrompt& a, const TopicPrompt& b) {
    if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
    return a.concept_text < b.concept_text;
  });

  BankBuild out;
  if (top_n > all.size()) {
    out.warnings.push_back("top_n " + std::to_string(top_n) + " exceeds the " +
                           std::to_string(all.size()) + " distinct concepts; clamped");
    top_n = all.size();
  }
  all.resize(top_n);
  out.bank.concepts = std::move(all);

  if (!cfg.relational_weights.empty()) {
    for (const auto& p : relational) {
      auto it = cfg.relational_weights.find(p.phrase);
      out.bank.relational_weights.push_back(it == cfg.relational_weights.end() ? 1.0 : it->second);
    }
  }
  out.bank.relational_prompts = std::move(relational);
  return out;
}

PromptPair sample_prompt_pair(const ConceptBank& bank, Rng& rng) {
  if (bank.concepts.empty() || bank.relational_prompts.empty()) {
    throw Error("empty_bank", "cannot sample from an empty concept bank");
  }
  PromptPair pair;
  pair.topic = bank.concepts[rng.uniform_below(bank.concepts.size())];
  const bool weighted = bank.relational_weights.size() == bank.relational_prompts.size() &&
                        std::any_of(bank.relational_weights.begin(), bank.relational_weights.end(),
                                    [](double w) { return w > 0.0; });
  const std::size_t r = weighted ? rng.weighted_index(bank.relational_weights)
                                 : rng.uniform_below(bank.relational_prompts.size());
  pair.relational = bank.relational_prompts[r];
  return pair;
}

bool phrase_used(std::string_view question_text, std::string_view phrase) {
  return text::contains_run(text::tokenize(question_text), text::tokenize(phrase));
}

UsageFlags detect_usage(std::string_view question_text, const PromptPair& pair) {
  const auto tokens = text::tokenize(question_text);
  return UsageFlags{
      text::contains_run(tokens, text::tokenize(pair.topic.concept_text)),
      text::contains_run(tokens, text::tokenize(pair.relational.phrase)),
  };
}

}  // namespace qforge
