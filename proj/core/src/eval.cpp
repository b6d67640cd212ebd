#include "qforge/eval.hpp"

#include <algorithm>
#include <sstream>

#include "qforge/error.hpp"
#include "qforge/json_io.hpp"

namespace qforge {

AccuracyResult accuracy(const Predictions& predictions, const GoldAnswers& gold) {
  AccuracyResult r;
  r.n = gold.size();
  std::size_t correct = 0;
  for (const auto& [id, answer] : gold) {
    auto it = predictions.find(id);
    if (it == predictions.end()) {
      ++r.missing;
      continue;
    }
    if (it->second == answer) ++correct;
  }
  if (r.missing > 0) {
    r.warnings.push_back(std::to_string(r.missing) + " gold id(s) have no prediction; counted as wrong");
  }
  r.accuracy = r.n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.n);
  return r;
}

void validate_group(const ContrastGroup& g) {
  if (g.members.size() < 2) {
    throw Error("invalid_argument", "contrast group " + g.group_id + " needs >= 2 members");
  }
  const bool has_original = std::any_of(g.members.begin(), g.members.end(),
                                        [&](const ContrastMember& m) { return m.id == g.original_id; });
  if (!has_original) {
    throw Error("invalid_argument", "contrast group " + g.group_id + " does not contain its original");
  }
}

ContrastResult contrast_metrics(const std::vector<ContrastGroup>& groups,
                                const Predictions& predictions, bool macro_avg) {
  ContrastResult r;
  r.n_groups = groups.size();
  std::size_t correct_members = 0;
  std::size_t exact = 0;
  double macro_sum = 0.0;
  for (const auto& g : groups) {
    validate_group(g);
    std::size_t correct = 0;
    for (const auto& m : g.members) {
      auto it = predictions.find(m.id);
      if (it != predictions.end() && it->second == m.gold) ++correct;
    }
    r.n_members += g.members.size();
    correct_members += correct;
    if (correct == g.members.size()) ++exact;
    macro_sum += static_cast<double>(correct) / static_cast<double>(g.members.size());
  }
  if (r.n_groups == 0) return r;
  r.avg = macro_avg ? macro_sum / static_cast<double>(r.n_groups)
                    : static_cast<double>(correct_members) / static_cast<double>(r.n_members);
  r.em = static_cast<double>(exact) / static_cast<double>(r.n_groups);
  return r;
}

EvalReport evaluate(const Predictions& predictions, const std::vector<DatasetExample>& gold,
                    const std::vector<RelationalPrompt>& prompts) {
  GoldAnswers answers;
  for (const auto& ex : gold) answers[ex.id] = ex.answer;
  const AccuracyResult acc = accuracy(predictions, answers);

  EvalReport r;
  r.accuracy = acc.accuracy;
  r.n = acc.n;
  r.warnings = acc.warnings;
  std::map<std::string, std::size_t> correct;
  for (const auto& ex : gold) {
    const auto cat = category_of(ex.relational_prompt, prompts);
    const std::string key = cat ? std::string(to_string(*cat)) : "other";
    ++r.per_category_n[key];
    auto it = predictions.find(ex.id);
    if (it != predictions.end() && it->second == ex.answer) ++correct[key];
  }
  for (const auto& [key, n] : r.per_category_n) {
    r.per_category[key] = static_cast<double>(correct[key]) / static_cast<double>(n);
  }
  return r;
}

nlohmann::ordered_json eval_report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["n"] = r.n;
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.per_category) {
    cats[k] = {{"accuracy", v}, {"n", r.per_category_n.at(k)}};
  }
  j["per_category"] = cats;
  if (r.contrast) {
    j["contrast_avg"] = r.contrast->avg;
    j["contrast_em"] = r.contrast->em;
    j["contrast_groups"] = r.contrast->n_groups;
  }
  j["warnings"] = r.warnings;
  return j;
}

std::string format_eval_table(const EvalReport& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "accuracy        " << r.accuracy << "  (n=" << r.n << ")\n";
  for (const auto& [k, v] : r.per_category) {
    out << "  " << k;
    for (std::size_t i = k.size(); i < 14; ++i) out << ' ';
    out << v << "  (n=" << r.per_category_n.at(k) << ")\n";
  }
  if (r.contrast) {
    out << "contrast avg    " << r.contrast->avg << '\n';
    out << "contrast EM     " << r.contrast->em << "  (groups=" << r.contrast->n_groups << ")\n";
  }
  return out.str();
}

std::string build_fewshot_prompt(const std::vector<DatasetExample>& train_pool, std::size_t k,
                                 Rng& rng, std::string_view question, std::string_view exclude_id) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < train_pool.size(); ++i) {
    if (exclude_id.empty() || train_pool[i].id != exclude_id) candidates.push_back(i);
  }
  if (candidates.size() < k) {
    throw Error("pool_too_small", "need " + std::to_string(k) + " exemplars, pool has " +
                                      std::to_string(candidates.size()));
  }
  // partial Fisher-Yates: the first k slots become the sample
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  std::string prompt;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& ex = train_pool[candidates[i]];
    prompt += "Q: ";
    prompt += ex.question;
    prompt += "\nA: ";
    prompt += to_string(ex.answer);
    prompt += "\n\n";
  }
  prompt += "Q: ";
  prompt += question;
  prompt += "\nA:";
  return prompt;
}

std::string augment_with_snippets(std::string_view question, const SnippetSet& snippets,
                                  std::size_t k, std::size_t char_budget) {
  std::vector<std::string> chosen;
  if (snippets.featured && chosen.size() < k) chosen.push_back(*snippets.featured);
  for (const auto& s : snippets.snippets) {
    if (chosen.size() >= k) break;
    chosen.push_back(s);
  }
  auto length = [&](std::size_t from) {
    std::size_t n = question.size();
    for (std::size_t i = from; i < chosen.size(); ++i) n += chosen[i].size() + 1;
    return n;
  };
  std::size_t first = 0;
  if (char_budget > 0) {
    while (first < chosen.size() && length(first) > char_budget) ++first;
  }
  std::string out;
  for (std::size_t i = first; i < chosen.size(); ++i) {
    out += chosen[i];
    out += '\n';
  }
  out += question;
  return out;
}

std::vector<ContrastGroup> read_contrast_groups(const std::filesystem::path& path) {
  std::vector<ContrastGroup> groups;
  for (const auto& row : read_jsonl(path)) {
    ContrastGroup g;
    g.group_id = row.at("group_id").get<std::string>();
    g.original_id = row.at("original_id").get<std::string>();
    for (const auto& m : row.at("members")) {
      g.members.push_back(ContrastMember{m.at("id").get<std::string>(),
                                         parse_answer(m.at("gold").get<std::string>())});
    }
    validate_group(g);
    groups.push_back(std::move(g));
  }
  return groups;
}

Predictions read_predictions(const std::filesystem::path& path) {
  Predictions p;
  for (const auto& row : read_jsonl(path)) {
    p[row.at("id").get<std::string>()] = parse_answer(row.at("prediction").get<std::string>());
  }
  return p;
}

}  // namespace qforge
