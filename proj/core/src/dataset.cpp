#include "qforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qforge/error.hpp"
#include "qforge/json_io.hpp"
#include "qforge/prompts.hpp"
#include "qforge/rng.hpp"
#include "qforge/text.hpp"

namespace qforge {

std::array<std::size_t, 3> SplitAssignment::sizes() const {
  std::array<std::size_t, 3> n{};
  for (const auto& [_, s] : question_split) ++n[static_cast<std::size_t>(s)];
  return n;
}

SplitAssignment topic_split(const std::vector<SplitItem>& items, const std::array<double, 3>& ratios,
                            std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error("invalid_argument", "split ratios must lie in [0, 1]");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("invalid_argument", "split ratios must sum to 1");

  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& it : items) groups[it.topic].push_back(it.id);

  std::vector<std::pair<std::string, std::size_t>> order;
  order.reserve(groups.size());
  for (const auto& [topic, ids] : groups) order.emplace_back(topic, ids.size());
  Rng rng(seed);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const double total = static_cast<double>(items.size());
  std::array<double, 3> target{};
  for (std::size_t k = 0; k < 3; ++k) target[k] = ratios[k] * total;
  double smallest_target = total;
  for (std::size_t k = 0; k < 3; ++k) {
    if (ratios[k] > 0.0) smallest_target = std::min(smallest_target, target[k]);
  }

  SplitAssignment out;
  std::array<double, 3> filled{};
  for (const auto& [topic, size] : order) {
    std::size_t pick = 0;
    double best = -1e300;
    for (std::size_t k = 0; k < 3; ++k) {
      if (ratios[k] <= 0.0) continue;
      const double deficit = target[k] - filled[k];
      if (deficit > best) {
        best = deficit;
        pick = k;
      }
    }
    if (static_cast<double>(size) > smallest_target) {
      out.warnings.push_back("topic '" + topic + "' has " + std::to_string(size) +
                             " questions, more than the smallest split target");
    }
    filled[pick] += static_cast<double>(size);
    const Split s = static_cast<Split>(pick);
    out.topic_split[topic] = s;
    for (const auto& id : groups[topic]) out.question_split[id] = s;
  }
  return out;
}

SplitAssignment topic_split(const std::vector<Question>& questions,
                            const std::array<double, 3>& ratios, std::uint64_t seed) {
  std::vector<SplitItem> items;
  items.reserve(questions.size());
  for (const auto& q : questions) items.push_back(SplitItem{q.id, q.prompt_pair.topic.concept_text});
  return topic_split(items, ratios, seed);
}

DatasetExample to_dataset_example(const Question& q) {
  const auto gold = q.gold();
  if (!gold) throw Error("missing_gold", "question " + q.id + " has no kept gold label");
  const UsageFlags usage = detect_usage(q.text, q.prompt_pair);
  return DatasetExample{q.id,
                        q.text,
                        *gold,
                        q.prompt_pair.topic.concept_text,
                        q.prompt_pair.relational.phrase,
                        usage.relational_used,
                        usage.topic_used};
}

ExportPaths export_jsonl(const std::vector<Question>& questions, const SplitAssignment& assignment,
                         const std::filesystem::path& out_dir, bool withhold_test_answers) {
  std::array<std::vector<std::string>, 3> lines;
  for (const auto& q : questions) {
    if (q.state != QuestionState::Validated && q.state != QuestionState::Exported) {
      throw Error("invalid_state", "question " + q.id + " is " + std::string(to_string(q.state)) +
                                       "; only validated questions can be exported");
    }
    const DatasetExample ex = to_dataset_example(q);
    auto it = assignment.question_split.find(q.id);
    if (it == assignment.question_split.end()) {
      throw Error("invalid_argument", "question " + q.id + " has no split assignment");
    }
    const bool keep_answer = !(withhold_test_answers && it->second == Split::Test);
    lines[static_cast<std::size_t>(it->second)].push_back(dataset_record(ex, keep_answer).dump());
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  ExportPaths paths{out_dir / "train.jsonl", out_dir / "dev.jsonl", out_dir / "test.jsonl"};
  const std::array<std::filesystem::path, 3> files{paths.train, paths.dev, paths.test};
  for (std::size_t k = 0; k < 3; ++k) {
    std::ofstream out(files[k], std::ios::binary);
    if (!out) throw Error("io_error", "cannot write " + files[k].string());
    for (const auto& l : lines[k]) out << l << '\n';
    if (!out) throw Error("io_error", "write failed for " + files[k].string());
  }
  return paths;
}

std::vector<DatasetExample> read_dataset_jsonl(const std::filesystem::path& path) {
  std::vector<DatasetExample> out;
  for (const auto& row : read_jsonl(path)) out.push_back(parse_dataset_record(row));
  return out;
}

StatsReport dataset_stats(const std::vector<DatasetExample>& examples) {
  StatsReport r;
  r.n_questions = examples.size();
  if (examples.empty()) return r;
  const double n = static_cast<double>(examples.size());

  std::set<std::string> words;
  std::map<std::string, std::size_t> topics;
  std::map<std::string, std::size_t> relations;
  std::size_t no = 0;
  std::size_t rel_used = 0;
  std::size_t topic_used = 0;
  std::vector<double> lengths;
  lengths.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto tokens = text::tokenize(ex.question);
    lengths.push_back(static_cast<double>(tokens.size()));
    words.insert(tokens.begin(), tokens.end());
    if (ex.answer == Answer::No) ++no;
    if (ex.relational_used) ++rel_used;
    if (ex.topic_used) ++topic_used;
    ++topics[ex.topic_prompt];
    ++relations[ex.relational_prompt];
  }
  double mean = 0.0;
  for (double l : lengths) mean += l;
  mean /= n;
  double var = 0.0;
  for (double l : lengths) var += (l - mean) * (l - mean);
  var /= n;

  auto majority = [](const std::map<std::string, std::size_t>& m) {
    std::size_t top = 0;
    for (const auto& [_, c] : m) top = std::max(top, c);
    return top;
  };

  r.pct_no_answer = 100.0 * static_cast<double>(no) / n;
  r.n_distinct_words = words.size();
  r.avg_question_len_words = mean;
  r.std_question_len_words = std::sqrt(var);
  r.n_distinct_topic_prompts = topics.size();
  r.n_distinct_relational_prompts = relations.size();
  r.pct_majority_relational = 100.0 * static_cast<double>(majority(relations)) / n;
  r.pct_majority_topic = 100.0 * static_cast<double>(majority(topics)) / n;
  r.pct_relational_used = 100.0 * static_cast<double>(rel_used) / n;
  r.pct_topic_used = 100.0 * static_cast<double>(topic_used) / n;
  return r;
}

nlohmann::ordered_json stats_to_json(const StatsReport& r) {
  nlohmann::ordered_json j;
  j["n_questions"] = r.n_questions;
  j["pct_no_answer"] = r.pct_no_answer;
  j["n_distinct_words"] = r.n_distinct_words;
  j["avg_question_len_words"] = r.avg_question_len_words;
  j["std_question_len_words"] = r.std_question_len_words;
  j["n_distinct_topic_prompts"] = r.n_distinct_topic_prompts;
  j["n_distinct_relational_prompts"] = r.n_distinct_relational_prompts;
  j["pct_majority_relational"] = r.pct_majority_relational;
  j["pct_majority_topic"] = r.pct_majority_topic;
  j["pct_relational_used"] = r.pct_relational_used;
  j["pct_topic_used"] = r.pct_topic_used;
  return j;
}

std::string format_stats_table(const StatsReport& r) {
  std::ostringstream out;
  auto row = [&out](const char* name, const std::string& value) {
    out << name;
    for (std::size_t i = std::char_traits<char>::length(name); i < 34; ++i) out << ' ';
    out << value << '\n';
  };
  auto fixed1 = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(1);
    s << v;
    return s.str();
  };
  row("# Distinct questions", std::to_string(r.n_questions));
  row("% \"no\" answer", fixed1(r.pct_no_answer));
  row("# Distinct words in questions", std::to_string(r.n_distinct_words));
  row("Avg. question length (words)", fixed1(r.avg_question_len_words));
  row("Std question length (words)", fixed1(r.std_question_len_words));
  row("# Distinct topic prompts", std::to_string(r.n_distinct_topic_prompts));
  row("# Distinct relational prompts", std::to_string(r.n_distinct_relational_prompts));
  row("% Majority relational prompt", fixed1(r.pct_majority_relational));
  row("% Majority topic prompt", fixed1(r.pct_majority_topic));
  row("% Relational prompt used", fixed1(r.pct_relational_used));
  row("% Topic prompt used", fixed1(r.pct_topic_used));
  return out.str();
}

}  // namespace qforge
