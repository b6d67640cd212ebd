#include "qforge/json_io.hpp"

#include <fstream>
#include <sstream>

#include "qforge/error.hpp"

namespace qforge {
namespace {

template <class T>
T enum_from(const json& j, T (*parse)(std::string_view)) {
  return parse(j.get<std::string>());
}

}  // namespace

void to_json(json& j, const RelationalPrompt& p) {
  j = json{{"phrase", p.phrase}, {"category", to_string(p.category)}};
}

void from_json(const json& j, RelationalPrompt& p) {
  p = make_relational_prompt(j.at("phrase").get<std::string>(),
                             enum_from(j.at("category"), parse_relation_category));
}

void to_json(json& j, const TopicPrompt& p) {
  j = json{{"concept", p.concept_text}, {"rank_score", p.rank_score}};
}

void from_json(const json& j, TopicPrompt& p) {
  p = make_topic_prompt(j.at("concept").get<std::string>(), j.value("rank_score", 0.0));
}

void to_json(json& j, const PromptPair& p) { j = json{{"topic", p.topic}, {"relational", p.relational}}; }

void from_json(const json& j, PromptPair& p) {
  p.topic = j.at("topic").get<TopicPrompt>();
  p.relational = j.at("relational").get<RelationalPrompt>();
}

void to_json(json& j, const Validation& v) {
  j = json{{"validator_id", v.validator_id},
           {"label", to_string(v.label)},
           {"is_expert_check", v.is_expert_check},
           {"timestamp", v.timestamp}};
}

void from_json(const json& j, Validation& v) {
  v.validator_id = j.at("validator_id").get<std::string>();
  v.label = enum_from(j.at("label"), parse_validation_label);
  v.is_expert_check = j.value("is_expert_check", false);
  v.timestamp = j.value("timestamp", TimestampMs{0});
}

void to_json(json& j, const GoldDecision& d) {
  j = json{{"label", to_string(d.label)}, {"confidence", d.confidence}, {"verdict", to_string(d.verdict)}};
}

void from_json(const json& j, GoldDecision& d) {
  d.label = enum_from(j.at("label"), parse_gold_label);
  d.confidence = j.at("confidence").get<double>();
  d.verdict = enum_from(j.at("verdict"), parse_verdict);
}

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id},
           {"text", q.text},
           {"prompt_pair", q.prompt_pair},
           {"author_id", q.author_id},
           {"author_answer", to_string(q.author_answer)},
           {"model_answer", to_string(q.model_answer)},
           {"model_confidence", q.model_confidence},
           {"model_version", q.model_version},
           {"feedback_given", q.feedback_given},
           {"author_marked_model_correct", q.author_marked_model_correct},
           {"validations", q.validations},
           {"state", to_string(q.state)},
           {"created_at", q.created_at},
           {"decided_at", q.decided_at},
           {"leaked", q.leaked}};
  j["decision"] = q.decision ? json(*q.decision) : json(nullptr);
}

void from_json(const json& j, Question& q) {
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.prompt_pair = j.at("prompt_pair").get<PromptPair>();
  q.author_id = j.at("author_id").get<std::string>();
  q.author_answer = enum_from(j.at("author_answer"), parse_answer);
  q.model_answer = enum_from(j.at("model_answer"), parse_answer);
  q.model_confidence = j.value("model_confidence", 0.5);
  q.model_version = j.value("model_version", 0);
  q.feedback_given = j.value("feedback_given", false);
  q.author_marked_model_correct = j.value("author_marked_model_correct", false);
  q.validations = j.value("validations", std::vector<Validation>{});
  q.state = enum_from(j.at("state"), parse_question_state);
  q.created_at = j.value("created_at", TimestampMs{0});
  q.decided_at = j.value("decided_at", TimestampMs{0});
  q.leaked = j.value("leaked", false);
  if (j.contains("decision") && !j.at("decision").is_null()) {
    q.decision = j.at("decision").get<GoldDecision>();
  } else {
    q.decision.reset();
  }
}

void to_json(json& j, const LedgerEvent& e) {
  j = json{{"player_id", e.player_id},
           {"kind", to_string(e.kind)},
           {"delta", e.delta},
           {"at", e.at}};
  j["question_id"] = e.question_id ? json(*e.question_id) : json(nullptr);
}

void from_json(const json& j, LedgerEvent& e) {
  e.player_id = j.at("player_id").get<std::string>();
  e.kind = enum_from(j.at("kind"), parse_ledger_kind);
  e.delta = j.at("delta").get<int>();
  e.at = j.value("at", TimestampMs{0});
  if (j.contains("question_id") && !j.at("question_id").is_null()) {
    e.question_id = j.at("question_id").get<std::string>();
  } else {
    e.question_id.reset();
  }
}

void to_json(json& j, const SnippetSet& s) {
  j = json{{"query", s.query}, {"snippets", s.snippets}};
  if (s.featured) j["featured"] = *s.featured;
}

void from_json(const json& j, SnippetSet& s) {
  s.query = j.value("query", std::string{});
  s.snippets = j.value("snippets", std::vector<std::string>{});
  if (j.contains("featured") && j.at("featured").is_string()) {
    s.featured = j.at("featured").get<std::string>();
  } else {
    s.featured.reset();
  }
}

void to_json(json& j, const SeedExample& s) {
  j = json{{"text", s.text}, {"label", to_string(s.label)}, {"source", to_string(s.source)}};
}

void from_json(const json& j, SeedExample& s) {
  s.text = j.at("text").get<std::string>();
  if (s.text.empty()) throw Error("parse_error", "seed example text is empty");
  s.label = enum_from(j.at("label"), parse_answer);
  s.source = j.contains("source") ? parse_seed_source(j.at("source").get<std::string>())
                                  : SeedSource::TwentyQStyle;
}

void to_json(json& j, const VerifierFeatureVector& fv) { j = fv.counts; }

void from_json(const json& j, VerifierFeatureVector& fv) {
  fv.counts = j.get<std::map<std::string, int>>();
}

void to_json(json& j, const VerifierModel& m) {
  j = json{{"classes", {"true", "false", "bad_question"}}, {"bias", m.bias}, {"weights", m.weights}};
}

void from_json(const json& j, VerifierModel& m) {
  m.bias = j.at("bias").get<ClassScores>();
  m.weights = j.at("weights").get<std::map<std::string, ClassScores>>();
}

void to_json(json& j, const LeakReport& r) {
  j = json{{"leaked", r.leaked},
           {"best_distance_normalized", r.best_distance_normalized},
           {"best_is_featured", r.best_is_featured},
           {"best_span", {r.best_span.start, r.best_span.end}}};
  j["best_snippet_index"] = r.best_snippet_index ? json(*r.best_snippet_index) : json(nullptr);
}

void to_json(json& j, const AnnotatorStats& s) {
  j = json{{"annotator_id", s.annotator_id},
           {"expert_check_accuracy", s.expert_check_accuracy},
           {"n_expert_checks", s.n_expert_checks},
           {"n_validations", s.n_validations},
           {"n_questions_authored", s.n_questions_authored},
           {"n_questions_discarded", s.n_questions_discarded}};
}

ordered_json dataset_record(const DatasetExample& ex, bool include_answer) {
  ordered_json j;
  j["id"] = ex.id;
  j["question"] = ex.question;
  if (include_answer) j["answer"] = to_string(ex.answer);
  j["topic_prompt"] = ex.topic_prompt;
  j["relational_prompt"] = ex.relational_prompt;
  j["relational_used"] = ex.relational_used;
  j["topic_used"] = ex.topic_used;
  return j;
}

DatasetExample parse_dataset_record(const json& j) {
  DatasetExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.question = j.at("question").get<std::string>();
  if (!j.contains("answer")) throw Error("missing_gold", "record " + ex.id + " has no answer");
  ex.answer = parse_answer(j.at("answer").get<std::string>());
  ex.topic_prompt = j.value("topic_prompt", std::string{});
  ex.relational_prompt = j.value("relational_prompt", std::string{});
  auto flag = [&j](const char* key, const char* alias) {
    if (j.contains(key)) return j.at(key).get<bool>();
    if (j.contains(alias)) return j.at(alias).get<bool>();
    return false;
  };
  ex.relational_used = flag("relational_used", "relational_prompt_used");
  ex.topic_used = flag("topic_used", "topic_prompt_used");
  return ex;
}

json answer_model_to_json(const AnswerModel& m) {
  json weights = json::object();
  const auto& w = m.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) weights[std::to_string(i)] = w[i];
  }
  return json{{"hash_bits", m.hash_bits()}, {"bias", m.bias()}, {"version", m.version()}, {"weights", weights}};
}

AnswerModel answer_model_from_json(const json& j) {
  AnswerModel m(j.at("hash_bits").get<int>());
  m.set_bias(j.at("bias").get<double>());
  m.set_version(j.value("version", 0));
  auto& w = m.mutable_weights();
  for (const auto& [k, v] : j.at("weights").items()) {
    const std::size_t idx = std::stoul(k);
    if (idx >= w.size()) throw Error("parse_error", "weight index " + k + " out of range");
    w[idx] = v.get<double>();
  }
  return m;
}

std::vector<json> parse_jsonl(const std::string& text, const std::string& origin) {
  std::vector<json> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error("parse_error", origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str(), path.string());
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("parse_error", path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace qforge
