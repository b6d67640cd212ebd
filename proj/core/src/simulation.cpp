#include "qforge/simulation.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "qforge/crowd_generator.hpp"
#include "qforge/error.hpp"
#include "qforge/http_server.hpp"
#include "qforge/json_io.hpp"
#include "qforge/scoring.hpp"
#include "qforge/text.hpp"

namespace qforge {
namespace {

const char* const kSyllables[] = {"ba", "ko", "ri", "ta", "mu", "se", "lo", "vi", "dra", "pen",
                                  "gu", "nor", "fi", "zel", "ma", "tho", "kri", "bel", "so", "dun"};

std::string pseudo_word(Rng& rng) {
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_below(2));
  std::string w;
  for (std::size_t i = 0; i < n; ++i) w += kSyllables[rng.uniform_below(std::size(kSyllables))];
  return w;
}

struct Truths {
  std::mutex mu;
  std::map<std::string, GoldLabel> by_text;  // canonical text
  std::map<QuestionId, GoldLabel> experts;

  void put(const std::string& text, GoldLabel g) {
    std::lock_guard lock(mu);
    by_text[text::canonical(text)] = g;
  }
  std::optional<GoldLabel> get(const std::string& text) {
    std::lock_guard lock(mu);
    auto it = by_text.find(text::canonical(text));
    if (it == by_text.end()) return std::nullopt;
    return it->second;
  }
};

struct QuestionLog {
  QuestionId id;
  PlayerId author;
  bool attack = false;
  int model_version = 0;
  bool beat = false;
};

struct Shared {
  const SimOptions* opts = nullptr;
  const SyntheticWorld* world = nullptr;
  std::vector<Triple> attackable;
  Truths truths;
  std::atomic<std::size_t> budget_used{0};
  std::mutex log_mu;
  std::vector<QuestionLog> log;
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string error;

  void fail(const std::string& what) {
    std::lock_guard lock(err_mu);
    if (!failed.exchange(true)) error = what;
  }
};

struct Reply {
  int status = 0;
  nlohmann::json body;
};

class Api {
 public:
  Api(const std::string& host, int port) : cli_(host, port) {
    cli_.set_connection_timeout(5);
    cli_.set_read_timeout(60);
    cli_.set_keep_alive(true);
    cli_.set_tcp_nodelay(true);
  }

  void set_token(const std::string& token) { token_ = token; }

  Reply get(const std::string& path) { return finish(cli_.Get(path, headers())); }
  Reply post(const std::string& path, const nlohmann::json& body) {
    return finish(cli_.Post(path, headers(), body.dump(), "application/json"));
  }
  std::string get_raw(const std::string& path) {
    auto res = cli_.Get(path, headers());
    if (!res || res->status != 200) throw Error("io_error", "GET " + path + " failed");
    return res->body;
  }

 private:
  httplib::Headers headers() const {
    if (token_.empty()) return {};
    return {{"Authorization", "Bearer " + token_}};
  }
  static Reply finish(const httplib::Result& res) {
    if (!res) throw Error("io_error", "service did not respond: " + httplib::to_string(res.error()));
    Reply r;
    r.status = res->status;
    r.body = res->body.empty() ? nlohmann::json() : nlohmann::json::parse(res->body, nullptr, false);
    return r;
  }

  httplib::Client cli_;
  std::string token_;
};

class Agent {
 public:
  Agent(AgentProfile profile, Shared& shared, const std::string& host, int port)
      : profile_(std::move(profile)), shared_(shared), rng_(profile_.seed), api_(host, port) {}

  const AgentProfile& profile() const { return profile_; }
  bool done() const { return done_; }
  long long local_total() const { return local_total_; }

  void open() {
    const Reply r = api_.post("/session", {{"player_id", profile_.id}});
    if (r.status != 200) throw Error("io_error", "session open failed for " + profile_.id);
    api_.set_token(r.body.at("token").get<std::string>());
  }

  void step() {
    if (++steps_ > max_steps()) {
      done_ = true;
      return;
    }
    Reply task = api_.get("/task");
    if (task.status == 401) {
      open();
      return;
    }
    if (task.status == 403) {
      done_ = true;
      return;
    }
    expect(task, "/task");
    if (task.body.at("kind") == "compose") {
      compose(task.body.at("prompt_pair").get<PromptPair>());
    } else {
      idle_composes_ = 0;
      validate(task.body.at("question").at("id").get<std::string>(),
               task.body.at("question").at("text").get<std::string>(),
               task.body.at("is_expert_check").get<bool>());
    }
  }

  std::vector<Notification> fetch_notifications() {
    const Reply r = api_.get("/notifications");
    expect(r, "/notifications");
    std::vector<Notification> out;
    for (const auto& n : r.body) {
      Notification x;
      x.player_id = n.at("player_id").get<std::string>();
      x.kind = n.at("kind") == "answer_flipped" ? NotificationKind::AnswerFlipped
                                                : NotificationKind::QuestionDiscarded;
      x.question_id = n.at("question_id").get<std::string>();
      x.delta = n.at("delta").get<int>();
      out.push_back(std::move(x));
    }
    return out;
  }

  Api& api() { return api_; }

 private:
  std::size_t max_steps() const { return shared_.opts->n_questions * 20 + 200; }

  static void expect(const Reply& r, const std::string& what) {
    if (r.status != 200) throw Error("io_error", what + " returned " + std::to_string(r.status) + ": " + r.body.dump());
  }

  struct Draft {
    std::string text;
    GoldLabel truth = GoldLabel::True;
    Answer author_answer = Answer::Yes;
    bool attack = false;
  };

  Draft draft(const PromptPair& pair) {
    const SyntheticWorld& w = *shared_.world;
    Draft d;
    if (profile_.kind == AgentKind::PatternAttacker && !shared_.attackable.empty()) {
      const Triple& t = shared_.attackable[rng_.uniform_below(shared_.attackable.size())];
      d.text = attack_text(t, profile_.pattern);
      d.truth = GoldLabel::False;
      d.author_answer = Answer::No;
      d.attack = true;
      return d;
    }
    std::vector<const Triple*> about;
    for (const auto& t : w.true_triples) {
      if (t.head == pair.topic.concept_text) about.push_back(&t);
    }
    const Triple& base = about.empty() ? w.true_triples[rng_.uniform_below(w.true_triples.size())]
                                       : *about[rng_.uniform_below(about.size())];
    const double u = rng_.uniform01();
    if (u < 0.05) {
      d.text = "is " + base.tail + " the " + base.head + " of";
      d.truth = GoldLabel::BadQuestion;
      d.author_answer = rng_.bernoulli(0.5) ? Answer::Yes : Answer::No;
      return d;
    }
    if (u < 0.5) {
      d.text = templated_assertion(base.head, base.relation, base.tail).text;
      d.truth = GoldLabel::True;
    } else {
      Triple c = base;
      do {
        c.tail = w.concepts[rng_.uniform_below(w.concepts.size())];
      } while (c.tail == base.tail || w.true_set.count(c) > 0);
      d.text = templated_assertion(c.head, c.relation, c.tail).text;
      d.truth = GoldLabel::False;
    }
    const Answer right = *to_answer(d.truth);
    d.author_answer = rng_.bernoulli(profile_.accuracy) ? right : flip(right);
    return d;
  }

  void compose(const PromptPair& pair) {
    if (shared_.budget_used.fetch_add(1) >= shared_.opts->n_questions) {
      shared_.budget_used.fetch_sub(1);
      if (++idle_composes_ >= shared_.opts->idle_compose_limit) done_ = true;
      return;
    }
    think();
    for (int attempt = 0; attempt < 8; ++attempt) {
      const Draft d = draft(pair);
      shared_.truths.put(d.text, d.truth);
      const Reply sub = api_.post("/question", {{"text", d.text},
                                                {"prompt_pair", pair},
                                                {"author_answer", to_string(d.author_answer)}});
      if (sub.status == 409) continue;
      expect(sub, "/question");
      const QuestionId id = sub.body.at("question_id").get<std::string>();
      const Answer model = parse_answer(sub.body.at("model_answer").get<std::string>());
      const bool model_correct = model == d.author_answer;
      const Reply fb = api_.post("/question/" + id + "/feedback", {{"model_correct", model_correct}});
      expect(fb, "/question/{id}/feedback");
      local_total_ += fb.body.at("points").get<int>();
      std::lock_guard lock(shared_.log_mu);
      shared_.log.push_back(QuestionLog{id, profile_.id, d.attack, sub.body.at("model_version").get<int>(),
                                        !model_correct});
      return;
    }
    shared_.budget_used.fetch_sub(1);
  }

  void think() const {
    if (shared_.opts->think_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(shared_.opts->think_ms));
  }

  ValidationLabel choose_label(GoldLabel truth) {
    if (profile_.kind == AgentKind::LazyValidator) return ValidationLabel::True;
    CrowdConfig cc;
    return sample_label(truth, profile_.accuracy, cc, rng_);
  }

  void validate(const QuestionId& id, const std::string& text, bool expert) {
    std::optional<GoldLabel> truth;
    if (expert) {
      std::lock_guard lock(shared_.truths.mu);
      auto it = shared_.truths.experts.find(id);
      if (it != shared_.truths.experts.end()) truth = it->second;
    } else {
      truth = shared_.truths.get(text);
    }
    const ValidationLabel label = truth ? choose_label(*truth) : ValidationLabel::DontKnow;
    think();
    const Reply r = api_.post("/validation", {{"question_id", id}, {"label", to_string(label)}});
    if (r.status == 409) return;
    expect(r, "/validation");
    local_total_ += r.body.at("delta").get<int>();
  }

  AgentProfile profile_;
  Shared& shared_;
  Rng rng_;
  Api api_;
  bool done_ = false;
  int idle_composes_ = 0;
  std::size_t steps_ = 0;
  long long local_total_ = 0;
};

double rate(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::HonestPlayer:
      return "honest_player";
    case AgentKind::PatternAttacker:
      return "pattern_attacker";
    case AgentKind::LazyValidator:
      return "lazy_validator";
    case AgentKind::AccurateValidator:
      return "accurate_validator";
  }
  return "honest_player";
}

AgentKind parse_agent_kind(std::string_view s) {
  for (AgentKind k : {AgentKind::HonestPlayer, AgentKind::PatternAttacker, AgentKind::LazyValidator,
                      AgentKind::AccurateValidator}) {
    if (to_string(k) == s) return k;
  }
  throw Error("bad_enum", "unknown agent kind '" + std::string(s) + "'");
}

void validate_profile(const AgentProfile& p) {
  if (p.id.empty()) throw Error("invalid_argument", "agent id is empty");
  if (!(p.accuracy >= 0.5 && p.accuracy <= 1.0)) {
    throw Error("invalid_argument", "agent " + p.id + ": accuracy must be in [0.5, 1]");
  }
  if (p.kind == AgentKind::PatternAttacker && text::tokenize(p.pattern).size() != 1) {
    throw Error("invalid_argument", "agent " + p.id + ": pattern must be a single token");
  }
}

std::vector<AgentProfile> read_agents(const std::filesystem::path& path) {
  std::vector<AgentProfile> out;
  for (const auto& row : read_jsonl(path)) {
    AgentProfile p;
    p.id = row.at("id").get<std::string>();
    p.kind = parse_agent_kind(row.at("kind").get<std::string>());
    p.accuracy = row.value("accuracy", p.accuracy);
    p.pattern = row.value("pattern", p.pattern);
    p.seed = row.value("seed", std::uint64_t{0});
    validate_profile(p);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<AgentProfile> default_agents(std::uint64_t seed) {
  std::vector<AgentProfile> out;
  auto add = [&](const std::string& id, AgentKind k, double acc) {
    out.push_back(AgentProfile{id, k, acc, "never", seed * 1000 + out.size() + 1});
  };
  add("attacker-1", AgentKind::PatternAttacker, 0.85);
  add("attacker-2", AgentKind::PatternAttacker, 0.85);
  add("honest-1", AgentKind::HonestPlayer, 0.9);
  add("honest-2", AgentKind::HonestPlayer, 0.9);
  add("honest-3", AgentKind::HonestPlayer, 0.85);
  add("validator-1", AgentKind::AccurateValidator, 0.95);
  add("validator-2", AgentKind::AccurateValidator, 0.95);
  add("lazy-1", AgentKind::LazyValidator, 0.5);
  return out;
}

ConceptGraph SyntheticWorld::graph() const {
  ConceptGraph g;
  g.triples = true_triples;
  return g;
}

SyntheticWorld make_world(std::size_t n_concepts, std::size_t triples_per_concept, Rng& rng) {
  if (n_concepts < 2) throw Error("invalid_argument", "world needs at least 2 concepts");
  SyntheticWorld w;
  std::set<std::string> seen;
  while (w.concepts.size() < n_concepts) {
    std::string c = pseudo_word(rng);
    if (seen.insert(c).second) w.concepts.push_back(std::move(c));
  }
  const auto relations = registered_relations();
  for (const auto& head : w.concepts) {
    for (std::size_t k = 0; k < triples_per_concept; ++k) {
      Triple t;
      t.head = head;
      t.relation = relations[rng.uniform_below(relations.size())];
      do {
        t.tail = w.concepts[rng.uniform_below(w.concepts.size())];
      } while (t.tail == head);
      if (w.true_set.insert(t).second) w.true_triples.push_back(t);
    }
  }
  return w;
}

std::string attack_text(const Triple& t, const std::string& pattern) {
  const std::string base = templated_assertion(t.head, t.relation, t.tail).text;
  const auto pos = base.find(" is ");
  if (pos == std::string::npos) return {};
  return base.substr(0, pos) + " is " + pattern + " " + base.substr(pos + 4);
}

SimReport run_simulation(const SimOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& a : opts.agents) validate_profile(a);
  SimReport report;
  report.n_agents = opts.agents.size();

  Rng rng(opts.seed);
  const SyntheticWorld world = make_world(opts.world_concepts, opts.triples_per_concept, rng);
  BankBuild bank = build_bank(world.graph(), opts.cfg.top_n_concepts, default_relational_prompts(), opts.cfg);
  Rng seed_rng = rng.derive(1);
  const SeedCorpus corpus = build_seed_corpus(world.true_triples, bank.bank, seed_rng);

  Rng crowd_rng = rng.derive(2);
  CrowdConfig cc;
  cc.n_questions = opts.crowd_questions;
  const CrowdData crowd = generate_crowd(cc, crowd_rng);
  const VerifierTraining vt = train_verifier(verifier_examples(crowd, opts.cfg), opts.cfg, opts.seed);
  report.verifier_heldout_accuracy = vt.heldout_accuracy;

  Shared shared;
  shared.opts = &opts;
  shared.world = &world;
  for (const auto& t : world.true_triples) {
    if (!attack_text(t, "never").empty()) shared.attackable.push_back(t);
  }

  ServiceOptions so;
  so.cfg = opts.cfg;
  so.bank = bank.bank;
  so.answerer = std::make_shared<AnswerModel>(train_answerer(corpus.examples, opts.cfg, opts.seed, 0));
  so.verifier = vt.model;
  so.seed_examples = corpus.examples;
  so.inline_jobs = opts.parallelism <= 1;
  Rng expert_rng = rng.derive(3);
  for (std::size_t i = 0; i < opts.expert_items && !world.true_triples.empty(); ++i) {
    const Triple& t = world.true_triples[expert_rng.uniform_below(world.true_triples.size())];
    ExpertItem x;
    x.id = "x" + std::to_string(i + 1);
    if (expert_rng.bernoulli(0.5)) {
      x.text = templated_assertion(t.head, t.relation, t.tail).text;
      x.gold = GoldLabel::True;
    } else {
      x.text = corrupt_triple(t, bank.bank, expert_rng, world.true_set).text;
      x.gold = GoldLabel::False;
    }
    shared.truths.experts[x.id] = x.gold;
    so.expert_pool.push_back(std::move(x));
  }

  GameService service(so);
  HttpServer server(service);
  const int port = server.start(opts.host, 0);

  std::vector<std::unique_ptr<Agent>> agents;
  for (const auto& p : opts.agents) agents.push_back(std::make_unique<Agent>(p, shared, opts.host, port));

  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.parallelism, agents.size()));
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers && !agents.empty(); ++w) {
    threads.emplace_back([&, w] {
      try {
        std::vector<Agent*> mine;
        for (std::size_t i = w; i < agents.size(); i += workers) mine.push_back(agents[i].get());
        for (auto* a : mine) a->open();
        bool any = true;
        while (any && !shared.failed) {
          any = false;
          for (auto* a : mine) {
            if (a->done()) continue;
            a->step();
            any = true;
          }
        }
      } catch (const std::exception& e) {
        shared.fail(e.what());
      }
    });
  }
  for (auto& t : threads) t.join();
  service.wait_idle();

  try {
    std::map<PlayerId, long long> local;
    std::map<std::pair<QuestionId, NotificationKind>, std::size_t> seen;
    for (auto& a : agents) {
      long long total = a->local_total();
      for (const auto& n : a->fetch_notifications()) {
        total += n.delta;
        ++seen[{n.question_id, n.kind}];
        ++report.notifications;
        if (n.player_id != a->profile().id) report.notifications_ok = false;
      }
      local[a->profile().id] = total;
    }

    Api admin(opts.host, port);
    std::vector<LedgerEvent> events;
    for (const auto& row : parse_jsonl(admin.get_raw("/ledger"), "/ledger")) events.push_back(row.get<LedgerEvent>());
    std::map<PlayerId, long long> board;
    for (const auto& e : nlohmann::json::parse(admin.get_raw("/leaderboard"))) {
      board[e.at("player_id").get<std::string>()] = e.at("points").get<long long>();
    }
    for (const auto& [player, total] : local) {
      const long long fold = replay_total(events, player);
      const long long shown = board.count(player) ? board.at(player) : 0;
      if (fold != shown || fold != total) ++report.ledger_mismatches;
    }
    report.ledger_ok = report.ledger_mismatches == 0;

    std::set<std::pair<QuestionId, NotificationKind>> adjusted;
    for (const auto& e : events) {
      if (e.kind == LedgerKind::DiscardPenalty || e.kind == LedgerKind::FlipPenalty) {
        ++report.adjustments;
        const auto kind = e.kind == LedgerKind::FlipPenalty ? NotificationKind::AnswerFlipped
                                                            : NotificationKind::QuestionDiscarded;
        adjusted.insert({*e.question_id, kind});
        auto it = seen.find({*e.question_id, kind});
        if (it == seen.end() || it->second != 1) report.notifications_ok = false;
      }
    }
    for (const auto& [key, n] : seen) {
      if (n != 1 || adjusted.count(key) == 0) report.notifications_ok = false;
    }

    std::vector<Question> questions;
    for (const auto& row : parse_jsonl(admin.get_raw("/export?scope=all"), "/export")) {
      questions.push_back(row.get<Question>());
    }
    report.n_questions = questions.size();
    std::size_t kept_right = 0;
    for (const auto& q : questions) {
      for (const auto& v : q.validations) {
        if (v.validator_id == q.author_id) ++report.self_validations;
      }
      if (q.state == QuestionState::Pending) {
        ++report.n_pending;
        continue;
      }
      ++report.n_decided;
      if (q.state == QuestionState::Discarded) {
        ++report.n_discarded;
        continue;
      }
      ++report.n_kept;
      const auto truth = shared.truths.get(q.text);
      if (truth && q.gold() && to_gold(*q.gold()) == *truth) ++kept_right;
    }
    report.discard_rate = rate(report.n_discarded, report.n_decided);
    report.verifier_accuracy_kept = rate(kept_right, report.n_kept);

    report.retrains = service.retrain_events();
  } catch (const std::exception& e) {
    shared.fail(e.what());
  }

  std::map<int, VersionBeat> by_version;
  std::size_t before_beats = 0, after_beats = 0;
  for (const auto& l : shared.log) {
    auto& vb = by_version[l.model_version];
    vb.version = l.model_version;
    ++vb.all_n;
    if (l.beat) ++vb.all_beats;
    if (!l.attack) continue;
    ++vb.attack_n;
    if (l.beat) ++vb.attack_beats;
    if (l.model_version == 0) {
      ++report.attacker_n_before;
      if (l.beat) ++before_beats;
    } else {
      ++report.attacker_n_after;
      if (l.beat) ++after_beats;
    }
  }
  for (const auto& [v, vb] : by_version) report.by_version.push_back(vb);
  report.attacker_beat_before = rate(before_beats, report.attacker_n_before);
  report.attacker_beat_after = rate(after_beats, report.attacker_n_after);

  agents.clear();  // closes client connections so server workers exit promptly
  server.stop();
  if (shared.failed) report.error = shared.error;
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

nlohmann::json sim_report_to_json(const SimReport& r) {
  nlohmann::json versions = nlohmann::json::array();
  for (const auto& v : r.by_version) {
    versions.push_back({{"version", v.version},
                        {"attack_n", v.attack_n},
                        {"attack_beat_rate", rate(v.attack_beats, v.attack_n)},
                        {"all_n", v.all_n},
                        {"beat_rate", rate(v.all_beats, v.all_n)}});
  }
  nlohmann::json retrains = nlohmann::json::array();
  for (const auto& e : r.retrains) retrains.push_back(to_json_value(e));
  nlohmann::json j{{"n_agents", r.n_agents},
                   {"n_questions", r.n_questions},
                   {"beat_rate_by_version", versions},
                   {"retrains", retrains},
                   {"attacker_beat_before", r.attacker_beat_before},
                   {"attacker_beat_after", r.attacker_beat_after},
                   {"attacker_n_before", r.attacker_n_before},
                   {"attacker_n_after", r.attacker_n_after},
                   {"n_decided", r.n_decided},
                   {"n_kept", r.n_kept},
                   {"n_discarded", r.n_discarded},
                   {"n_pending", r.n_pending},
                   {"discard_rate", r.discard_rate},
                   {"verifier_accuracy_kept", r.verifier_accuracy_kept},
                   {"verifier_heldout_accuracy", r.verifier_heldout_accuracy},
                   {"ledger_ok", r.ledger_ok},
                   {"ledger_mismatches", r.ledger_mismatches},
                   {"self_validations", r.self_validations},
                   {"notifications_ok", r.notifications_ok},
                   {"adjustments", r.adjustments},
                   {"notifications", r.notifications},
                   {"runtime_seconds", r.runtime_seconds}};
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
  return j;
}

}  // namespace qforge
