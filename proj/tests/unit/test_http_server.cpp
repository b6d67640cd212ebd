#include <gtest/gtest.h>

#include <httplib.h>

#include "json.hpp"
#include "qforge/error.hpp"
#include "qforge/http_server.hpp"
#include "qforge/json_io.hpp"

using namespace qforge;
using nlohmann::json;

namespace {

class FixedAnswerer final : public Answerer {
 public:
  AnswerResult answer(std::string_view) const override { return {Answer::No, 0.75}; }
  int version() const override { return 0; }
};

ServiceOptions options() {
  ServiceOptions o;
  o.bank.concepts = {make_topic_prompt("playing card", 1.0)};
  o.bank.relational_prompts = {make_relational_prompt("is capable of", RelationCategory::CapableOf)};
  o.answerer = std::make_shared<FixedAnswerer>();
  o.inline_jobs = true;
  o.cfg.rng_seed = 3;
  return o;
}

class Api : public ::testing::Test {
 protected:
  void SetUp() override { start(options()); }

  void start(ServiceOptions o) {
    server.reset();
    service = std::make_unique<GameService>(std::move(o));
    server = std::make_unique<HttpServer>(*service);
    port = server->start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  void TearDown() override {
    client.reset();
    server.reset();
  }

  std::string login(const std::string& player) {
    auto r = client->Post("/session", json{{"player_id", player}}.dump(), "application/json");
    EXPECT_EQ(r->status, 200);
    return json::parse(r->body).at("token").get<std::string>();
  }

  httplib::Headers auth(const std::string& token, const std::string& idem = "") {
    httplib::Headers h{{"Authorization", "Bearer " + token}};
    if (!idem.empty()) h.emplace("Idempotency-Key", idem);
    return h;
  }

  httplib::Result post(const std::string& path, const std::string& token, const json& body,
                       const std::string& idem = "") {
    return client->Post(path, auth(token, idem), body.dump(), "application/json");
  }

  json get_json(const std::string& path, const std::string& token) {
    auto r = client->Get(path, auth(token));
    EXPECT_EQ(r->status, 200) << r->body;
    return json::parse(r->body);
  }

  std::unique_ptr<GameService> service;
  std::unique_ptr<HttpServer> server;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

}  // namespace

TEST(StatusMap, Codes) {
  EXPECT_EQ(status_for("unauthorized"), 401);
  EXPECT_EQ(status_for("session_expired"), 401);
  EXPECT_EQ(status_for("ineligible"), 403);
  EXPECT_EQ(status_for("not_found"), 404);
  EXPECT_EQ(status_for("duplicate"), 409);
  EXPECT_EQ(status_for("already_validated"), 409);
  EXPECT_EQ(status_for("answerer_unavailable"), 503);
  EXPECT_EQ(status_for("bad_request"), 400);
}

TEST_F(Api, HealthAndAuth) {
  EXPECT_EQ(client->Get("/health")->status, 200);
  auto r = client->Get("/task");
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(json::parse(r->body).at("error"), "unauthorized");
  EXPECT_EQ(client->Get("/task", auth("bogus"))->status, 401);
  EXPECT_EQ(client->Post("/session", "{not json", "application/json")->status, 400);
  EXPECT_EQ(client->Post("/session", "{}", "application/json")->status, 400);
}

TEST_F(Api, ComposeFlowWithPoints) {
  const auto tok = login("alice");
  const json task = get_json("/task", tok);
  ASSERT_EQ(task.at("kind"), "compose");
  EXPECT_EQ(task.at("prompt_pair").at("topic").at("concept"), "playing card");

  auto r = post("/question", tok,
                {{"text", "A playing card is capable of cutting soft cheese"},
                 {"prompt_pair", task.at("prompt_pair")},
                 {"author_answer", "yes"}});
  ASSERT_EQ(r->status, 200) << r->body;
  const json sub = json::parse(r->body);
  EXPECT_EQ(sub.at("model_answer"), "no");
  EXPECT_EQ(sub.at("points_preview"), 13);
  EXPECT_EQ(sub.at("usage").at("topic_used"), true);
  EXPECT_EQ(sub.at("usage").at("relational_used"), true);

  const std::string id = sub.at("question_id");
  r = post("/question/" + id + "/feedback", tok, {{"model_correct", false}});
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(json::parse(r->body).at("points"), 13);

  const json board = get_json("/leaderboard", tok);
  ASSERT_EQ(board.size(), 1u);
  EXPECT_EQ(board[0].at("player_id"), "alice");
  EXPECT_EQ(board[0].at("points"), 13);

  const json rep = get_json("/feedback-report", tok);
  EXPECT_EQ(rep.at("ai_beat_rate").at("value"), 1.0);
  EXPECT_EQ(rep.at("ai_beat_rate").at("band"), "green");

  EXPECT_EQ(post("/question/q999999/feedback", tok, {{"model_correct", false}})->status, 404);
}

TEST_F(Api, IdempotentReplayDoesNotDoubleSubmit) {
  const auto tok = login("alice");
  get_json("/task", tok);
  const json body{{"text", "Can a playing card fly?"}, {"author_answer", "no"}};
  auto first = post("/question", tok, body, "key-1");
  ASSERT_EQ(first->status, 200) << first->body;
  auto replay = post("/question", tok, body, "key-1");
  EXPECT_EQ(replay->status, 200);
  EXPECT_EQ(replay->body, first->body);
  EXPECT_EQ(service->questions().size(), 1u);

  const std::string id = json::parse(first->body).at("question_id");
  auto fb1 = post("/question/" + id + "/feedback", tok, {{"model_correct", true}}, "key-2");
  auto fb2 = post("/question/" + id + "/feedback", tok, {{"model_correct", true}}, "key-2");
  EXPECT_EQ(fb1->status, 200);
  EXPECT_EQ(fb2->body, fb1->body);
  EXPECT_EQ(service->ledger_events().size(), 1u);

  // no key: a resubmission is a conflict
  get_json("/task", tok);
  EXPECT_EQ(post("/question", tok, body)->status, 409);
}

TEST_F(Api, ValidationFlowAndConflicts) {
  auto o = options();
  o.cfg.compose_fraction = 0.0;
  o.cfg.expert_check_fraction = 0.0;
  start(o);
  const auto alice = login("alice");
  get_json("/task", alice);
  const auto sub = json::parse(post("/question", alice, {{"text", "Can a playing card fly?"}, {"author_answer", "no"}})->body);
  const std::string id = sub.at("question_id");
  post("/question/" + id + "/feedback", alice, {{"model_correct", true}});

  const auto bob = login("bob");
  const json task = get_json("/task", bob);
  ASSERT_EQ(task.at("kind"), "validate");
  EXPECT_EQ(task.at("question").at("id"), id);
  EXPECT_EQ(task.at("is_expert_check"), false);
  auto r = post("/validation", bob, {{"question_id", id}, {"label", "false"}});
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(json::parse(r->body).at("delta"), 2);
  EXPECT_EQ(post("/validation", bob, {{"question_id", id}, {"label", "false"}})->status, 409);
  EXPECT_EQ(post("/validation", bob, {{"question_id", id}, {"label", "perhaps"}})->status, 400);

  const auto carol = login("carol");
  get_json("/task", carol);
  r = post("/validation", carol, {{"question_id", id}, {"label", "false"}});
  const json res = json::parse(r->body);
  EXPECT_EQ(res.at("decided"), true);
  EXPECT_EQ(res.at("decision").at("verdict"), "keep");

  auto exp = client->Get("/export?scope=kept");
  ASSERT_EQ(exp->status, 200);
  const auto rows = parse_jsonl(exp->body);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].at("answer"), "no");
  EXPECT_EQ(client->Get("/export?scope=weird")->status, 400);
  EXPECT_EQ(parse_jsonl(client->Get("/export?scope=all")->body).size(), 1u);

  // ledger stream folds to the leaderboard
  std::map<std::string, long long> fold;
  for (const auto& row : parse_jsonl(client->Get("/ledger")->body)) {
    fold[row.at("player_id").get<std::string>()] += row.at("delta").get<long long>();
  }
  for (const auto& e : get_json("/leaderboard", alice)) {
    EXPECT_EQ(fold.at(e.at("player_id").get<std::string>()), e.at("points").get<long long>());
  }
}

TEST_F(Api, IneligibleIsForbidden) {
  auto o = options();
  o.cfg.compose_fraction = 0.0;
  o.cfg.expert_check_fraction = 1.0;
  o.cfg.gate_min_history = 2;
  o.expert_pool = {{"x1", "Is water wet?", GoldLabel::True}};
  start(o);
  const auto tok = login("eve");
  for (int i = 0; i < 2; ++i) {
    const json t = get_json("/task", tok);
    ASSERT_EQ(t.at("is_expert_check"), true);
    auto r = post("/validation", tok, {{"question_id", "x1"}, {"label", "false"}});
    EXPECT_EQ(json::parse(r->body).at("delta"), -1);
  }
  auto r = client->Get("/task", auth(tok));
  EXPECT_EQ(r->status, 403);
  EXPECT_EQ(json::parse(r->body).at("error"), "ineligible");
}

TEST_F(Api, RetrainAndAnswerEndpoints) {
  auto o = options();
  o.cfg.hash_bits = 10;
  o.seed_examples = {{"a wheel is part of a car", Answer::Yes, SeedSource::TripleTemplate},
                     {"a wheel is part of a banana", Answer::No, SeedSource::TripleTemplate}};
  start(o);
  const auto tok = login("x");
  EXPECT_EQ(post("/retrain", tok, json::object())->status, 200);
  service->wait_idle();
  const json events = get_json("/retrains", tok);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_TRUE(events[0].at("threshold").is_null());
  EXPECT_EQ(events[0].at("version"), 1);

  auto r = client->Post("/answer", json{{"question", "a wheel is part of a car"}}.dump(), "application/json");
  ASSERT_EQ(r->status, 200);
  const json a = json::parse(r->body);
  EXPECT_TRUE(a.at("label") == "yes" || a.at("label") == "no");
  EXPECT_GE(a.at("confidence").get<double>(), 0.5);
}

TEST_F(Api, HttpAnswererTalksToAnswerEndpoint) {
  HttpAnswerer remote("127.0.0.1", port, 4);
  const auto r = remote.answer("anything at all");
  EXPECT_EQ(r.label, Answer::No);
  EXPECT_DOUBLE_EQ(r.confidence, 0.75);
  EXPECT_EQ(remote.version(), 4);
}

TEST(HttpClients, UnavailableAnswererThrows) {
  httplib::Server probe;
  const int dead = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  HttpAnswerer remote("127.0.0.1", dead);
  try {
    remote.answer("x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "answerer_unavailable");
  }
}

TEST(HttpClients, SnippetSourceOverHttp) {
  httplib::Server srv;
  srv.Get("/search", [](const httplib::Request& req, httplib::Response& res) {
    json j{{"query", req.get_param_value("q")}, {"snippets", {"one", "two"}}, {"featured", "feat"}};
    res.set_content(j.dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  HttpSnippetSource source("127.0.0.1", port);
  const auto s = source.search("fish swim");
  srv.stop();
  t.join();
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->query, "fish swim");
  EXPECT_EQ(s->snippets.size(), 2u);
  EXPECT_EQ(s->featured, "feat");
  HttpSnippetSource down("127.0.0.1", port);
  EXPECT_FALSE(down.search("x").has_value());
}
