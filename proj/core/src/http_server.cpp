#include "qforge/http_server.hpp"

#include <httplib.h>

#include "qforge/error.hpp"
#include "qforge/json_io.hpp"

namespace qforge {
namespace {

using nlohmann::json;

std::string bearer(const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) {
    throw Error("unauthorized", "missing bearer token");
  }
  return h.substr(prefix.size());
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error("bad_request", "body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error("bad_request", std::string("malformed JSON: ") + e.what());
  }
}

void send_json(httplib::Response& res, int status, const json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& detail) {
  send_json(res, status, json{{"error", code}, {"detail", detail}});
}

json metric(const MetricBand& m) {
  return json{{"value", m.value}, {"band", to_string(m.band)}, {"n", m.n}};
}

}  // namespace

json to_json_value(const Task& t) {
  if (t.compose) return json{{"kind", "compose"}, {"prompt_pair", t.compose->prompt_pair}};
  return json{{"kind", "validate"},
              {"question", {{"id", t.validate->question_id}, {"text", t.validate->text}}},
              {"is_expert_check", t.validate->is_expert_check}};
}

json to_json_value(const SubmitResult& r) {
  return json{{"question_id", r.question_id},
              {"model_answer", to_string(r.model_answer)},
              {"confidence", r.confidence},
              {"model_version", r.model_version},
              {"points_preview", r.points_preview},
              {"usage", {{"topic_used", r.usage.topic_used}, {"relational_used", r.usage.relational_used}}}};
}

json to_json_value(const ValidationResult& r) {
  json j{{"delta", r.delta}, {"decided", r.decided}};
  j["decision"] = r.decision ? json(*r.decision) : json(nullptr);
  return j;
}

json to_json_value(const FeedbackReport& r) {
  return json{{"ai_beat_rate", metric(r.ai_beat_rate)},
              {"pass_verification_rate", metric(r.pass_verification_rate)},
              {"expert_check_accuracy", metric(r.expert_check_accuracy)},
              {"insufficient_data", r.insufficient_data},
              {"window_start", r.window_start},
              {"window_end", r.window_end}};
}

json to_json_value(const Notification& n) {
  return json{{"player_id", n.player_id},
              {"kind", to_string(n.kind)},
              {"question_id", n.question_id},
              {"message", n.message},
              {"delta", n.delta},
              {"delivered", n.delivered}};
}

json to_json_value(const LeaderboardEntry& e) {
  return json{{"player_id", e.player_id},
              {"points", e.points},
              {"payouts", e.payout.count},
              {"payout_cents", e.payout.amount_cents}};
}

json to_json_value(const RetrainEvent& e) {
  json j{{"question_count", e.question_count},
         {"version", e.version},
         {"training_examples", e.training_examples},
         {"started_at", e.started_at},
         {"finished_at", e.finished_at}};
  j["threshold"] = e.threshold ? json(*e.threshold) : json(nullptr);
  return j;
}

json to_json_value(const Session& s) {
  return json{{"session_id", s.session_id},
              {"token", s.session_id},
              {"player_id", s.player_id},
              {"started_at", s.started_at},
              {"idle_timeout_ms", s.idle_timeout_ms}};
}

int status_for(const std::string& code) {
  if (code == "unauthorized" || code == "session_expired") return 401;
  if (code == "ineligible") return 403;
  if (code == "not_found") return 404;
  if (code == "duplicate" || code == "already_validated" || code == "double_adjustment") return 409;
  if (code == "answerer_unavailable") return 503;
  return 400;
}

HttpServer::HttpServer(GameService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  server_->set_tcp_nodelay(true);
  server_->new_task_queue = [] { return new httplib::ThreadPool(64); };
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  using Handler = std::function<json(const httplib::Request&)>;
  auto wrap = [this](Handler h, bool idempotent) {
    return [this, h, idempotent](const httplib::Request& req, httplib::Response& res) {
      std::pair<std::string, std::string> key;
      const bool use_key = idempotent && req.has_header("Idempotency-Key");
      if (use_key) {
        key = {req.get_header_value("Authorization"), req.get_header_value("Idempotency-Key")};
        std::lock_guard lock(idem_mu_);
        auto it = idem_.find(key);
        if (it != idem_.end()) {
          res.status = it->second.first;
          res.set_content(it->second.second, "application/json");
          return;
        }
      }
      try {
        send_json(res, 200, h(req));
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), e.code(), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "bad_request", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
      if (use_key && res.status < 500) {
        std::lock_guard lock(idem_mu_);
        idem_.emplace(key, std::make_pair(res.status, res.body));
      }
    };
  };
  auto& s = *server_;

  s.Post("/session", wrap([this](const httplib::Request& req) {
           const json b = body_of(req);
           return to_json_value(service_.open_session(b.at("player_id").get<std::string>()));
         }, false));

  s.Get("/task", wrap([this](const httplib::Request& req) {
          return to_json_value(service_.next_task(bearer(req)));
        }, false));

  s.Post("/question", wrap([this](const httplib::Request& req) {
           const std::string token = bearer(req);
           const json b = body_of(req);
           std::optional<PromptPair> pair;
           if (b.contains("prompt_pair") && !b.at("prompt_pair").is_null()) pair = b.at("prompt_pair").get<PromptPair>();
           const Answer a = parse_answer(b.at("author_answer").get<std::string>());
           return to_json_value(service_.submit_question(token, b.at("text").get<std::string>(), pair, a));
         }, true));

  s.Post(R"(/question/([^/]+)/feedback)", wrap([this](const httplib::Request& req) {
           const std::string token = bearer(req);
           const json b = body_of(req);
           const int points = service_.submit_feedback(token, req.matches[1], b.at("model_correct").get<bool>());
           return json{{"question_id", std::string(req.matches[1])}, {"points", points}};
         }, true));

  s.Post("/validation", wrap([this](const httplib::Request& req) {
           const std::string token = bearer(req);
           const json b = body_of(req);
           const ValidationLabel l = parse_validation_label(b.at("label").get<std::string>());
           return to_json_value(service_.submit_validation(token, b.at("question_id").get<std::string>(), l));
         }, true));

  s.Get("/feedback-report", wrap([this](const httplib::Request& req) {
          std::int64_t window = 0;
          if (req.has_param("window_ms")) {
            try {
              window = std::stoll(req.get_param_value("window_ms"));
            } catch (const std::exception&) {
              throw Error("bad_request", "window_ms must be an integer");
            }
          }
          return to_json_value(service_.feedback_report(bearer(req), window));
        }, false));

  s.Get("/notifications", wrap([this](const httplib::Request& req) {
          json arr = json::array();
          for (const auto& n : service_.notifications(bearer(req))) arr.push_back(to_json_value(n));
          return arr;
        }, false));

  s.Get("/leaderboard", wrap([this](const httplib::Request&) {
          json arr = json::array();
          for (const auto& e : service_.leaderboard()) arr.push_back(to_json_value(e));
          return arr;
        }, false));

  s.Post("/retrain", wrap([this](const httplib::Request&) {
           service_.request_retrain();
           return json{{"queued", true}};
         }, false));

  s.Get("/retrains", wrap([this](const httplib::Request&) {
          json arr = json::array();
          for (const auto& e : service_.retrain_events()) arr.push_back(to_json_value(e));
          return arr;
        }, false));

  s.Post("/answer", wrap([this](const httplib::Request& req) {
           const json b = body_of(req);
           const AnswerResult r = service_.answer(b.at("question").get<std::string>());
           return json{{"label", to_string(r.label)}, {"confidence", r.confidence}};
         }, false));

  s.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string scope = req.has_param("scope") ? req.get_param_value("scope") : "kept";
    std::string out;
    if (scope == "kept") {
      for (const auto& ex : service_.export_kept()) out += dataset_record(ex).dump() + "\n";
    } else if (scope == "all") {
      for (const auto& q : service_.questions()) out += json(q).dump() + "\n";
    } else {
      send_error(res, 400, "bad_request", "scope must be kept or all");
      return;
    }
    res.set_content(out, "application/x-ndjson");
  });

  s.Get("/ledger", [this](const httplib::Request&, httplib::Response& res) {
    std::string out;
    for (const auto& e : service_.ledger_events()) out += json(e).dump() + "\n";
    res.set_content(out, "application/x-ndjson");
  });

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"ok":true})", "application/json");
  });
}

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("io_error", "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw Error("io_error", "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  if (server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace qforge
