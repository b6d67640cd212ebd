#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "json.hpp"
#include "qforge/game_service.hpp"

namespace httplib {
class Server;
}

namespace qforge {

nlohmann::json to_json_value(const Task& t);
nlohmann::json to_json_value(const SubmitResult& r);
nlohmann::json to_json_value(const ValidationResult& r);
nlohmann::json to_json_value(const FeedbackReport& r);
nlohmann::json to_json_value(const Notification& n);
nlohmann::json to_json_value(const LeaderboardEntry& e);
nlohmann::json to_json_value(const RetrainEvent& e);
nlohmann::json to_json_value(const Session& s);

// HTTP status for an Error code raised by GameService.
int status_for(const std::string& error_code);

// JSON front end for GameService. Mutating requests may carry an
// `Idempotency-Key` header; a replay from the same session returns the
// cached response without touching the service.
class HttpServer {
 public:
  explicit HttpServer(GameService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port; throws Error("io_error") when binding fails.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  GameService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::mutex idem_mu_;
  std::map<std::pair<std::string, std::string>, std::pair<int, std::string>> idem_;
};

}  // namespace qforge
