#include <httplib.h>

#include "json.hpp"
#include "qforge/answer_loop.hpp"
#include "qforge/error.hpp"
#include "qforge/json_io.hpp"
#include "qforge/leakage.hpp"

namespace qforge {

HttpAnswerer::HttpAnswerer(std::string host, int port, int version)
    : host_(std::move(host)), port_(port), version_(version) {}

AnswerResult HttpAnswerer::answer(std::string_view question_text) const {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(30);
  const nlohmann::json body{{"question", std::string(question_text)}};
  auto res = cli.Post("/answer", body.dump(), "application/json");
  if (!res) throw Error("answerer_unavailable", "no response from " + host_ + ":" + std::to_string(port_));
  if (res->status != 200) {
    throw Error("answerer_unavailable", "answer endpoint returned " + std::to_string(res->status));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    AnswerResult r;
    r.label = parse_answer(j.at("label").get<std::string>());
    r.confidence = j.value("confidence", 0.5);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error("parse_error", std::string("bad answer payload: ") + e.what());
  }
}

HttpSnippetSource::HttpSnippetSource(std::string host, int port, std::string path)
    : host_(std::move(host)), port_(port), path_(std::move(path)) {}

std::optional<SnippetSet> HttpSnippetSource::search(const std::string& query) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(30);
  auto res = cli.Get(path_, httplib::Params{{"q", query}}, httplib::Headers{});
  if (!res || res->status != 200) return std::nullopt;
  try {
    SnippetSet s = nlohmann::json::parse(res->body).get<SnippetSet>();
    s.query = query;
    return s;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace qforge
