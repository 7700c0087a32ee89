#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "audit/client.hpp"
#include "audit/config.hpp"
#include "audit/oracle.hpp"

// Concrete transports: the live chat-completion HTTP client and the
// in-process synthetic oracle, plus a local HTTP server that puts the oracle
// behind the same wire shape as a live endpoint.

namespace audit {

namespace detail {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("endpoint url must include a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

inline nlohmann::json chat_request_body(const ModelTarget& target, const QueryStub& stub,
                                        const std::string& prompt) {
  nlohmann::json body{{"model", target.model_id},
                      {"messages", nlohmann::json::array({nlohmann::json{
                                       {"role", "user"},
                                       {"content", prompt}}})},
                      // repetition index rides in the standard free-form
                      // "user" field so the wire shape stays stock
                      {"user", std::to_string(stub.repetition_index)}};
  for (auto it = target.request_params.begin(); it != target.request_params.end(); ++it)
    body[it.key()] = it.value();
  return body;
}

// Extracts choices[0].message.content; a body that does not parse to that
// shape is surfaced as an http_error with the raw body attached.
inline TransportReply reply_from_http_body(int status, const std::string& body) {
  TransportReply reply;
  if (status != 200) {
    reply.kind = TransportReply::Kind::http_error;
    reply.status_code = status;
    reply.detail = body;
    return reply;
  }
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.contains("choices") && j.at("choices").is_array() &&
      !j.at("choices").empty()) {
    const auto& choice = j.at("choices").at(0);
    if (choice.contains("message") && choice.at("message").contains("content")) {
      reply.kind = TransportReply::Kind::ok;
      reply.status_code = 200;
      reply.content = choice.at("message").at("content").get<std::string>();
      return reply;
    }
  }
  reply.kind = TransportReply::Kind::http_error;
  reply.status_code = 200;
  reply.detail = "malformed chat-completion body: " + body;
  return reply;
}

class HttpChatTransport : public Transport {
 public:
  explicit HttpChatTransport(int timeout_s = 120) : timeout_s_(timeout_s) {}

  TransportReply send(const ModelTarget& target, const QueryStub& stub,
                      const std::string& prompt) override {
    detail::ParsedUrl url = detail::split_url(target.endpoint_url);
    httplib::Client client(url.base);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    httplib::Headers headers;
    if (!target.auth_env.empty()) {
      const char* token = std::getenv(target.auth_env.c_str());
      if (token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(url.path, headers,
                           chat_request_body(target, stub, prompt).dump(),
                           "application/json");
    if (!res) {
      TransportReply reply;
      reply.kind = res.error() == httplib::Error::ConnectionTimeout ||
                           res.error() == httplib::Error::Read
                       ? TransportReply::Kind::timeout
                       : TransportReply::Kind::network_error;
      reply.detail = httplib::to_string(res.error());
      return reply;
    }
    return reply_from_http_body(res->status, res->body);
  }

 private:
  int timeout_s_;
};

// In-process adapter over the synthetic oracle.
class OracleTransport : public Transport {
 public:
  OracleTransport(OracleSpec spec, const ConditionMatrix& design)
      : spec_(std::move(spec)), design_(&design) {}

  TransportReply send(const ModelTarget& target, const QueryStub& stub,
                      const std::string& /*prompt*/) override {
    if (spec_.latency_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(spec_.latency_ms));
    TransportReply reply;
    reply.kind = TransportReply::Kind::ok;
    reply.status_code = 200;
    reply.content = oracle_respond(spec_, *design_, target.model_id, stub.coordinate,
                                   stub.repetition_index);
    return reply;
  }

 private:
  OracleSpec spec_;
  const ConditionMatrix* design_;
};

// Routes mock targets to the oracle and everything else over HTTP.
class RoutingTransport : public Transport {
 public:
  RoutingTransport(OracleSpec spec, const ConditionMatrix& design, int timeout_s)
      : oracle_(std::move(spec), design), http_(timeout_s) {}

  TransportReply send(const ModelTarget& target, const QueryStub& stub,
                      const std::string& prompt) override {
    if (target.is_mock()) return oracle_.send(target, stub, prompt);
    return http_.send(target, stub, prompt);
  }

 private:
  OracleTransport oracle_;
  HttpChatTransport http_;
};

// Local HTTP endpoint speaking the chat-completion shape, backed by the
// oracle. The coordinate is recovered from the prompt text itself and the
// draw index from the "user" field, so responses match the in-process
// adapter byte for byte.
class OracleHttpServer {
 public:
  OracleHttpServer(OracleSpec spec, const ConditionMatrix& design)
      : spec_(std::move(spec)), design_(&design) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      handle(req, res);
    });
  }

  ~OracleHttpServer() { stop(); }

  // binds to a free loopback port and serves until stop()
  int start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("oracle http server failed to bind");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  int port() const { return port_; }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    if (spec_.latency_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(spec_.latency_ms));
    nlohmann::json j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("messages") || j.at("messages").empty()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"malformed request"}})", "application/json");
      return;
    }
    std::string prompt;
    for (const auto& msg : j.at("messages"))
      if (msg.value("role", "") == "user") prompt = msg.value("content", "");
    std::string model = j.value("model", "");
    int draw = 0;
    if (j.contains("user")) {
      try {
        draw = std::stoi(j.at("user").get<std::string>());
      } catch (...) {
        draw = 0;
      }
    }
    MatrixCoordinate coord = infer_coordinate(*design_, prompt);
    std::string content;
    try {
      content = oracle_respond(spec_, *design_, model, coord, draw);
    } catch (const std::exception& e) {
      res.status = 500;
      nlohmann::json err{{"error", {{"message", e.what()}}}};
      res.set_content(err.dump(), "application/json");
      return;
    }
    nlohmann::json out{
        {"id", "oracle-" + make_query_id(coordinate_key(*design_, coord), model, draw)},
        {"object", "chat.completion"},
        {"created", 0},
        {"model", model},
        {"choices", nlohmann::json::array(
                        {nlohmann::json{{"index", 0},
                                        {"message", {{"role", "assistant"},
                                                     {"content", content}}},
                                        {"finish_reason", "stop"}}})}};
    res.set_content(out.dump(), "application/json");
  }

  OracleSpec spec_;
  const ConditionMatrix* design_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace audit
