#include <doctest.h>

#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cipher/chat.hpp"

using namespace cipher::agent;
using nlohmann::json;

namespace {

ChatErrorKind kind_of(ChatClient& c) {
  try {
    c.complete("sys", "user");
  } catch (const ChatError& e) {
    return e.kind();
  }
  FAIL("no ChatError raised");
  return ChatErrorKind::Http;
}

struct LocalServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  std::string last_body;
  std::string last_auth;

  LocalServer() {
    auto reply = [](const std::string& content) {
      return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
    };
    server.Post("/ok", [this, reply](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      res.set_content(reply("M104 S240"), "application/json");
    });
    server.Post("/slow", [reply](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      res.set_content(reply("late"), "application/json");
    });
    server.Post("/error", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    });
    server.Post("/empty", [reply](const httplib::Request&, httplib::Response& res) {
      res.set_content(reply("   "), "application/json");
    });
    server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"choices\":[]}", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    thread.join();
  }
  ChatClientConfig config(const std::string& route, double timeout = 5.0) const {
    ChatClientConfig c;
    c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + route;
    c.timeout_s = timeout;
    return c;
  }
};

}  // namespace

TEST_CASE("stub client") {
  StubChatClient stub({{"fix", {"M104 S240"}}, {"idle", {"do nothing"}}, {"many", {"a", "b", "c", "d"}}}, 3);
  CHECK_THROWS_AS(stub.complete("s", "u"), ChatError);
  stub.use("fix");
  CHECK(stub.complete("s", "u") == "M104 S240");
  stub.queue({"idle", "fix"});
  CHECK(stub.complete("s", "u") == "do nothing");
  CHECK(stub.complete("s", "u") == "M104 S240");
  CHECK(stub.complete("s", "u") == "M104 S240");
  CHECK(stub.calls() == 5);

  stub.use("many");
  std::string first = stub.complete("s", "prompt one");
  CHECK(stub.complete("s", "prompt one") == first);
  StubChatClient twin({{"many", {"a", "b", "c", "d"}}}, 3);
  twin.use("many");
  CHECK(twin.complete("s", "prompt one") == first);

  CHECK_THROWS_AS(stub.use("missing"), std::invalid_argument);
  CHECK_THROWS_AS(StubChatClient(StubChatClient::Fixtures{{"x", {}}}), std::invalid_argument);
  StubChatClient blank(StubChatClient::Fixtures{{"b", {" "}}});
  blank.use("b");
  CHECK(kind_of(blank) == ChatErrorKind::EmptyResponse);
}

TEST_CASE("http client against a local server") {
  LocalServer srv;
  SUBCASE("success") {
    auto cfg = srv.config("/ok");
    cfg.api_key = "secret";
    HttpChatClient client(cfg);
    CHECK(client.complete("system text", "user text") == "M104 S240");
    auto body = json::parse(srv.last_body);
    CHECK(body["model"] == "gpt-4o-mini");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "user text");
    CHECK(srv.last_auth == "Bearer secret");
  }
  SUBCASE("timeout") {
    HttpChatClient client(srv.config("/slow", 0.3));
    CHECK(kind_of(client) == ChatErrorKind::Timeout);
  }
  SUBCASE("http status") {
    HttpChatClient client(srv.config("/error"));
    CHECK(kind_of(client) == ChatErrorKind::Http);
  }
  SUBCASE("empty content") {
    HttpChatClient empty(srv.config("/empty"));
    CHECK(kind_of(empty) == ChatErrorKind::EmptyResponse);
    HttpChatClient garbage(srv.config("/garbage"));
    CHECK(kind_of(garbage) == ChatErrorKind::EmptyResponse);
  }
}

TEST_CASE("unreachable endpoint is a timeout") {
  httplib::Server probe;
  int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  ChatClientConfig cfg;
  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.timeout_s = 1.0;
  HttpChatClient client(cfg);
  CHECK(kind_of(client) == ChatErrorKind::Timeout);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(HttpChatClient(ChatClientConfig{}), std::invalid_argument);
  ChatClientConfig c;
  c.endpoint_url = "http://x";
  c.timeout_s = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("audit log") {
  std::ostringstream out;
  AuditLog log(out, [] { return std::chrono::system_clock::time_point(std::chrono::seconds(1790000000)); });
  log.record("control", "prompt", "response");
  log.record("knowledge", "p2", "r2");
  std::istringstream in(out.str());
  std::string line;
  std::vector<json> rows;
  while (std::getline(in, line)) rows.push_back(json::parse(line));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]["timestamp"] == "2026-09-21T14:13:20Z");
  CHECK(rows[0]["route"] == "control");
  CHECK(rows[0]["prompt_hash"] == prompt_hash("prompt"));
  CHECK(rows[0]["response_hash"] == prompt_hash("response"));
  CHECK(rows[0].size() == 4);
  CHECK(prompt_hash("prompt").size() == 16);
  CHECK(prompt_hash("") == "cbf29ce484222325");
}

TEST_CASE("rule client") {
  RuleChatClient rule;
  auto hot = rule.complete("s", "Material: ABS. Nozzle temperature: 215 C. Feed rate: 100%. Z offset: 0 mm.");
  CHECK(hot.find("M104 S240") != std::string::npos);
  auto fine = rule.complete("s", "Material: ABS. Nozzle temperature: 240 C. Feed rate: 100%. Z offset: 0 mm.");
  CHECK(fine.find("do nothing") != std::string::npos);
}
