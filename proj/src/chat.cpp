#include "cipher/chat.hpp"

#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "cipher/agent.hpp"
#include "cipher/evaluation.hpp"
#include "cipher/http.hpp"
#include "cipher/text.hpp"

namespace cipher::agent {

using nlohmann::json;

const char* to_string(ChatErrorKind kind) {
  switch (kind) {
    case ChatErrorKind::Timeout: return "timeout";
    case ChatErrorKind::Http: return "http";
    case ChatErrorKind::EmptyResponse: return "empty_response";
  }
  return "?";
}

void ChatClientConfig::validate() const {
  if (endpoint_url.empty()) throw std::invalid_argument("chat endpoint is empty");
  if (!(timeout_s > 0.0)) throw std::invalid_argument("chat timeout must be positive");
  if (!(temperature >= 0.0)) throw std::invalid_argument("chat temperature must be non-negative");
}

std::optional<ChatClientConfig> ChatClientConfig::from_env() {
  const char* endpoint = std::getenv("CHAT_ENDPOINT");
  if (!endpoint || !*endpoint) return std::nullopt;
  ChatClientConfig cfg;
  cfg.endpoint_url = endpoint;
  if (const char* m = std::getenv("CHAT_MODEL"); m && *m) cfg.model = m;
  if (const char* k = std::getenv("CHAT_API_KEY")) cfg.api_key = k;
  return cfg;
}

HttpChatClient::HttpChatClient(ChatClientConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string HttpChatClient::complete(const std::string& system_prompt, const std::string& user_prompt) {
  json body = {{"model", cfg_.model},
               {"temperature", cfg_.temperature},
               {"messages", json::array({{{"role", "system"}, {"content", system_prompt}},
                                         {{"role", "user"}, {"content", user_prompt}}})}};
  Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + cfg_.api_key);

  std::string raw;
  try {
    raw = http_post_json(cfg_.endpoint_url, body.dump(), headers, cfg_.timeout_s);
  } catch (const HttpError& e) {
    if (e.kind() == HttpErrorKind::Status) throw ChatError(ChatErrorKind::Http, e.what());
    throw ChatError(ChatErrorKind::Timeout, e.what());
  }

  std::string content;
  try {
    auto j = json::parse(raw);
    const auto& c = j.at("choices").at(0).at("message").at("content");
    if (c.is_string()) content = c.get<std::string>();
  } catch (const json::exception& e) {
    throw ChatError(ChatErrorKind::EmptyResponse, std::string("no message content in response: ") + e.what());
  }
  if (trim(content).empty()) throw ChatError(ChatErrorKind::EmptyResponse, "chat endpoint returned empty content");
  return content;
}

// ---------------------------------------------------------------------------

StubChatClient::StubChatClient(Fixtures fixtures, std::uint64_t seed) : fixtures_(std::move(fixtures)), seed_(seed) {
  for (const auto& [id, variants] : fixtures_) {
    if (variants.empty()) throw std::invalid_argument("fixture " + id + " has no responses");
  }
}

void StubChatClient::use(const std::string& fixture_id) {
  if (!fixtures_.count(fixture_id)) throw std::invalid_argument("unknown fixture " + fixture_id);
  active_ = fixture_id;
}

void StubChatClient::queue(std::vector<std::string> fixture_ids) {
  for (const auto& id : fixture_ids) {
    if (!fixtures_.count(id)) throw std::invalid_argument("unknown fixture " + id);
  }
  queue_.assign(fixture_ids.rbegin(), fixture_ids.rend());
}

std::string StubChatClient::complete(const std::string& system_prompt, const std::string& user_prompt) {
  ++calls_;
  std::string id = active_;
  if (!queue_.empty()) {
    id = queue_.back();
    queue_.pop_back();
  }
  if (id.empty()) throw ChatError(ChatErrorKind::EmptyResponse, "stub has no active fixture");
  const auto& variants = fixtures_.at(id);
  std::uint64_t h = fnv1a64(std::to_string(seed_) + '\x1f' + system_prompt + '\x1f' + user_prompt);
  const std::string& text = variants[h % variants.size()];
  if (trim(text).empty()) throw ChatError(ChatErrorKind::EmptyResponse, "fixture " + id + " is empty");
  return text;
}

// ---------------------------------------------------------------------------

std::string RuleChatClient::complete(const std::string&, const std::string& user_prompt) {
  auto parsed = parse_scenario(user_prompt);
  if (!parsed) {
    static const std::regex kFirstFact(R"(Relevant facts:\n1\. ([^\n]+))");
    std::smatch m;
    if (std::regex_search(user_prompt, m, kFirstFact)) return "From the knowledge base: " + m[1].str();
    return "No printer settings were provided, so no correction is proposed. do nothing";
  }
  const evaluation::Scenario& s = *parsed;

  std::ostringstream why;
  std::vector<std::string> actions;
  const double nominal = evaluation::nominal_temperature(s.material);
  if (!s.healthy_temperature()) {
    why << "The nozzle is at " << format_real(s.nozzle_temp) << " C but " << evaluation::to_string(s.material)
        << " prints best near " << format_real(nominal) << " C, so the hotend target should change. ";
    actions.push_back("M104 S" + format_real(nominal));
  }
  if (!s.healthy_feed()) {
    why << "The feed rate of " << format_real(s.feed_rate) << "% is off nominal; restore it to 100%. ";
    actions.push_back("M220 S100");
  }
  if (!s.healthy_z_offset()) {
    why << "The Z offset of " << format_real(s.z_offset) << " mm misplaces the first layer; babystep it back. ";
    actions.push_back("M290 Z" + format_real(-s.z_offset));
  }
  if (actions.empty()) return "All settings are within their healthy ranges. do nothing";

  std::string out = why.str() + "\n```gcode\n";
  for (const auto& a : actions) out += a + "\n";
  out += "```\n";
  return out;
}

// ---------------------------------------------------------------------------

std::string prompt_hash(const std::string& text) { return hex64(fnv1a64(text)); }

AuditLog::AuditLog(std::ostream& out, Clock clock) : out_(out), clock_(std::move(clock)) {}

void AuditLog::record(const std::string& route, const std::string& prompt, const std::string& response) {
  auto now = clock_();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  json line = {{"timestamp", ts.str()},
               {"route", route},
               {"prompt_hash", prompt_hash(prompt)},
               {"response_hash", prompt_hash(response)}};
  out_ << line.dump() << '\n';
  out_.flush();
}

}  // namespace cipher::agent
