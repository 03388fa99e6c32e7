#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cipher::agent {

enum class ChatErrorKind { Timeout, Http, EmptyResponse };

const char* to_string(ChatErrorKind kind);

class ChatError : public std::runtime_error {
 public:
  ChatError(ChatErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ChatErrorKind kind() const { return kind_; }

 private:
  ChatErrorKind kind_;
};

struct ChatClientConfig {
  std::string endpoint_url;  // full chat-completions URL
  std::string model = "gpt-4o-mini";
  std::string api_key;
  double temperature = 0.0;
  double timeout_s = 30.0;

  void validate() const;
  // CHAT_ENDPOINT, CHAT_MODEL, CHAT_API_KEY; nullopt without an endpoint.
  static std::optional<ChatClientConfig> from_env();
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt) = 0;
};

// OpenAI-style /chat/completions client. Connection failures and elapsed
// timeouts raise Timeout; non-2xx statuses raise Http; a missing or blank
// message content raises EmptyResponse.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(ChatClientConfig cfg);
  std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;
  const ChatClientConfig& config() const { return cfg_; }

 private:
  ChatClientConfig cfg_;
};

// Canned responses keyed by fixture id. With several variants per fixture,
// the pick depends only on (seed, prompts).
class StubChatClient final : public ChatClient {
 public:
  using Fixtures = std::map<std::string, std::vector<std::string>>;

  explicit StubChatClient(Fixtures fixtures, std::uint64_t seed = 0);

  void use(const std::string& fixture_id);
  // Queue of fixture ids consumed one per call; falls back to the active one.
  void queue(std::vector<std::string> fixture_ids);
  std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;

  std::size_t calls() const { return calls_; }

 private:
  Fixtures fixtures_;
  std::uint64_t seed_;
  std::string active_;
  std::vector<std::string> queue_;
  std::size_t calls_ = 0;
};

// Offline stand-in for the reasoning model. Reads a scenario description
// (material, nozzle temperature, feed rate, Z offset) from the prompt and
// answers with a short rationale plus a fenced gcode block, or "do nothing"
// when the settings are healthy.
class RuleChatClient final : public ChatClient {
 public:
  std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;
};

// JSONL audit trail: {timestamp, route, prompt_hash, response_hash}.
class AuditLog {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  explicit AuditLog(std::ostream& out, Clock clock = [] { return std::chrono::system_clock::now(); });
  void record(const std::string& route, const std::string& prompt, const std::string& response);

 private:
  std::ostream& out_;
  Clock clock_;
};

std::string prompt_hash(const std::string& text);

}  // namespace cipher::agent
