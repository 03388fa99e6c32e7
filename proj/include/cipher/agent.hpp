#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cipher/chat.hpp"
#include "cipher/evaluation.hpp"
#include "cipher/gcode.hpp"
#include "cipher/geometry.hpp"
#include "cipher/perception.hpp"
#include "cipher/printer.hpp"
#include "cipher/rag.hpp"

namespace cipher::agent {

class AgentError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Route { Perception, Control, Geometry, Knowledge };

const char* to_string(Route r);

struct AgentRequest {
  std::string text;
  std::optional<evaluation::Scenario> scenario;
  std::optional<FirmwareSnapshot> observation;
};

// Geometric imperatives, then attachments, then keyword rules; defaults to
// Knowledge.
Route route_request(const AgentRequest& req);
Route route_request(const std::string& text);

namespace prompts {

inline constexpr std::string_view kVersion = "2026-10.1";

inline constexpr std::string_view kSystem =
    "You supervise a fused-filament 3D printer. Reason step by step about the printer state you are given, "
    "then say which settings must change. When nothing needs to change, say \"do nothing\".";

inline constexpr std::string_view kScenario =
    "Current printer settings:\n{scenario}\n\n"
    "Explain whether any setting is likely to cause a print failure and what should be corrected.";

inline constexpr std::string_view kAction =
    "Current printer settings:\n{scenario}\n\n"
    "Your analysis:\n{rationale}\n\n"
    "Relevant G-code command: {command} - {brief}\nUsage notes: {usage}\n\n"
    "Reply with the corrective commands inside a ```gcode fenced block, one command per line. "
    "If no correction is needed, reply \"do nothing\".";

inline constexpr std::string_view kJudge =
    "Question:\n{question}\n\nAnswer A:\n{a}\n\nAnswer B:\n{b}\n\n"
    "Which answer is more accurate and useful? Reply with exactly one word: A, B, or draw.";

}  // namespace prompts

// Replaces every {key} with its value; unknown placeholders are an error.
std::string fill_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values);

// A fenced ```gcode block is authoritative; otherwise bare lines starting
// with a G or M word are taken. An unterminated block is an AgentError.
std::vector<std::string> extract_action_lines(const std::string& text);

struct RejectedAction {
  std::string line;
  std::string reason;
};

struct AgentResponse {
  Route route = Route::Knowledge;
  std::string rationale;
  std::vector<gcode::Command> actions;  // each validated against the codebook
  std::vector<RejectedAction> rejected;
  std::vector<rag::Retrieved> facts;
  std::string retrieved_command;
  std::string prompt;
  std::string answer;  // free text for non-control routes

  nlohmann::json to_json() const;
};

AgentResponse reason_and_act(const evaluation::Scenario& scenario, const rag::FactStore& store,
                             const gcode::Codebook& codebook, ChatClient& client,
                             const rag::EmbeddingProvider& provider, AuditLog* audit = nullptr);

struct Perceived {
  perception::Caption caption;
  perception::FlowObservation observation;
};

Perceived perceive_endpoint(const VirtualPrinter& printer, const perception::EstimatorNoiseModel& noise,
                            std::uint64_t seed,
                            const perception::TemplatePools& pools = perception::default_template_pools());

struct AgentContext {
  const gcode::Codebook* codebook = nullptr;
  const rag::FactStore* store = nullptr;
  const rag::EmbeddingProvider* provider = nullptr;
  ChatClient* client = nullptr;
  AuditLog* audit = nullptr;
  PrinterConfig printer;
  perception::EstimatorNoiseModel noise;
  geometry::PipelineOptions geometry;
  geometry::UsefulFunctionRegistry* registry = nullptr;
  std::uint64_t seed = 0;
};

// Routes and dispatches one request.
AgentResponse handle(const AgentRequest& req, AgentContext& ctx);

// Tournament judge backed by a chat model; unrecognised replies raise
// AgentError so the tournament skips the item.
evaluation::Judge make_chat_judge(ChatClient& client, AuditLog* audit = nullptr);

// Parses "Material: ABS. Nozzle temperature: 220 C ..." style text.
std::optional<evaluation::Scenario> parse_scenario(const std::string& text);

}  // namespace cipher::agent
