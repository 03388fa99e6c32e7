#include "cipher/agent.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

#include "cipher/control.hpp"
#include "cipher/text.hpp"

namespace cipher::agent {

using nlohmann::json;

const char* to_string(Route r) {
  switch (r) {
    case Route::Perception: return "perception";
    case Route::Control: return "control";
    case Route::Geometry: return "geometry";
    case Route::Knowledge: return "knowledge";
  }
  return "?";
}

namespace {

bool has_word(const std::vector<std::string>& tokens, std::initializer_list<std::string_view> words) {
  return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
    return std::find(words.begin(), words.end(), t) != words.end();
  });
}

}  // namespace

Route route_request(const AgentRequest& req) {
  if (geometry::classify_request(req.text).kind == geometry::RequestKind::Geometric) return Route::Geometry;
  if (req.scenario || parse_scenario(req.text)) return Route::Control;
  if (req.observation) return Route::Perception;

  auto tokens = tokenize(req.text);
  if (tokens.empty()) return Route::Knowledge;
  static const std::initializer_list<std::string_view> kFixVerbs = {"fix", "correct", "adjust", "repair", "tune",
                                                                      "compensate", "set", "change", "restore"};
  if (std::find(kFixVerbs.begin(), kFixVerbs.end(), tokens.front()) != kFixVerbs.end()) return Route::Control;
  if (has_word(tokens, {"error", "errors", "wrong", "look", "looks", "see", "observe", "camera", "image", "nozzle",
                        "currently", "now", "extruding", "happening", "status", "problem"})) {
    return Route::Perception;
  }
  if (has_word(tokens, {"fix", "correct", "correction", "adjust", "scenario", "recommend", "intervene"})) {
    return Route::Control;
  }
  return Route::Knowledge;
}

Route route_request(const std::string& text) { return route_request(AgentRequest{text, std::nullopt, std::nullopt}); }

std::optional<evaluation::Scenario> parse_scenario(const std::string& text) {
  using evaluation::Material;
  static const std::regex kMaterial(R"(Material:\s*(PLA|ABS|TPU|PETG))", std::regex::icase);
  static const std::regex kTemp(R"(Nozzle temperature:\s*(-?\d+(?:\.\d+)?))", std::regex::icase);
  static const std::regex kFeed(R"(Feed rate:\s*(-?\d+(?:\.\d+)?))", std::regex::icase);
  static const std::regex kZ(R"(Z offset:\s*(-?\d+(?:\.\d+)?))", std::regex::icase);
  static const std::regex kFlow(R"(Flow rate:\s*(-?\d+(?:\.\d+)?))", std::regex::icase);

  std::smatch m;
  if (!std::regex_search(text, m, kMaterial)) return std::nullopt;
  evaluation::Scenario s;
  std::string mat = to_lower(m[1].str());
  s.material = mat == "abs" ? Material::ABS : mat == "tpu" ? Material::TPU : mat == "petg" ? Material::PETG : Material::PLA;
  s.nozzle_temp = evaluation::nominal_temperature(s.material);
  if (std::regex_search(text, m, kTemp)) s.nozzle_temp = std::stod(m[1].str());
  if (std::regex_search(text, m, kFeed)) s.feed_rate = std::stod(m[1].str());
  if (std::regex_search(text, m, kZ)) s.z_offset = std::stod(m[1].str());
  if (std::regex_search(text, m, kFlow)) s.flow_rate = std::stod(m[1].str());
  return s;
}

std::string fill_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    auto open = tmpl.find('{', i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) throw AgentError("unterminated placeholder in prompt template");
    std::string key(tmpl.substr(open + 1, close - open - 1));
    auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == key; });
    if (it == values.end()) throw AgentError("no value for prompt placeholder {" + key + "}");
    out += it->second;
    i = close + 1;
  }
  return out;
}

std::vector<std::string> extract_action_lines(const std::string& text) {
  std::vector<std::string> lines;
  auto fence = text.find("```gcode");
  if (fence != std::string::npos) {
    auto body_start = text.find('\n', fence);
    if (body_start == std::string::npos) throw AgentError("unterminated gcode block");
    auto end = text.find("```", body_start);
    if (end == std::string::npos) throw AgentError("unterminated gcode block");
    std::istringstream body(text.substr(body_start + 1, end - body_start - 1));
    for (std::string line; std::getline(body, line);) {
      auto t = trim(line);
      if (!t.empty() && t.front() != ';') lines.emplace_back(t);
    }
    return lines;
  }
  static const std::regex kBare(R"(^[GgMm]\d+(\s.*)?$)");
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::string t(trim(line));
    if (std::regex_match(t, kBare)) lines.push_back(t);
  }
  return lines;
}

json AgentResponse::to_json() const {
  json j = {{"route", agent::to_string(route)}, {"rationale", rationale}, {"prompt_version", prompts::kVersion}};
  j["actions"] = json::array();
  for (const auto& a : actions) j["actions"].push_back(gcode::serialize_command(a));
  j["rejected"] = json::array();
  for (const auto& r : rejected) j["rejected"].push_back({{"line", r.line}, {"reason", r.reason}});
  j["facts"] = json::array();
  for (const auto& f : facts) j["facts"].push_back({{"id", f.fact.id}, {"similarity", f.similarity}});
  if (!retrieved_command.empty()) j["retrieved_command"] = retrieved_command;
  if (!answer.empty()) j["answer"] = answer;
  return j;
}

namespace {

std::string ask(ChatClient& client, AuditLog* audit, Route route, const std::string& prompt) {
  std::string reply = client.complete(std::string(prompts::kSystem), prompt);
  if (audit) audit->record(to_string(route), prompt, reply);
  return reply;
}

void accept_actions(const std::vector<std::string>& lines, const gcode::Codebook& codebook, AgentResponse& r) {
  for (const auto& line : lines) {
    gcode::LineResult parsed;
    try {
      parsed = gcode::parse_line(line);
    } catch (const gcode::ParseError& e) {
      r.rejected.push_back({line, e.what()});
      continue;
    }
    const auto* cmd = std::get_if<gcode::Command>(&parsed);
    if (!cmd) continue;
    gcode::Program single{{*cmd}, "agent"};
    auto report = gcode::validate_program(single, codebook);
    if (!report.ok()) {
      std::string why;
      for (const auto& issue : report.issues) why += (why.empty() ? "" : "; ") + issue.message;
      r.rejected.push_back({line, why});
      continue;
    }
    r.actions.push_back(*cmd);
  }
}

}  // namespace

AgentResponse reason_and_act(const evaluation::Scenario& scenario, const rag::FactStore& store,
                             const gcode::Codebook& codebook, ChatClient& client,
                             const rag::EmbeddingProvider& provider, AuditLog* audit) {
  AgentResponse r;
  r.route = Route::Control;
  const std::string description = scenario.describe();

  std::string question = fill_template(prompts::kScenario, {{"scenario", description}});
  r.facts = rag::retrieve_top_n(description, store, rag::RetrievalConfig{}, provider);
  r.prompt = rag::augment_prompt(question, r.facts);
  r.rationale = ask(client, audit, r.route, r.prompt);

  const auto& command = rag::retrieve_gcode_command(r.rationale, codebook, provider);
  r.retrieved_command = command.name;
  std::string action_prompt = fill_template(prompts::kAction, {{"scenario", description},
                                                               {"rationale", r.rationale},
                                                               {"command", command.name},
                                                               {"brief", command.brief},
                                                               {"usage", command.usage_notes}});
  std::string reply = ask(client, audit, r.route, action_prompt);
  accept_actions(extract_action_lines(reply), codebook, r);
  return r;
}

Perceived perceive_endpoint(const VirtualPrinter& printer, const perception::EstimatorNoiseModel& noise,
                            std::uint64_t seed, const perception::TemplatePools& pools) {
  Perceived p;
  p.observation.truth = printer.observed_flow();
  p.observation.firmware = printer.flow_multiplier();
  p.observation.estimate = perception::synthetic_estimate(p.observation.truth, noise, seed);
  p.caption = perception::synthesize_caption(std::round(p.observation.estimate * 100.0) / 100.0, std::nullopt, seed, pools);
  return p;
}

AgentResponse handle(const AgentRequest& req, AgentContext& ctx) {
  if (trim(req.text).empty()) throw AgentError("empty request");
  AgentResponse r;
  r.route = route_request(req);
  switch (r.route) {
    case Route::Geometry: {
      if (!ctx.codebook) throw AgentError("geometry route needs a codebook");
      auto result = geometry::run_pipeline(req.text, *ctx.codebook, ctx.geometry, ctx.registry);
      r.answer = result.status;
      if (result.program) {
        r.answer += "; " + std::to_string(result.toolpath->layers.size()) + " layers, " +
                    std::to_string(result.program->commands.size()) + " commands";
        for (const auto& v : result.manufacturability.violations) r.answer += "\nwarning: " + v.message;
      }
      break;
    }
    case Route::Perception: {
      VirtualPrinter printer(ctx.printer);
      if (!printer.has_observation()) {
        printer.apply(gcode::make_command('G', 92, {{'E', 0.0}}));
        printer.apply(gcode::make_command('G', 1, {{'E', 1.0}}));
      }
      auto p = perceive_endpoint(printer, ctx.noise, ctx.seed);
      r.answer = p.caption.text();
      break;
    }
    case Route::Control: {
      if (!ctx.store || !ctx.codebook || !ctx.client || !ctx.provider) {
        throw AgentError("control route needs a fact store, codebook, chat client and embedder");
      }
      auto scenario = req.scenario ? req.scenario : parse_scenario(req.text);
      if (!scenario) {
        VirtualPrinter printer(ctx.printer);
        printer.apply(gcode::make_command('G', 1, {{'E', 1.0}}));
        control::EpisodeOptions opts;
        opts.estimator_noise = ctx.noise;
        opts.seed = ctx.seed;
        auto ep = control::run_episode(printer, opts);
        r.rationale = "Estimated flow " + format_real(ep.observation.estimate) + "% against firmware " +
                      format_real(ep.observation.firmware) + "%; correcting towards " + format_real(ep.target) + "%.";
        r.actions.push_back(ep.command);
        r.answer = "observed flow after correction: " + format_real(ep.post_flow) + "%";
        break;
      }
      r = reason_and_act(*scenario, *ctx.store, *ctx.codebook, *ctx.client, *ctx.provider, ctx.audit);
      break;
    }
    case Route::Knowledge: {
      if (!ctx.client) throw AgentError("knowledge route needs a chat client");
      if (ctx.store && ctx.provider) {
        r.facts = rag::retrieve_top_n(req.text, *ctx.store, rag::RetrievalConfig{}, *ctx.provider);
      }
      r.prompt = rag::augment_prompt(req.text, r.facts);
      r.answer = ask(*ctx.client, ctx.audit, r.route, r.prompt);
      break;
    }
  }
  return r;
}

evaluation::Judge make_chat_judge(ChatClient& client, AuditLog* audit) {
  return [&client, audit](const std::string& question, const std::string& a, const std::string& b) {
    std::string prompt = fill_template(prompts::kJudge, {{"question", question}, {"a", a}, {"b", b}});
    std::string reply = to_lower(trim(client.complete(std::string(prompts::kSystem), prompt)));
    if (audit) audit->record("judge", prompt, reply);
    auto words = tokenize(reply);
    if (words.empty()) throw AgentError("judge gave an empty verdict");
    if (words.front() == "a") return evaluation::Verdict::A;
    if (words.front() == "b") return evaluation::Verdict::B;
    if (words.front() == "draw" || words.front() == "tie") return evaluation::Verdict::Draw;
    throw AgentError("judge verdict not understood: " + reply);
  };
}

}  // namespace cipher::agent
